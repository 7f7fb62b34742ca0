#include "hef/io.hpp"

#include "hef/error.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

namespace hef {

namespace {

void put_u32(std::string& out, std::uint32_t v) {
    for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xffu));
}

void put_f64(std::string& out, double x) {
    const auto v = std::bit_cast<std::uint64_t>(x);
    for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xffu));
}

std::uint32_t get_u32(std::string_view s, std::size_t at) {
    std::uint32_t v = 0;
    for (int b = 0; b < 4; ++b) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(s[at + b])) << (8 * b);
    return v;
}

double get_f64(std::string_view s, std::size_t at) {
    std::uint64_t v = 0;
    for (int b = 0; b < 8; ++b) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(s[at + b])) << (8 * b);
    return std::bit_cast<double>(v);
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string fmt_short(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

std::string escape_xml(const std::string& s) {
    std::string out;
    for (char ch : s) {
        switch (ch) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            case '"': out += "&quot;"; break;
            default: out += ch;
        }
    }
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------

std::string encode_hegf(const GridFields& g) {
    if (g.n <= 0 || g.rank <= 0) throw InvalidArgument("hegf: n and rank must be positive");
    const std::size_t nodes = static_cast<std::size_t>(g.n) * g.n;
    std::string out;
    out.reserve(hegf_header_bytes + g.fields.size() * nodes * g.rank * g.rank * 16);
    out += "HEGF";
    put_u32(out, hegf_version);
    put_u32(out, static_cast<std::uint32_t>(g.n));
    put_u32(out, static_cast<std::uint32_t>(g.rank));
    put_u32(out, static_cast<std::uint32_t>(g.fields.size()));
    for (const auto& f : g.fields) {
        if (f.size() != nodes) throw InvalidArgument("hegf: field size does not match n * n");
        for (const Mat& m : f) {
            if (m.rows() != g.rank || m.cols() != g.rank) throw InvalidArgument("hegf: matrix rank mismatch");
            for (int a = 0; a < g.rank; ++a)
                for (int b = 0; b < g.rank; ++b) {
                    put_f64(out, m(a, b).real());
                    put_f64(out, m(a, b).imag());
                }
        }
    }
    return out;
}

GridFields decode_hegf(std::string_view s) {
    if (s.size() < hegf_header_bytes) throw Error("hegf: truncated header");
    if (s.substr(0, 4) != "HEGF") throw Error("hegf: bad magic");
    const std::uint32_t version = get_u32(s, 4);
    if (version != hegf_version) throw Error("hegf: unsupported version " + std::to_string(version));
    GridFields g;
    const std::uint32_t n = get_u32(s, 8);
    const std::uint32_t rank = get_u32(s, 12);
    const std::uint32_t count = get_u32(s, 16);
    if (n == 0 || n > 65536 || rank == 0 || rank > 4) throw Error("hegf: inconsistent shape");
    g.n = static_cast<int>(n);
    g.rank = static_cast<int>(rank);
    const std::size_t nodes = static_cast<std::size_t>(n) * n;
    const std::size_t per_field = nodes * rank * rank * 16;
    if (count > (s.size() - hegf_header_bytes) / per_field) throw Error("hegf: truncated payload");
    const std::size_t expect = hegf_header_bytes + per_field * count;
    if (s.size() > expect) throw Error("hegf: trailing bytes after the last field");
    std::size_t at = hegf_header_bytes;
    g.fields.resize(count);
    for (auto& f : g.fields) {
        f.assign(nodes, Mat::Zero(g.rank, g.rank));
        for (Mat& m : f)
            for (int a = 0; a < g.rank; ++a)
                for (int b = 0; b < g.rank; ++b) {
                    m(a, b) = cplx(get_f64(s, at), get_f64(s, at + 8));
                    at += 16;
                }
    }
    return g;
}

void write_hegf(const std::filesystem::path& path, const GridFields& g) { write_file(path, encode_hegf(g)); }

GridFields read_hegf(const std::filesystem::path& path) { return decode_hegf(read_file(path)); }

// ---------------------------------------------------------------------------

std::size_t CsvTable::column(const std::string& name) const {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw Error("csv: missing column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
}

std::string format_csv(const CsvTable& t) {
    std::string out;
    for (std::size_t k = 0; k < t.header.size(); ++k) out += (k ? "," : "") + t.header[k];
    out += '\n';
    for (const auto& row : t.rows) {
        if (row.size() != t.header.size()) throw InvalidArgument("csv: row width does not match the header");
        for (std::size_t k = 0; k < row.size(); ++k) out += (k ? "," : "") + fmt(row[k]);
        out += '\n';
    }
    return out;
}

CsvTable parse_csv(const std::string& text) {
    CsvTable t;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (!line.empty() && line.back() == ',') cells.emplace_back();
        if (t.header.empty()) {
            t.header = cells;
            continue;
        }
        if (cells.size() != t.header.size())
            throw Error("csv: line " + std::to_string(lineno) + " has " + std::to_string(cells.size()) +
                        " cells, header has " + std::to_string(t.header.size()));
        std::vector<double> row;
        for (const auto& c : cells) {
            char* end = nullptr;
            const double x = std::strtod(c.c_str(), &end);
            if (c.empty() || *end != '\0') throw Error("csv: line " + std::to_string(lineno) + ": bad number '" + c + "'");
            row.push_back(x);
        }
        t.rows.push_back(std::move(row));
    }
    if (t.header.empty()) throw Error("csv: empty file");
    return t;
}

void write_csv(const std::filesystem::path& path, const CsvTable& t) { write_file(path, format_csv(t)); }

CsvTable read_csv(const std::filesystem::path& path) { return parse_csv(read_file(path)); }

// ---------------------------------------------------------------------------

std::string svg_plot(const PlotSpec& spec) {
    const double W = 640, H = 420, left = 80, right = 160, top = 40, bottom = 60;
    const double pw = W - left - right, ph = H - top - bottom;
    auto tx = [&](double v) { return spec.log_x ? std::log10(v) : v; };
    auto ty = [&](double v) { return spec.log_y ? std::log10(v) : v; };
    auto usable = [&](double x, double y) {
        return std::isfinite(x) && std::isfinite(y) && (!spec.log_x || x > 0.0) && (!spec.log_y || y > 0.0);
    };

    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    for (const auto& s : spec.series)
        for (std::size_t k = 0; k < std::min(s.x.size(), s.y.size()); ++k) {
            if (!usable(s.x[k], s.y[k])) continue;
            x0 = std::min(x0, tx(s.x[k]));
            x1 = std::max(x1, tx(s.x[k]));
            y0 = std::min(y0, ty(s.y[k]));
            y1 = std::max(y1, ty(s.y[k]));
        }
    if (!(x0 <= x1)) x0 = 0.0, x1 = 1.0;
    if (!(y0 <= y1)) y0 = 0.0, y1 = 1.0;
    if (x1 - x0 < 1e-12) x0 -= 0.5, x1 += 0.5;
    if (y1 - y0 < 1e-12) y0 -= 0.5, y1 += 0.5;
    auto px = [&](double v) { return left + (tx(v) - x0) / (x1 - x0) * pw; };
    auto py = [&](double v) { return top + ph - (ty(v) - y0) / (y1 - y0) * ph; };

    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 "
       << W << ' ' << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << escape_xml(spec.title)
       << "</text>\n";
    os << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
       << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 4; ++k) {
        const double fx = x0 + (x1 - x0) * k / 4.0, fy = y0 + (y1 - y0) * k / 4.0;
        const double sx = left + pw * k / 4.0, sy = top + ph - ph * k / 4.0;
        os << "<text x=\"" << sx << "\" y=\"" << top + ph + 16 << "\" text-anchor=\"middle\">"
           << fmt_short(spec.log_x ? std::pow(10.0, fx) : fx) << "</text>\n";
        os << "<text x=\"" << left - 6 << "\" y=\"" << sy + 4 << "\" text-anchor=\"end\">"
           << fmt_short(spec.log_y ? std::pow(10.0, fy) : fy) << "</text>\n";
    }
    os << "<text x=\"" << left + pw / 2 << "\" y=\"" << H - 18 << "\" text-anchor=\"middle\">"
       << escape_xml(spec.x_label) << "</text>\n";
    os << "<text x=\"18\" y=\"" << top + ph / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
       << top + ph / 2 << ")\">" << escape_xml(spec.y_label) << "</text>\n";
    for (std::size_t s = 0; s < spec.series.size(); ++s) {
        const auto& ser = spec.series[s];
        const char* color = colors[s % 6];
        os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t k = 0; k < std::min(ser.x.size(), ser.y.size()); ++k)
            if (usable(ser.x[k], ser.y[k])) os << px(ser.x[k]) << ',' << py(ser.y[k]) << ' ';
        os << "\"/>\n";
        const double ly = top + 14 + 18.0 * s;
        os << "<line x1=\"" << left + pw + 10 << "\" y1=\"" << ly << "\" x2=\"" << left + pw + 30 << "\" y2=\"" << ly
           << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
        os << "<text x=\"" << left + pw + 34 << "\" y=\"" << ly + 4 << "\">" << escape_xml(ser.label) << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

// ---------------------------------------------------------------------------

std::string sha256_hex(std::string_view bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw Error("sha256: digest failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int k = 0; k < len; ++k) {
        out += hex[digest[k] >> 4];
        out += hex[digest[k] & 15];
    }
    return out;
}

std::string sha256_file(const std::filesystem::path& path) { return sha256_hex(read_file(path)); }

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("write failed for " + path.string());
}

}  // namespace hef
