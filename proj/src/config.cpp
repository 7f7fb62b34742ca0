#include "hef/config.hpp"

#include "hef/error.hpp"
#include "hef/flow.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace hef {

std::string to_string(Pipeline p) {
    switch (p) {
        case Pipeline::single: return "single";
        case Pipeline::exhaustion: return "exhaustion";
        case Pipeline::sweep: return "sweep";
        case Pipeline::uniqueness: return "uniqueness";
        case Pipeline::stability: return "stability";
    }
    return "single";
}

std::string canonical_scenario(const std::string& scenario) {
    if (scenario == "s1") return "rank1_flat";
    if (scenario == "s2") return "direct_sum";
    if (scenario == "s3") return "extension";
    const auto tags = scenario_tags();
    if (std::find(tags.begin(), tags.end(), scenario) == tags.end())
        throw InvalidArgument("unknown scenario tag '" + scenario + "'");
    return scenario;
}

int scenario_rank(const std::string& scenario) {
    return canonical_scenario(scenario).find("rank1") != std::string::npos ? 1 : 2;
}

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string fmt_list(const std::vector<double>& v) {
    std::string out;
    for (std::size_t k = 0; k < v.size(); ++k) out += (k ? ", " : "") + fmt(v[k]);
    return out;
}

struct Entry {
    std::string value;
    int line = 0;
};

class Reader {
public:
    explicit Reader(std::map<std::string, Entry> entries) : entries_(std::move(entries)) {}

    int line(const std::string& key) const {
        auto it = entries_.find(key);
        return it == entries_.end() ? 0 : it->second.line;
    }
    [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
        std::ostringstream os;
        const int l = line(key);
        if (l > 0) os << "line " << l << ": ";
        os << key << ": " << msg;
        throw ConfigError(os.str(), l, key);
    }

    void real(const std::string& key, double& out) const {
        auto it = entries_.find(key);
        if (it == entries_.end()) return;
        out = parse_real(key, it->second.value);
    }
    void integer(const std::string& key, long long& out) const {
        auto it = entries_.find(key);
        if (it == entries_.end()) return;
        const std::string& v = it->second.value;
        errno = 0;
        char* end = nullptr;
        const long long x = std::strtoll(v.c_str(), &end, 10);
        if (v.empty() || *end != '\0' || errno == ERANGE) fail(key, "expected an integer, got '" + v + "'");
        out = x;
    }
    void boolean(const std::string& key, bool& out) const {
        auto it = entries_.find(key);
        if (it == entries_.end()) return;
        const std::string& v = it->second.value;
        if (v == "true") out = true;
        else if (v == "false") out = false;
        else fail(key, "expected true or false, got '" + v + "'");
    }
    void text(const std::string& key, std::string& out) const {
        auto it = entries_.find(key);
        if (it != entries_.end()) out = it->second.value;
    }
    void list(const std::string& key, std::vector<double>& out) const {
        auto it = entries_.find(key);
        if (it == entries_.end()) return;
        out.clear();
        std::stringstream ss(it->second.value);
        std::string item;
        if (trim(it->second.value).empty()) return;
        while (std::getline(ss, item, ',')) out.push_back(parse_real(key, trim(item)));
    }

private:
    double parse_real(const std::string& key, const std::string& v) const {
        errno = 0;
        char* end = nullptr;
        const double x = std::strtod(v.c_str(), &end);
        if (v.empty() || *end != '\0' || errno == ERANGE || !std::isfinite(x))
            fail(key, "expected a finite number, got '" + v + "'");
        return x;
    }

    std::map<std::string, Entry> entries_;
};

const std::vector<std::string>& known_keys() {
    static const std::vector<std::string> keys = {
        "domain.kind",      "domain.n",         "domain.radii",      "domain.side",    "flow.det_renorm",
        "flow.dt",          "flow.epsilon",     "flow.monitor_stride", "flow.t_max",   "flow.tol_residual",
        "model.bump",       "model.c",          "model.c1",          "model.c2",       "model.nu",
        "model.scenario",   "output.csv",       "output.dir",        "output.fields",  "output.svg",
        "pipeline",         "seed",             "stability.basis",   "sweep.ahe_threshold", "sweep.tol_j",
        "sweep.warm_start", "uniqueness.amplitude"};
    return keys;
}

void check(const ScenarioConfig& c, const Reader& r) {
    // domain
    if (c.domain_kind != "torus" && c.domain_kind != "punctured")
        r.fail("domain.kind", "expected torus or punctured, got '" + c.domain_kind + "'");
    if (c.n < 8 || c.n > 4096) r.fail("domain.n", "lattice size must be in [8, 4096]");
    if (!(c.side > 0.0)) r.fail("domain.side", "side length must be positive");
    GridDomain base = build_flat_torus(c.n, c.side);
    if (c.domain_kind == "punctured") {
        if (c.radii.empty()) r.fail("domain.radii", "a punctured domain needs at least one radius");
        try {
            base = build_punctured_square(c.n, c.side, c.radii).base;
        } catch (const InvalidArgument& e) {
            r.fail("domain.radii", e.what());
        }
    } else if (!c.radii.empty()) {
        r.fail("domain.radii", "radii are only meaningful for a punctured domain");
    }

    // model
    try {
        (void)canonical_scenario(c.scenario);
    } catch (const InvalidArgument& e) {
        r.fail("model.scenario", e.what());
    }
    if (!(c.params.nu >= 0.0)) r.fail("model.nu", "coupling must be >= 0");
    if (!(std::abs(c.params.bump) <= 10.0)) r.fail("model.bump", "bump amplitude must be in [-10, 10]");

    // flow
    if (c.epsilons.empty()) r.fail("flow.epsilon", "at least one value is required");
    for (double e : c.epsilons)
        if (!(e >= 0.0)) r.fail("flow.epsilon", "values must be >= 0");
    const bool needs_positive = c.pipeline == Pipeline::sweep || c.pipeline == Pipeline::exhaustion;
    if (needs_positive)
        for (double e : c.epsilons)
            if (!(e > 0.0)) r.fail("flow.epsilon", "the " + to_string(c.pipeline) + " pipeline needs eps > 0");
    if (c.pipeline == Pipeline::sweep) {
        if (c.epsilons.size() < 2) r.fail("flow.epsilon", "a sweep needs at least two values");
        for (std::size_t k = 1; k < c.epsilons.size(); ++k)
            if (!(c.epsilons[k] < c.epsilons[k - 1])) r.fail("flow.epsilon", "sweep values must strictly decrease");
    } else if (c.epsilons.size() != 1) {
        r.fail("flow.epsilon", "only the sweep pipeline takes a list");
    }
    if (!(c.dt >= 0.0)) r.fail("flow.dt", "time step must be >= 0");
    const double stable = stable_dt(base);
    if (c.dt > stable * (1.0 + 1e-12)) {
        std::ostringstream os;
        os.precision(17);
        os << "dt = " << c.dt << " exceeds the explicit stability bound; use dt <= " << stable;
        r.fail("flow.dt", os.str());
    }
    if (!(c.t_max > 0.0)) r.fail("flow.t_max", "must be positive");
    if (!(c.tol_residual > 0.0)) r.fail("flow.tol_residual", "must be positive");
    if (c.monitor_stride < 1) r.fail("flow.monitor_stride", "must be >= 1");

    if (!(c.ahe_threshold > 0.0)) r.fail("sweep.ahe_threshold", "must be positive");
    if (!(c.tol_j >= 0.0)) r.fail("sweep.tol_j", "must be >= 0");
    if (!(c.amplitude >= 0.0 && c.amplitude <= 5.0)) r.fail("uniqueness.amplitude", "must be in [0, 5]");

    const int rank = scenario_rank(c.scenario);
    if (c.pipeline == Pipeline::stability && rank < 2)
        r.fail("model.scenario", "the stability pipeline needs a scenario of rank >= 2");
    if (!c.basis.empty()) {
        if (static_cast<int>(c.basis.size()) != rank)
            r.fail("stability.basis", "needs one entry per bundle rank (" + std::to_string(rank) + ")");
        double sq = 0.0;
        for (double b : c.basis) sq += b * b;
        if (!(sq > 0.0)) r.fail("stability.basis", "direction must be nonzero");
    }
}

}  // namespace

ScenarioConfig parse_config(const std::string& text) {
    std::map<std::string, Entry> entries;
    std::istringstream in(text);
    std::string raw;
    int lineno = 0;
    const auto& keys = known_keys();
    while (std::getline(in, raw)) {
        ++lineno;
        const auto hash = raw.find('#');
        const std::string body = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (body.empty()) continue;
        const auto eq = body.find('=');
        if (eq == std::string::npos) {
            std::ostringstream os;
            os << "line " << lineno << ": expected 'key = value', got '" << body << "'";
            throw ConfigError(os.str(), lineno, "");
        }
        const std::string key = trim(body.substr(0, eq));
        const std::string value = trim(body.substr(eq + 1));
        std::ostringstream os;
        os << "line " << lineno << ": ";
        if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
            os << "unknown key '" << key << "'";
            throw ConfigError(os.str(), lineno, key);
        }
        if (entries.count(key)) {
            os << "duplicate key '" << key << "' (first set on line " << entries[key].line << ")";
            throw ConfigError(os.str(), lineno, key);
        }
        entries[key] = Entry{value, lineno};
    }

    Reader r(std::move(entries));
    ScenarioConfig c;

    std::string pipeline = to_string(c.pipeline);
    r.text("pipeline", pipeline);
    if (pipeline == "single") c.pipeline = Pipeline::single;
    else if (pipeline == "exhaustion") c.pipeline = Pipeline::exhaustion;
    else if (pipeline == "sweep") c.pipeline = Pipeline::sweep;
    else if (pipeline == "uniqueness") c.pipeline = Pipeline::uniqueness;
    else if (pipeline == "stability") c.pipeline = Pipeline::stability;
    else r.fail("pipeline", "expected single, exhaustion, sweep, uniqueness or stability, got '" + pipeline + "'");

    long long seed = static_cast<long long>(c.seed);
    r.integer("seed", seed);
    if (seed < 0) r.fail("seed", "must be >= 0");
    c.seed = static_cast<std::uint64_t>(seed);

    r.text("domain.kind", c.domain_kind);
    long long n = c.n;
    r.integer("domain.n", n);
    if (n < 8 || n > 4096) r.fail("domain.n", "lattice size must be in [8, 4096]");
    c.n = static_cast<int>(n);
    r.real("domain.side", c.side);
    r.list("domain.radii", c.radii);

    r.text("model.scenario", c.scenario);
    r.real("model.c", c.params.c);
    r.real("model.c1", c.params.c1);
    r.real("model.c2", c.params.c2);
    r.real("model.nu", c.params.nu);
    r.real("model.bump", c.params.bump);

    r.list("flow.epsilon", c.epsilons);
    r.real("flow.dt", c.dt);
    r.real("flow.t_max", c.t_max);
    r.real("flow.tol_residual", c.tol_residual);
    r.boolean("flow.det_renorm", c.det_renorm);
    long long stride = c.monitor_stride;
    r.integer("flow.monitor_stride", stride);
    if (stride < 1 || stride > 1000000000LL) r.fail("flow.monitor_stride", "must be in [1, 1e9]");
    c.monitor_stride = static_cast<int>(stride);

    r.real("sweep.ahe_threshold", c.ahe_threshold);
    r.real("sweep.tol_j", c.tol_j);
    r.boolean("sweep.warm_start", c.warm_start);
    r.real("uniqueness.amplitude", c.amplitude);
    r.list("stability.basis", c.basis);

    r.text("output.dir", c.output_dir);
    if (c.output_dir.empty()) r.fail("output.dir", "must not be empty");
    r.boolean("output.csv", c.emit_csv);
    r.boolean("output.svg", c.emit_svg);
    r.boolean("output.fields", c.emit_fields);

    check(c, r);
    return c;
}

ScenarioConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read config file " + path.string(), 0, "");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string emit_config(const ScenarioConfig& c) {
    auto b = [](bool v) { return std::string(v ? "true" : "false"); };
    std::map<std::string, std::string> kv = {
        {"domain.kind", c.domain_kind},
        {"domain.n", std::to_string(c.n)},
        {"domain.radii", fmt_list(c.radii)},
        {"domain.side", fmt(c.side)},
        {"flow.det_renorm", b(c.det_renorm)},
        {"flow.dt", fmt(c.dt)},
        {"flow.epsilon", fmt_list(c.epsilons)},
        {"flow.monitor_stride", std::to_string(c.monitor_stride)},
        {"flow.t_max", fmt(c.t_max)},
        {"flow.tol_residual", fmt(c.tol_residual)},
        {"model.bump", fmt(c.params.bump)},
        {"model.c", fmt(c.params.c)},
        {"model.c1", fmt(c.params.c1)},
        {"model.c2", fmt(c.params.c2)},
        {"model.nu", fmt(c.params.nu)},
        {"model.scenario", c.scenario},
        {"output.csv", b(c.emit_csv)},
        {"output.dir", c.output_dir},
        {"output.fields", b(c.emit_fields)},
        {"output.svg", b(c.emit_svg)},
        {"pipeline", to_string(c.pipeline)},
        {"seed", std::to_string(c.seed)},
        {"stability.basis", fmt_list(c.basis)},
        {"sweep.ahe_threshold", fmt(c.ahe_threshold)},
        {"sweep.tol_j", fmt(c.tol_j)},
        {"sweep.warm_start", b(c.warm_start)},
        {"uniqueness.amplitude", fmt(c.amplitude)},
    };
    std::string out;
    for (const auto& [k, v] : kv) out += v.empty() ? k + " =\n" : k + " = " + v + "\n";
    return out;
}

}  // namespace hef
