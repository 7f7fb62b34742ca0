#pragma once

// Artifact formats: the HEGF binary grid-field container, CSV tables,
// minimal SVG line plots and SHA-256 content hashes.  Layouts are normative;
// see docs/formats.md.

#include "hef/endo.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace hef {

// ---------------------------------------------------------------------------
// HEGF: little-endian header
//     "HEGF" | version u32 | n u32 | rank u32 | field count u32
// followed, field after field, by n*n matrices in flat node order
// (iy * n + ix), each rank x rank row-major, each entry as (re, im) float64.

inline constexpr std::uint32_t hegf_version = 1;
inline constexpr std::size_t hegf_header_bytes = 20;

struct GridFields {
    int n = 0;
    int rank = 0;
    std::vector<std::vector<Mat>> fields;
};

std::string encode_hegf(const GridFields& g);
/// Throws Error naming the defect: bad magic, unsupported version, truncated
/// or oversized payload, inconsistent shape.
GridFields decode_hegf(std::string_view bytes);

void write_hegf(const std::filesystem::path& path, const GridFields& g);
GridFields read_hegf(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// CSV: one header line, comma-separated numeric rows written with %.17g.

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    /// Index of a named column; throws Error when absent.
    std::size_t column(const std::string& name) const;
};

std::string format_csv(const CsvTable& t);
CsvTable parse_csv(const std::string& text);
void write_csv(const std::filesystem::path& path, const CsvTable& t);
CsvTable read_csv(const std::filesystem::path& path);

// ---------------------------------------------------------------------------

struct PlotSeries {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

struct PlotSpec {
    std::string title;
    std::string x_label;
    std::string y_label;
    bool log_x = false;
    bool log_y = false;
    std::vector<PlotSeries> series;
};

/// Standalone SVG document.  Non-positive values are dropped on log axes.
std::string svg_plot(const PlotSpec& spec);

// ---------------------------------------------------------------------------

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

}  // namespace hef
