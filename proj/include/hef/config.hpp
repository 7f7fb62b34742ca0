#pragma once

// Scenario configuration: flat "key = value" text with dotted section
// prefixes.  The grammar is in docs/formats.md.  emit() writes every key in
// sorted order with numbers at 17 significant digits, so that
// parse(emit(c)) == c and emit(parse(emit(c))) == emit(c).

#include "hef/bundle.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace hef {

enum class Pipeline { single, exhaustion, sweep, uniqueness, stability };
std::string to_string(Pipeline p);

struct ScenarioConfig {
    Pipeline pipeline = Pipeline::single;
    std::uint64_t seed = 1;

    std::string domain_kind = "torus";  ///< torus | punctured
    int n = 16;
    double side = 1.0;
    std::vector<double> radii;          ///< punctured only, strictly decreasing

    std::string scenario = "direct_sum";
    ScenarioParams params;

    std::vector<double> epsilons{0.1};  ///< one value except for sweeps
    double dt = 0.0;                    ///< 0 selects the stable bound
    double t_max = 100.0;
    double tol_residual = 1e-8;
    bool det_renorm = true;
    int monitor_stride = 1;

    double ahe_threshold = 0.05;
    double tol_j = 1e-6;
    bool warm_start = true;

    double amplitude = 0.5;             ///< uniqueness: size of the random initial metrics
    std::vector<double> basis;          ///< stability: real sub-bundle direction, empty for e_1

    std::string output_dir = "heflow-out";
    bool emit_csv = true;
    bool emit_svg = true;
    bool emit_fields = true;

    bool operator==(const ScenarioConfig&) const = default;
};

/// Parses and range-checks.  Throws ConfigError carrying the 1-based line and
/// key of the first problem; checks involving several keys report the line
/// of the key named in the message.
ScenarioConfig parse_config(const std::string& text);
ScenarioConfig load_config(const std::filesystem::path& path);

std::string emit_config(const ScenarioConfig& cfg);

/// Rank of the configured scenario (1 or 2).
int scenario_rank(const std::string& scenario);

/// Canonical tag for s1 / s2 / s3 aliases; throws InvalidArgument for unknown tags.
std::string canonical_scenario(const std::string& scenario);

}  // namespace hef
