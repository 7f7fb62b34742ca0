#pragma once

// Continuity-method driver: Dirichlet solves on an exhaustion, the eps -> 0
// sweep with its AHE / DIVERGENT decision rule, and the diagnostics applied
// to the sweep (mean-value ratio, normalized limit).

#include "hef/flow.hpp"

#include <optional>
#include <string>
#include <vector>

namespace hef {

struct ExhaustionResult {
    MetricField H;                          ///< solution on the deepest solved stage
    std::vector<double> stage_differences;  ///< entry j-1: sup over M_{j-1} of |log(h_{j-1}^{-1} h_j)|
    std::vector<FlowState> stages;          ///< per-stage runs (metrics dropped except the last)
    std::size_t stages_used = 0;
};

/// Solves the eps-equation on masks(0), masks(1), ... seeding each stage with
/// the previous solution (K on newly activated nodes).  Stops once the stage
/// difference drops below tol_j or after j_max stages.  Throws Error naming
/// the stage when a stage does not converge.
ExhaustionResult solve_exhaustion(const HolomorphicModel& model, const ExhaustionSequence& seq,
                                  const FlowConfig& cfg, double tol_j, std::size_t j_max = SIZE_MAX,
                                  const MetricField* H0 = nullptr);

/// A one-stage sequence over a closed domain.
ExhaustionSequence trivial_exhaustion(const GridDomain& dom);

enum class SweepClass { AHE, DIVERGENT, INCONCLUSIVE };
std::string to_string(SweepClass c);

struct SweepConfig {
    double ahe_threshold = 0.05;  ///< sup |eps log h| must end below this for AHE
    double decay_slope = -0.8;    ///< AHE needs d log sup|eps log h| / d log(1/eps) <= this
    double growth_slope = 0.8;    ///< DIVERGENT needs d log sup|log h| / d log(1/eps) >= this
    double floor = 1e-12;         ///< sup |eps log h| at or below this counts as zero
    double tol_j = 1e-6;          ///< stage tolerance when sweeping over an exhaustion
    bool warm_start = true;
};

struct SweepEntry {
    double epsilon = 0.0;
    double sup_eps_logh = 0.0;
    double sup_logh = 0.0;
    double l1_logh = 0.0;
    bool converged = false;
    std::int64_t steps = 0;
    MetricField H;
    std::vector<MonitorSample> monitors;  ///< of the run (deepest stage on an exhaustion)
    std::string error;                    ///< message of the module error, if any
};

struct EpsilonSweepReport {
    std::vector<SweepEntry> entries;
    SweepClass classification = SweepClass::INCONCLUSIVE;
    double decay_slope = 0.0;   ///< fitted slope of log sup|eps log h| vs log(1/eps); -inf at the floor
    double growth_slope = 0.0;  ///< fitted slope of log sup|log h| vs log(1/eps)
};

/// Least-squares slope of log y against log(1/x).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

/// Solves the eps-equation for each eps (strictly decreasing, all > 0), on
/// `dom` or, when `seq` is given, through solve_exhaustion.  Non-converged
/// entries are marked and excluded from the fits.
EpsilonSweepReport epsilon_sweep(const HolomorphicModel& model, const GridDomain& dom, const FlowConfig& cfg,
                                 const std::vector<double>& epsilons, const SweepConfig& sweep = {},
                                 const ExhaustionSequence* seq = nullptr);

/// Applies the decision rule to already filled entries.
void classify(EpsilonSweepReport& report, const SweepConfig& sweep);

struct SweepMeasures {
    double sup_logh = 0.0;
    double l1_logh = 0.0;
};
SweepMeasures measure_log(const HolomorphicModel& model, const GridDomain& dom, const MetricField& H);

struct MeanValueReport {
    std::vector<std::optional<double>> ratios;  ///< sup|log h| / int |log h|; empty for zero fields
    double constant = 0.0;                      ///< fitted A: max of the defined ratios
    bool bounded = false;                       ///< at least one ratio defined and all finite
};

MeanValueReport mean_value_check(const std::vector<SweepMeasures>& measures);
MeanValueReport mean_value_check(const EpsilonSweepReport& report);

struct NormalizedLimit {
    double epsilon = 0.0;
    EndoField u;                              ///< log h / ||log h||_{L^1}
    std::vector<ScalarField> eigenvalue_fields;
    double spread = 0.0;                      ///< max over eigenvalue index of the spatial std deviation
    double l1_norm = 0.0;
    double max_abs_trace = 0.0;
};

/// Normalized log h at the smallest converged eps of a DIVERGENT sweep;
/// throws MisuseError for any other classification.
NormalizedLimit normalized_limit(const HolomorphicModel& model, const GridDomain& dom,
                                 const EpsilonSweepReport& report);

}  // namespace hef
