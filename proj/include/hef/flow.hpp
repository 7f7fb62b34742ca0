#pragma once

// Perturbed heat flow
//
//     H^{-1} dH/dt = -2 ( sqrt(-1) Lambda F_H - (tr sqrt(-1) Lambda F_K / r) Id + eps log(K^{-1} H) )
//
// with Dirichlet data H = K on boundary nodes.  One step is the
// multiplicative update H <- H exp(-2 dt G), evaluated in the K-unitary
// frame as h <- h^{1/2} exp(-2 dt h^{1/2} G h^{-1/2}) h^{1/2}, which keeps h
// Hermitian positive definite for any dt.

#include "hef/bundle.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace hef {

struct FlowConfig {
    double epsilon = 0.1;
    double dt = 0.0;          ///< 0 selects the stable bound
    double t_max = 100.0;
    double tol_residual = 1e-8;
    bool det_renorm = true;
    int monitor_stride = 1;
    Exec exec = Exec::parallel;
};

/// spacing^2 * min lambda / 8.
double stable_dt(const GridDomain& dom);

/// Resolves dt = 0 to the stable bound and checks every field; throws
/// CflError carrying the stable dt when dt exceeds it.
FlowConfig resolve(const FlowConfig& cfg, const GridDomain& dom);

struct MonitorSample {
    std::int64_t step = 0;
    double t = 0.0;
    double sup_residual = 0.0;
    double sup_log_h = 0.0;
    double det_drift = 0.0;
    double energy = 0.0;   ///< integral of |residual|^2 over interior nodes
};

struct FlowState {
    MetricField H;
    double t = 0.0;
    std::int64_t steps = 0;
    bool converged = false;
    std::vector<MonitorSample> monitors;
};

/// Owns the workspace of one flow on a fixed model and domain.  evaluate()
/// computes the driving term and monitors of the current state, advance()
/// applies the update from the last evaluation.
class FlowIntegrator {
public:
    FlowIntegrator(const HolomorphicModel& model, const GridDomain& dom, const FlowConfig& cfg);

    void reset(const MetricField& H0);
    MonitorSample evaluate();
    void advance();

    MetricField metric() const;
    const std::vector<Mat>& hat_metric() const { return h_hat_; }
    double time() const { return t_; }
    std::int64_t steps() const { return steps_; }
    const FlowConfig& config() const { return cfg_; }

private:
    const HolomorphicModel& model_;
    const GridDomain& dom_;
    FlowConfig cfg_;
    std::vector<std::size_t> interior_;
    std::vector<Mat> h_hat_;
    std::vector<Mat> s_hat_;
    std::vector<Mat> drive_;  ///< h^{1/2} G h^{-1/2}, Hermitian
    std::vector<double> res_sq_;
    std::vector<double> log_norm_;
    std::vector<double> det_dev_;
    kernels::CurvatureCache cache_;
    double t_ = 0.0;
    std::int64_t steps_ = 0;
    bool evaluated_ = false;
};

/// Boundary and excised nodes reset to K.
MetricField pin_boundary(const HolomorphicModel& model, const GridDomain& dom, const MetricField& H);

/// One step from `state`; the returned state carries the monitor sample of
/// the input state appended to its series.
FlowState flow_step(const HolomorphicModel& model, const GridDomain& dom, const FlowState& state,
                    const FlowConfig& cfg);

/// Serial reference for one step, written directly in the fixed frame.
MetricField flow_step_reference(const HolomorphicModel& model, const GridDomain& dom, const MetricField& H,
                                const FlowConfig& cfg);

/// Flows from H0 until sup residual < tol_residual or t >= t_max.  The
/// result is flagged non-converged in the second case.
FlowState run_to_stationary(const HolomorphicModel& model, const GridDomain& dom, const FlowConfig& cfg,
                            const MetricField& H0);

struct DecayReport {
    bool residual_monotone = true;
    std::optional<std::int64_t> residual_violation_step;
    bool log_bound_holds = true;
    std::optional<std::int64_t> log_bound_violation_step;
    double max_residual_excess = 0.0;  ///< largest relative increase seen
};

/// Checks (i) sup residual non-increasing after the first sample, allowing
/// x' <= x (1 + 10 dt) + 1e-12 per step, and (ii) sup |log h| below the
/// discrete majorant F/eps (1 - q^k) + y0 q^k, q = 1 - 2 eps dt, of the
/// log-bound inequality, F = sup |Lambda F_K^perp|.
DecayReport monitor_decay(const FlowState& state, const FlowConfig& cfg, double sup_perp);

struct DistanceSeries {
    std::vector<double> t;
    std::vector<double> sup_sigma;
    FlowState a;
    FlowState b;
    bool monotone = true;
};

/// Runs two flows in lockstep and records sup sigma(H(t), Ht(t)) over
/// active nodes; stops when both residuals are below tolerance or at t_max.
DistanceSeries two_flow_distance(const HolomorphicModel& model, const GridDomain& dom, const FlowConfig& cfg,
                                 const MetricField& H0a, const MetricField& H0b);

/// True when every consecutive pair satisfies x' <= x (1 + rate * dt) + 1e-12.
bool non_increasing_within(const std::vector<double>& x, const std::vector<double>& t, double rate,
                           std::size_t first = 0, std::size_t* violation = nullptr);

/// K^{1/2} exp(X) K^{1/2} with X a traceless Hermitian field made of a few
/// random smooth Fourier modes of the given amplitude; boundary pinned to K.
MetricField random_compatible_metric(const HolomorphicModel& model, const GridDomain& dom, std::uint64_t seed,
                                     double amplitude, int modes = 3);

}  // namespace hef
