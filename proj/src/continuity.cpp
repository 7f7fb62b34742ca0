#include "hef/continuity.hpp"

#include "hef/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace hef {

namespace {

/// sup over interior nodes of dom of |log(a^{-1} b)| for two fixed-frame metrics.
double relative_log_sup(const HolomorphicModel& model, const GridDomain& dom, const MetricField& a,
                        const MetricField& b) {
    double sup = 0.0;
    for (std::size_t i = 0; i < dom.nodes(); ++i) {
        if (!dom.interior(i)) continue;
        const Mat ha = model.to_hat_metric(a[i]);
        const Mat hb = model.to_hat_metric(b[i]);
        const Mat r = herm_inv_sqrt(ha, metric_condition_floor);
        sup = std::max(sup, herm_log(hermitian_part(Mat(r * hb * r)), metric_condition_floor).norm());
    }
    return sup;
}

}  // namespace

ExhaustionSequence trivial_exhaustion(const GridDomain& dom) {
    ExhaustionSequence seq;
    seq.base = dom;
    seq.center_ix = dom.n / 2;
    seq.center_iy = dom.n / 2;
    seq.radii = {0.0};
    seq.stages = {dom};
    return seq;
}

ExhaustionResult solve_exhaustion(const HolomorphicModel& model, const ExhaustionSequence& seq,
                                  const FlowConfig& cfg, double tol_j, std::size_t j_max, const MetricField* H0) {
    if (!(cfg.epsilon > 0.0)) throw InvalidArgument("solve_exhaustion: epsilon must be positive");
    if (seq.size() == 0) throw InvalidArgument("solve_exhaustion: empty exhaustion sequence");
    ExhaustionResult out;
    MetricField seed = H0 ? *H0 : model.K;
    const std::size_t last = std::min(seq.size(), std::max<std::size_t>(j_max, 1));
    for (std::size_t j = 0; j < last; ++j) {
        const GridDomain& dom = seq.masks(j);
        FlowState st = run_to_stationary(model, dom, cfg, seed);
        if (!st.converged) {
            std::ostringstream os;
            os << "solve_exhaustion: stage " << j << " (radius " << seq.radii[j] << ") did not converge by t = "
               << st.t << "; last sup residual "
               << (st.monitors.empty() ? 0.0 : st.monitors.back().sup_residual);
            throw Error(os.str());
        }
        if (j > 0) out.stage_differences.push_back(relative_log_sup(model, seq.masks(j - 1), seed, st.H));
        seed = st.H;
        if (!out.stages.empty()) out.stages.back().H = MetricField();
        out.stages.push_back(std::move(st));
        out.stages_used = j + 1;
        if (j > 0 && out.stage_differences.back() < tol_j) break;
    }
    out.H = std::move(seed);
    return out;
}

// ---------------------------------------------------------------------------

std::string to_string(SweepClass c) {
    switch (c) {
        case SweepClass::AHE: return "AHE";
        case SweepClass::DIVERGENT: return "DIVERGENT";
        case SweepClass::INCONCLUSIVE: return "INCONCLUSIVE";
    }
    return "INCONCLUSIVE";
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw InvalidArgument("loglog_slope: need two or more points");
    double mx = 0.0, my = 0.0;
    const double n = static_cast<double>(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) {
        mx += -std::log(x[k]) / n;
        my += std::log(y[k]) / n;
    }
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double dx = -std::log(x[k]) - mx;
        sxy += dx * (std::log(y[k]) - my);
        sxx += dx * dx;
    }
    return sxy / sxx;
}

SweepMeasures measure_log(const HolomorphicModel& model, const GridDomain& dom, const MetricField& H) {
    SweepMeasures m;
    ScalarField mag(dom.nodes(), 0.0);
    for (std::size_t i = 0; i < dom.nodes(); ++i) {
        if (!dom.active(i)) continue;
        mag[i] = herm_log(model.to_hat_metric(H[i]), metric_condition_floor).norm();
        m.sup_logh = std::max(m.sup_logh, mag[i]);
    }
    m.l1_logh = integrate(dom, mag);
    return m;
}

void classify(EpsilonSweepReport& report, const SweepConfig& sweep) {
    std::vector<double> eps, decay, growth;
    for (const auto& e : report.entries) {
        if (!e.converged) continue;
        eps.push_back(e.epsilon);
        decay.push_back(e.sup_eps_logh);
        growth.push_back(e.sup_logh);
    }
    report.classification = SweepClass::INCONCLUSIVE;
    report.decay_slope = std::numeric_limits<double>::quiet_NaN();
    report.growth_slope = std::numeric_limits<double>::quiet_NaN();
    if (eps.empty()) return;

    const double final_value = decay.back();
    if (final_value <= sweep.floor) {
        // exact solution K at the smallest eps: the decay is complete
        report.decay_slope = -std::numeric_limits<double>::infinity();
        report.growth_slope = -std::numeric_limits<double>::infinity();
        report.classification = SweepClass::AHE;
        return;
    }
    if (eps.size() < 2) return;
    if (*std::min_element(decay.begin(), decay.end()) > 0.0) report.decay_slope = loglog_slope(eps, decay);
    if (*std::min_element(growth.begin(), growth.end()) > 0.0) report.growth_slope = loglog_slope(eps, growth);

    if (final_value < sweep.ahe_threshold && report.decay_slope <= sweep.decay_slope) {
        report.classification = SweepClass::AHE;
    } else if (report.growth_slope >= sweep.growth_slope &&
               *std::min_element(decay.begin(), decay.end()) >= sweep.ahe_threshold) {
        report.classification = SweepClass::DIVERGENT;
    }
}

EpsilonSweepReport epsilon_sweep(const HolomorphicModel& model, const GridDomain& dom, const FlowConfig& cfg,
                                 const std::vector<double>& epsilons, const SweepConfig& sweep,
                                 const ExhaustionSequence* seq) {
    if (epsilons.empty()) throw InvalidArgument("epsilon_sweep: empty epsilon list");
    for (std::size_t k = 0; k < epsilons.size(); ++k) {
        if (!(epsilons[k] > 0.0)) throw InvalidArgument("epsilon_sweep: every epsilon must be positive");
        if (k > 0 && !(epsilons[k] < epsilons[k - 1]))
            throw InvalidArgument("epsilon_sweep: epsilons must be strictly decreasing");
    }
    EpsilonSweepReport report;
    MetricField warm = model.K;
    for (double eps : epsilons) {
        FlowConfig c = cfg;
        c.epsilon = eps;
        SweepEntry entry;
        entry.epsilon = eps;
        const MetricField& start = sweep.warm_start ? warm : model.K;
        const GridDomain* measure_dom = &dom;
        try {
            if (seq) {
                ExhaustionResult r = solve_exhaustion(model, *seq, c, sweep.tol_j, SIZE_MAX, &start);
                entry.converged = true;
                for (const auto& st : r.stages) entry.steps += st.steps;
                measure_dom = &seq->masks(r.stages_used - 1);
                entry.H = std::move(r.H);
                entry.monitors = r.stages.back().monitors;
            } else {
                FlowState st = run_to_stationary(model, dom, c, start);
                entry.converged = st.converged;
                entry.steps = st.steps;
                entry.H = std::move(st.H);
                entry.monitors = std::move(st.monitors);
            }
        } catch (const Error& e) {
            entry.converged = false;
            entry.error = e.what();
            entry.H = start;
        }
        const SweepMeasures m = measure_log(model, *measure_dom, entry.H);
        entry.sup_logh = m.sup_logh;
        entry.l1_logh = m.l1_logh;
        entry.sup_eps_logh = eps * m.sup_logh;
        if (entry.converged) warm = entry.H;
        report.entries.push_back(std::move(entry));
    }
    classify(report, sweep);
    return report;
}

// ---------------------------------------------------------------------------

MeanValueReport mean_value_check(const std::vector<SweepMeasures>& measures) {
    MeanValueReport rep;
    bool all_finite = true;
    for (const auto& m : measures) {
        if (!(m.l1_logh > 0.0) || !(m.sup_logh > 0.0)) {
            rep.ratios.emplace_back();
            continue;
        }
        const double r = m.sup_logh / m.l1_logh;
        all_finite = all_finite && std::isfinite(r);
        rep.ratios.emplace_back(r);
        rep.constant = std::max(rep.constant, r);
    }
    const bool any = std::any_of(rep.ratios.begin(), rep.ratios.end(), [](const auto& r) { return r.has_value(); });
    rep.bounded = any && all_finite;
    return rep;
}

MeanValueReport mean_value_check(const EpsilonSweepReport& report) {
    std::vector<SweepMeasures> ms;
    for (const auto& e : report.entries)
        if (e.converged) ms.push_back({e.sup_logh, e.l1_logh});
    return mean_value_check(ms);
}

NormalizedLimit normalized_limit(const HolomorphicModel& model, const GridDomain& dom,
                                 const EpsilonSweepReport& report) {
    if (report.classification != SweepClass::DIVERGENT)
        throw MisuseError("normalized_limit: requires a DIVERGENT sweep, got " + to_string(report.classification));
    const SweepEntry* last = nullptr;
    for (const auto& e : report.entries)
        if (e.converged) last = &e;
    if (!last || !(last->l1_logh > 0.0)) throw MisuseError("normalized_limit: no converged nonzero solution");

    const int r = model.rank;
    NormalizedLimit out;
    out.epsilon = last->epsilon;
    out.u = EndoField(dom.nodes(), r);
    out.eigenvalue_fields.assign(r, ScalarField(dom.nodes(), 0.0));
    ScalarField mag(dom.nodes(), 0.0);
    const double scale = 1.0 / last->l1_logh;
    for (std::size_t i = 0; i < dom.nodes(); ++i) {
        if (!dom.active(i)) continue;
        const Mat lg = scale * herm_log(model.to_hat_metric(last->H[i]), metric_condition_floor);
        out.u[i] = model.from_hat_endo(lg);
        mag[i] = lg.norm();
        out.max_abs_trace = std::max(out.max_abs_trace, std::abs(lg.trace()));
        const Spectrum s = eigh(lg);
        for (int k = 0; k < r; ++k) out.eigenvalue_fields[k][i] = s.values(k);
    }
    out.l1_norm = integrate(dom, mag);
    const double count = static_cast<double>(dom.active_count());
    for (int k = 0; k < r; ++k) {
        double mean = 0.0;
        for (std::size_t i = 0; i < dom.nodes(); ++i)
            if (dom.active(i)) mean += out.eigenvalue_fields[k][i] / count;
        double var = 0.0;
        for (std::size_t i = 0; i < dom.nodes(); ++i)
            if (dom.active(i)) var += (out.eigenvalue_fields[k][i] - mean) * (out.eigenvalue_fields[k][i] - mean) / count;
        out.spread = std::max(out.spread, std::sqrt(var));
    }
    return out;
}

}  // namespace hef
