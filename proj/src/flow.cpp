#include "hef/flow.hpp"

#include "hef/error.hpp"
#include "hef/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

namespace hef {

double stable_dt(const GridDomain& dom) { return dom.spacing * dom.spacing * dom.min_conformal_factor() / 8.0; }

FlowConfig resolve(const FlowConfig& cfg, const GridDomain& dom) {
    FlowConfig out = cfg;
    if (!(cfg.epsilon >= 0.0) || !std::isfinite(cfg.epsilon))
        throw InvalidArgument("flow: epsilon must be finite and >= 0");
    if (!(cfg.t_max > 0.0) || !std::isfinite(cfg.t_max)) throw InvalidArgument("flow: t_max must be positive");
    if (!(cfg.tol_residual > 0.0)) throw InvalidArgument("flow: tol_residual must be positive");
    if (cfg.monitor_stride < 1) throw InvalidArgument("flow: monitor_stride must be >= 1");
    if (!(cfg.dt >= 0.0) || !std::isfinite(cfg.dt)) throw InvalidArgument("flow: dt must be finite and >= 0");
    const double stable = stable_dt(dom);
    if (cfg.dt == 0.0) {
        out.dt = stable;
    } else if (cfg.dt > stable * (1.0 + 1e-12)) {
        std::ostringstream os;
        os.precision(17);
        os << "flow: dt = " << cfg.dt << " exceeds the explicit stability bound; use dt <= " << stable;
        throw CflError(os.str(), stable);
    }
    return out;
}

// ---------------------------------------------------------------------------

FlowIntegrator::FlowIntegrator(const HolomorphicModel& model, const GridDomain& dom, const FlowConfig& cfg)
    : model_(model), dom_(dom), cfg_(resolve(cfg, dom)), interior_(dom.interior_nodes()) {
    if (dom.n != model.lattice_n) throw InvalidArgument("flow: domain lattice differs from the model lattice");
    const std::size_t nodes = dom.nodes();
    const int r = model.rank;
    h_hat_.assign(nodes, identity(r));
    s_hat_.assign(nodes, zeros(r));
    drive_.assign(nodes, zeros(r));
    res_sq_.assign(nodes, 0.0);
    log_norm_.assign(nodes, 0.0);
    det_dev_.assign(nodes, 0.0);
}

void FlowIntegrator::reset(const MetricField& H0) {
    if (H0.size() != dom_.nodes() || H0.rank != model_.rank)
        throw InvalidArgument("flow: initial metric does not match the model lattice or rank");
    const int r = model_.rank;
    for (std::size_t i = 0; i < dom_.nodes(); ++i)
        h_hat_[i] = dom_.interior(i) ? hermitian_part(model_.to_hat_metric(H0[i])) : identity(r);
    t_ = 0.0;
    steps_ = 0;
    evaluated_ = false;
}

MonitorSample FlowIntegrator::evaluate() {
    kernels::curvature_hat(model_, dom_, h_hat_, s_hat_, cache_, cfg_.exec);
    const int r = model_.rank;
    const double eps = cfg_.epsilon;
    for_each_index(cfg_.exec, interior_.size(), [&](std::size_t k) {
        const std::size_t i = interior_[k];
        const Mat& s = s_hat_[i];
        const Mat g = s - model_.mean_trace_lambdaFK(i) * identity(r) + eps * cache_.log_h[i];
        drive_[i] = hermitian_part(Mat(cache_.sqrt_h[i] * g * cache_.inv_sqrt_h[i]));
        // residual differs from G by a multiple of Id
        const double shift = (s.trace().real() - model_.lambdaFK_hat[i].trace().real()) / r;
        const Mat res = drive_[i] - shift * identity(r);
        res_sq_[i] = res.squaredNorm();
        log_norm_[i] = cache_.log_h[i].norm();
        det_dev_[i] = std::abs(h_hat_[i].determinant().real() - 1.0);
    });
    MonitorSample m;
    m.step = steps_;
    m.t = t_;
    double sup_sq = 0.0;
    for (std::size_t i : interior_) {
        sup_sq = std::max(sup_sq, res_sq_[i]);
        m.sup_log_h = std::max(m.sup_log_h, log_norm_[i]);
        m.det_drift = std::max(m.det_drift, det_dev_[i]);
        m.energy += res_sq_[i] * dom_.quad_weights[i];
    }
    m.sup_residual = std::sqrt(sup_sq);
    evaluated_ = true;
    return m;
}

void FlowIntegrator::advance() {
    if (!evaluated_) evaluate();
    const int r = model_.rank;
    const double scale = -2.0 * cfg_.dt;
    std::vector<std::uint8_t> bad(interior_.size(), 0);
    for_each_index(cfg_.exec, interior_.size(), [&](std::size_t k) {
        const std::size_t i = interior_[k];
        const Mat e = herm_exp(Mat(scale * drive_[i]));
        Mat hn = hermitian_part(Mat(cache_.sqrt_h[i] * e * cache_.sqrt_h[i]));
        if (cfg_.det_renorm) {
            const double d = hn.determinant().real();
            hn *= std::pow(d, -1.0 / r);
        }
        bad[k] = hn.allFinite() ? 0 : 1;
        h_hat_[i] = hn;
    });
    for (std::size_t k = 0; k < interior_.size(); ++k) {
        if (!bad[k]) continue;
        const std::size_t i = interior_[k];
        std::ostringstream os;
        os << "flow: non-finite metric at node (" << dom_.ix(i) << ", " << dom_.iy(i) << ") after step "
           << steps_ + 1;
        throw NonFiniteError(os.str(), dom_.ix(i), dom_.iy(i));
    }
    t_ += cfg_.dt;
    ++steps_;
    evaluated_ = false;
}

MetricField FlowIntegrator::metric() const {
    MetricField out(dom_.nodes(), model_.rank);
    for (std::size_t i = 0; i < dom_.nodes(); ++i)
        out[i] = dom_.interior(i) ? model_.from_hat_metric(h_hat_[i]) : model_.K[i];
    return out;
}

// ---------------------------------------------------------------------------

MetricField pin_boundary(const HolomorphicModel& model, const GridDomain& dom, const MetricField& H) {
    MetricField out = H;
    for (std::size_t i = 0; i < dom.nodes(); ++i)
        if (!dom.interior(i)) out[i] = model.K[i];
    return out;
}

FlowState flow_step(const HolomorphicModel& model, const GridDomain& dom, const FlowState& state,
                    const FlowConfig& cfg) {
    FlowIntegrator integ(model, dom, cfg);
    integ.reset(state.H);
    MonitorSample m = integ.evaluate();
    m.step = state.steps;
    m.t = state.t;
    integ.advance();
    FlowState out;
    out.H = integ.metric();
    out.t = state.t + integ.config().dt;
    out.steps = state.steps + 1;
    out.monitors = state.monitors;
    out.monitors.push_back(m);
    return out;
}

MetricField flow_step_reference(const HolomorphicModel& model, const GridDomain& dom, const MetricField& H,
                                const FlowConfig& cfg_in) {
    const FlowConfig cfg = resolve(cfg_in, dom);
    const int r = model.rank;
    std::vector<Mat> h_hat(dom.nodes(), identity(r));
    for (std::size_t i = 0; i < dom.nodes(); ++i)
        if (dom.interior(i)) h_hat[i] = hermitian_part(model.to_hat_metric(H[i]));
    const std::vector<Mat> s_hat = kernels::curvature_hat_reference(model, dom, h_hat);
    MetricField out(dom.nodes(), r);
    for (std::size_t i = 0; i < dom.nodes(); ++i) {
        if (!dom.interior(i)) {
            out[i] = model.K[i];
            continue;
        }
        const Mat g = s_hat[i] - (model.lambdaFK_hat[i].trace().real() / r) * identity(r) +
                      cfg.epsilon * herm_log(h_hat[i], metric_condition_floor);
        const Mat root = herm_sqrt(h_hat[i], metric_condition_floor);
        const Mat m = hermitian_part(Mat(root * g * root.inverse()));
        Mat hn = hermitian_part(Mat(root * herm_exp(Mat(-2.0 * cfg.dt * m)) * root));
        if (cfg.det_renorm) hn /= std::pow(hn.determinant().real(), 1.0 / r);
        out[i] = model.from_hat_metric(hn);
    }
    return out;
}

FlowState run_to_stationary(const HolomorphicModel& model, const GridDomain& dom, const FlowConfig& cfg,
                            const MetricField& H0) {
    FlowIntegrator integ(model, dom, cfg);
    integ.reset(H0);
    const FlowConfig& c = integ.config();
    const auto max_steps = static_cast<std::int64_t>(std::ceil(c.t_max / c.dt - 1e-9));
    FlowState state;
    for (;;) {
        const MonitorSample m = integ.evaluate();
        const bool done = m.sup_residual < c.tol_residual;
        const bool out_of_time = integ.steps() >= max_steps;
        if (done || out_of_time || integ.steps() % c.monitor_stride == 0) state.monitors.push_back(m);
        if (done || out_of_time) {
            state.converged = done;
            break;
        }
        integ.advance();
    }
    state.H = integ.metric();
    state.t = integ.time();
    state.steps = integ.steps();
    return state;
}

// ---------------------------------------------------------------------------

bool non_increasing_within(const std::vector<double>& x, const std::vector<double>& t, double rate,
                           std::size_t first, std::size_t* violation) {
    for (std::size_t k = first; k + 1 < x.size(); ++k) {
        const double dt = t[k + 1] - t[k];
        if (x[k + 1] > x[k] * (1.0 + rate * dt) + 1e-12) {
            if (violation) *violation = k + 1;
            return false;
        }
    }
    return true;
}

DecayReport monitor_decay(const FlowState& state, const FlowConfig& cfg, double sup_perp) {
    DecayReport rep;
    const auto& ms = state.monitors;
    if (ms.empty()) return rep;
    for (std::size_t k = 0; k + 1 < ms.size(); ++k) {
        if (ms[k].step < 1) continue;
        const double dt = ms[k + 1].t - ms[k].t;
        const double x0 = ms[k].sup_residual;
        const double x1 = ms[k + 1].sup_residual;
        if (x0 > 0.0) rep.max_residual_excess = std::max(rep.max_residual_excess, (x1 - x0) / x0);
        if (x1 > x0 * (1.0 + 10.0 * dt) + 1e-12 && rep.residual_monotone) {
            rep.residual_monotone = false;
            rep.residual_violation_step = ms[k + 1].step;
        }
    }
    const double y0 = ms.front().sup_log_h;
    const double eps = cfg.epsilon;
    const double dt = cfg.dt > 0.0 ? cfg.dt : (ms.size() > 1 ? (ms[1].t - ms[0].t) / (ms[1].step - ms[0].step) : 0.0);
    for (const auto& m : ms) {
        const double k = static_cast<double>(m.step - ms.front().step);
        double bound;
        if (eps > 0.0) {
            const double q = std::pow(1.0 - 2.0 * eps * dt, k);
            bound = sup_perp / eps * (1.0 - q) + y0 * q;
        } else {
            bound = y0 + 2.0 * sup_perp * (m.t - ms.front().t);
        }
        if (m.sup_log_h > bound * (1.0 + 10.0 * dt) + 1e-12) {
            rep.log_bound_holds = false;
            rep.log_bound_violation_step = m.step;
            break;
        }
    }
    return rep;
}

DistanceSeries two_flow_distance(const HolomorphicModel& model, const GridDomain& dom, const FlowConfig& cfg,
                                 const MetricField& H0a, const MetricField& H0b) {
    FlowIntegrator fa(model, dom, cfg), fb(model, dom, cfg);
    fa.reset(H0a);
    fb.reset(H0b);
    const FlowConfig& c = fa.config();
    const auto max_steps = static_cast<std::int64_t>(std::ceil(c.t_max / c.dt - 1e-9));
    DistanceSeries out;
    std::vector<double> sig(dom.nodes(), 0.0);
    for (;;) {
        const MonitorSample ma = fa.evaluate();
        const MonitorSample mb = fb.evaluate();
        const auto& ha = fa.hat_metric();
        const auto& hb = fb.hat_metric();
        for_each_index(c.exec, dom.nodes(), [&](std::size_t i) { sig[i] = dom.interior(i) ? sigma(ha[i], hb[i]) : 0.0; });
        const bool done = ma.sup_residual < c.tol_residual && mb.sup_residual < c.tol_residual;
        const bool out_of_time = fa.steps() >= max_steps;
        if (done || out_of_time || fa.steps() % c.monitor_stride == 0) {
            out.t.push_back(fa.time());
            out.sup_sigma.push_back(*std::max_element(sig.begin(), sig.end()));
            out.a.monitors.push_back(ma);
            out.b.monitors.push_back(mb);
        }
        if (done || out_of_time) {
            out.a.converged = ma.sup_residual < c.tol_residual;
            out.b.converged = mb.sup_residual < c.tol_residual;
            break;
        }
        fa.advance();
        fb.advance();
    }
    out.a.H = fa.metric();
    out.b.H = fb.metric();
    out.a.t = out.b.t = fa.time();
    out.a.steps = out.b.steps = fa.steps();
    out.monotone = non_increasing_within(out.sup_sigma, out.t, 10.0);
    return out;
}

MetricField random_compatible_metric(const HolomorphicModel& model, const GridDomain& dom, std::uint64_t seed,
                                     double amplitude, int modes) {
    const int r = model.rank;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    std::uniform_int_distribution<int> wave(-2, 2);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
    struct Mode {
        int kx, ky;
        double phi;
        Mat c;
    };
    std::vector<Mode> ms;
    for (int m = 0; m < modes; ++m) {
        Mode md{0, 0, phase(rng), zeros(r)};
        do {
            md.kx = wave(rng);
            md.ky = wave(rng);
        } while (md.kx == 0 && md.ky == 0);
        for (int j = 0; j < r; ++j)
            for (int i = 0; i < r; ++i) md.c(i, j) = cplx(normal(rng), normal(rng));
        md.c = traceless_part(hermitian_part(md.c));
        const double nrm = md.c.norm();
        if (nrm > 0.0) md.c /= nrm;
        ms.push_back(md);
    }
    const double k = 2.0 * std::numbers::pi / dom.side_length;
    MetricField out(dom.nodes(), r);
    for (std::size_t i = 0; i < dom.nodes(); ++i) {
        if (!dom.interior(i)) {
            out[i] = model.K[i];
            continue;
        }
        Mat x = zeros(r);
        for (const auto& md : ms)
            x += std::cos(k * (md.kx * coord_x(dom, i) + md.ky * coord_y(dom, i)) + md.phi) * md.c;
        x *= amplitude / std::max(1, modes);
        out[i] = model.from_hat_metric(hermitian_part(herm_exp(x)));
    }
    return out;
}

}  // namespace hef
