#include "hef/stability.hpp"

#include "hef/error.hpp"
#include "hef/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace hef {

ProjectionField make_projection(const GridDomain& dom, const Mat& basis, const MetricField& metric,
                                ProjectionMetric declared) {
    if (metric.size() != dom.nodes()) throw InvalidArgument("make_projection: metric does not match the lattice");
    if (basis.rows() != metric.rank || basis.cols() < 1 || basis.cols() > basis.rows())
        throw InvalidArgument("make_projection: basis must be r x s with 1 <= s <= r");
    ProjectionField p;
    p.target_rank = static_cast<int>(basis.cols());
    p.declared = declared;
    p.pi = EndoField(dom.nodes(), metric.rank);
    for (std::size_t i = 0; i < dom.nodes(); ++i) p.pi[i] = orthogonal_projection(basis, metric[i]);
    return p;
}

void validate_projection(const GridDomain& dom, const ProjectionField& p, const MetricField& metric, double tol) {
    if (p.pi.size() != dom.nodes() || metric.size() != dom.nodes() || p.pi.rank != metric.rank)
        throw InvalidArgument("projection: field shapes do not match");
    for (std::size_t i = 0; i < dom.nodes(); ++i) {
        if (!dom.active(i)) continue;
        const Mat& m = p.pi[i];
        const double scale = 1.0 + m.norm();
        const double idem = (m * m - m).norm();
        const double adj = (metric[i].inverse() * m.adjoint() * metric[i] - m).norm();
        const double tr = m.trace().real();
        if (idem > tol * scale || adj > tol * scale || std::lround(tr) != p.target_rank ||
            std::abs(tr - p.target_rank) > 1e-6) {
            std::ostringstream os;
            os << "projection: not an orthogonal rank-" << p.target_rank << " projection at node (" << dom.ix(i)
               << ", " << dom.iy(i) << "): |pi^2 - pi| = " << idem << ", |pi^* - pi| = " << adj << ", tr = " << tr;
            throw InvalidArgument(os.str());
        }
    }
}

DegreeReport degree_chern_weil(const HolomorphicModel& model, const GridDomain& dom, const MetricField& H,
                               const ProjectionField& pi) {
    validate_projection(dom, pi, H);
    const EndoField s = lambda_F(model, dom, H);
    const FormField d = dbar_E(model, dom, pi.pi);
    ScalarField curv(dom.nodes(), 0.0), sq(dom.nodes(), 0.0), bound(dom.nodes(), 0.0), total(dom.nodes(), 0.0);
    const double root_s = std::sqrt(static_cast<double>(pi.target_rank));
    for_each_index(Exec::parallel, dom.nodes(), [&](std::size_t i) {
        if (!dom.active(i)) return;
        curv[i] = (pi.pi[i] * s[i]).trace().real();
        sq[i] = 2.0 / dom.conformal_factor[i] * inner(d[i], d[i], H[i]).real();
        bound[i] = root_s * norm(s[i], H[i]);
        total[i] = curv[i] - sq[i];
    });
    DegreeReport r;
    r.curvature_term = integrate(dom, curv);
    r.dbar_term = integrate(dom, sq);
    r.degree = r.curvature_term - r.dbar_term;
    r.rank = pi.target_rank;
    r.slope = r.degree / r.rank;
    r.dbar_pi_l2 = std::sqrt(std::max(0.0, r.dbar_term));
    r.quadrature_error = std::abs(integrate(dom, total) - integrate_coarse(dom, total));
    r.curvature_bound = integrate(dom, bound);
    return r;
}

DegreeReport total_degree(const HolomorphicModel& model, const GridDomain& dom, const MetricField& H) {
    ProjectionField id;
    id.target_rank = model.rank;
    id.pi = EndoField(dom.nodes(), model.rank, identity(model.rank));
    return degree_chern_weil(model, dom, H, id);
}

std::string to_string(SlopeVerdict v) {
    switch (v) {
        case SlopeVerdict::STABLE_WITNESS_PASSED: return "STABLE_WITNESS_PASSED";
        case SlopeVerdict::SEMISTABLE_BORDERLINE: return "SEMISTABLE_BORDERLINE";
        case SlopeVerdict::DESTABILIZING: return "DESTABILIZING";
    }
    return "STABLE_WITNESS_PASSED";
}

SlopeComparison slope_compare(const DegreeReport& sub, const DegreeReport& total, double tol_slope) {
    SlopeComparison c;
    c.sub_slope = sub.slope;
    c.total_slope = total.slope;
    if (tol_slope < 0.0) {
        const double q = sub.quadrature_error / sub.rank + total.quadrature_error / total.rank;
        tol_slope = std::max(10.0 * q, 1e-10 * (1.0 + std::abs(total.slope)));
    }
    c.tol_slope = tol_slope;
    const double gap = sub.slope - total.slope;
    if (gap > tol_slope) c.verdict = SlopeVerdict::DESTABILIZING;
    else if (std::abs(gap) <= tol_slope) c.verdict = SlopeVerdict::SEMISTABLE_BORDERLINE;
    else c.verdict = SlopeVerdict::STABLE_WITNESS_PASSED;
    return c;
}

// ---------------------------------------------------------------------------

RestrictionReport restriction_algebra_check(const HolomorphicModel& model, const GridDomain& dom,
                                            const MetricField& H1, const MetricField& H2,
                                            const ProjectionField& pi_h1) {
    validate_projection(dom, pi_h1, H1);
    const int r = model.rank;
    const int s = pi_h1.target_rank;
    const std::size_t nodes = dom.nodes();
    EndoField k(nodes, r), pkp(nodes, r);
    for (std::size_t i = 0; i < nodes; ++i) {
        k[i] = H1[i].inverse() * H2[i];
        pkp[i] = pi_h1.pi[i] * k[i] * pi_h1.pi[i];
    }
    RestrictionReport rep;
    for (std::size_t i = 0; i < nodes; ++i) {
        if (!dom.active(i)) continue;
        Eigen::ColPivHouseholderQR<Mat> qr(pi_h1.pi[i]);
        const Mat q = qr.householderQ() * Mat::Identity(r, r);
        const Mat v = q.leftCols(s);
        const Mat lhs = (v.adjoint() * H1[i] * v).inverse() * (v.adjoint() * H2[i] * v);
        const Mat rhs = v.adjoint() * pkp[i] * v;
        rep.identity1 = std::max(rep.identity1, (lhs - rhs).norm());
    }
    const FormField d_pkp = dbar_E(model, dom, pkp);
    const FormField d_k = dbar_E(model, dom, k);
    const FormField d_pi = dbar_E(model, dom, pi_h1.pi);
    for (std::size_t i = 0; i < nodes; ++i) {
        if (!dom.interior(i)) continue;
        const Mat& p = pi_h1.pi[i];
        const Mat lhs = d_pkp[i] * p;
        const Mat rhs = p * d_k[i] * p + d_pi[i] * (identity(r) - p) * k[i] * p;
        rep.identity2 = std::max(rep.identity2, (lhs - rhs).norm());
        rep.scale2 = std::max(rep.scale2, lhs.norm());
    }
    return rep;
}

SubharmonicityReport subharmonicity_identity(const HolomorphicModel& model, const GridDomain& dom,
                                             const MetricField& H1, const MetricField& H2) {
    const int r = model.rank;
    const std::size_t nodes = dom.nodes();
    EndoField k(nodes, r), k_inv_half(nodes, r);
    ScalarField tr(nodes, 0.0);
    for (std::size_t i = 0; i < nodes; ++i) {
        const Mat a = herm_sqrt(H1[i], metric_condition_floor);
        const Mat a_inv = a.inverse();
        const Mat c = hermitian_part(Mat(a_inv * H2[i] * a_inv));  // similar to k, Hermitian
        k[i] = H1[i].inverse() * H2[i];
        k_inv_half[i] = a_inv * herm_inv_sqrt(c, metric_condition_floor) * a;
        tr[i] = k[i].trace().real();
    }
    const ScalarField lap = laplacian(dom, tr);
    const EndoField s1 = lambda_F(model, dom, H1);
    const EndoField s2 = lambda_F(model, dom, H2);
    const FormField dk = dbar_E(model, dom, k);
    SubharmonicityReport rep;
    rep.min_laplacian = INFINITY;
    for (std::size_t i = 0; i < nodes; ++i) {
        if (!dom.interior(i)) continue;
        const Mat x = dk[i] * k_inv_half[i];
        const double square = 4.0 / dom.conformal_factor[i] * inner(x, x, H1[i]).real();
        const double rhs = 2.0 * (k[i] * (s1[i] - s2[i])).trace().real() + square;
        rep.identity_residual = std::max(rep.identity_residual, std::abs(lap[i] - rhs));
        rep.min_laplacian = std::min(rep.min_laplacian, lap[i]);
        rep.max_square_term = std::max(rep.max_square_term, square);
    }
    return rep;
}

std::string to_string(UniquenessVerdict v) {
    switch (v) {
        case UniquenessVerdict::IDENTICAL: return "IDENTICAL";
        case UniquenessVerdict::DECOMPOSITION: return "DECOMPOSITION";
        case UniquenessVerdict::INCONCLUSIVE: return "INCONCLUSIVE";
    }
    return "INCONCLUSIVE";
}

UniquenessReport uniqueness_probe(const HolomorphicModel& model, const GridDomain& dom, const MetricField& H1,
                                  const MetricField& H2, double epsilon, double tol_residual, double det_tol,
                                  double eigen_tol) {
    int which = 1;
    for (const MetricField* h : {&H1, &H2}) {
        const double drift = max_det_drift(model, dom, *h);
        if (drift > det_tol) {
            std::ostringstream os;
            os << "uniqueness_probe: det(K^{-1} H" << which << ") differs from 1 by " << drift;
            throw InvalidArgument(os.str());
        }
        const double res = residual(model, dom, *h, epsilon).sup_norm;
        if (res > tol_residual) {
            std::ostringstream os;
            os << "uniqueness_probe: H" << which << " has residual " << res << " above " << tol_residual;
            throw InvalidArgument(os.str());
        }
        ++which;
    }
    UniquenessReport rep;
    rep.identity = subharmonicity_identity(model, dom, H1, H2);
    const int r = model.rank;
    std::vector<ScalarField> ev(r);
    for (std::size_t i = 0; i < dom.nodes(); ++i) {
        if (!dom.active(i)) continue;
        const Mat a_inv = herm_inv_sqrt(H1[i], metric_condition_floor);
        const Spectrum s = eigh(hermitian_part(Mat(a_inv * H2[i] * a_inv)));
        for (int j = 0; j < r; ++j) {
            ev[j].push_back(s.values(j));
            rep.max_deviation_from_one = std::max(rep.max_deviation_from_one, std::abs(s.values(j) - 1.0));
        }
    }
    double max_var = 0.0;
    for (int j = 0; j < r; ++j) {
        const double n = static_cast<double>(ev[j].size());
        double mean = 0.0;
        for (double x : ev[j]) mean += x / n;
        double var = 0.0;
        for (double x : ev[j]) var += (x - mean) * (x - mean) / n;
        rep.eigen_mean.push_back(mean);
        rep.eigen_variance.push_back(var);
        max_var = std::max(max_var, var);
    }
    if (rep.max_deviation_from_one <= eigen_tol) {
        rep.verdict = UniquenessVerdict::IDENTICAL;
    } else if (std::sqrt(max_var) <= eigen_tol) {
        rep.verdict = UniquenessVerdict::DECOMPOSITION;
    }
    return rep;
}

WeightedGap weighted_degree_gap(const std::vector<double>& levels, const std::vector<DegreeReport>& subs,
                                const DegreeReport& total) {
    const std::size_t k = levels.size();
    if (k < 2) throw InvalidArgument("weighted_degree_gap: need at least two levels");
    if (subs.size() != k - 1) {
        std::ostringstream os;
        os << "weighted_degree_gap: " << k << " levels need " << k - 1 << " sub-bundle reports, got " << subs.size();
        throw InvalidArgument(os.str());
    }
    int prev_rank = 0;
    double weighted = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        if (i > 0 && !(levels[i] > levels[i - 1]))
            throw InvalidArgument("weighted_degree_gap: levels must be strictly increasing");
        const int rank_i = i + 1 < k ? subs[i].rank : total.rank;
        if (rank_i <= prev_rank) throw InvalidArgument("weighted_degree_gap: sub-bundle ranks must increase");
        weighted += levels[i] * (rank_i - prev_rank);
        prev_rank = rank_i;
    }
    double mag = 0.0;
    for (double l : levels) mag = std::max(mag, std::abs(l));
    if (std::abs(weighted) > 1e-12 * (1.0 + mag) * total.rank)
        throw InvalidArgument("weighted_degree_gap: rank-weighted level sum must vanish (traceless u)");

    WeightedGap w;
    w.direct = levels[k - 1] * total.degree;
    const double mu_e = total.degree / total.rank;
    for (std::size_t i = 0; i + 1 < k; ++i) {
        const double gap = levels[i + 1] - levels[i];
        w.direct -= gap * subs[i].degree;
        w.slope_form += gap * subs[i].rank * (mu_e - subs[i].degree / subs[i].rank);
    }
    return w;
}

}  // namespace hef
