#pragma once

// Chern-Weil degrees of sub-bundle projections, per-witness slope verdicts,
// the restriction identities for projections, and the uniqueness probe.
//
// For a projection pi onto a sub-bundle S, orthogonal with respect to H,
//
//     deg(S) = int tr(pi sqrt(-1) Lambda F_H) - int |dbar_E pi|^2_H dvol,
//
// where the pointwise norm of the (0,1)-form f dzbar is (2 / lambda) |f|^2_H.

#include "hef/bundle.hpp"

#include <string>
#include <vector>

namespace hef {

enum class ProjectionMetric { K, H };

struct ProjectionField {
    EndoField pi;
    int target_rank = 0;
    ProjectionMetric declared = ProjectionMetric::H;
};

/// Orthogonal projection onto the span of the columns of a constant r x s
/// basis, orthogonal w.r.t. `metric` at every node; records which metric.
ProjectionField make_projection(const GridDomain& dom, const Mat& basis, const MetricField& metric,
                                ProjectionMetric declared = ProjectionMetric::H);

/// Throws InvalidArgument unless pi^2 = pi, pi^{*metric} = pi within tol and
/// tr pi rounds to target_rank at every active node.
void validate_projection(const GridDomain& dom, const ProjectionField& p, const MetricField& metric,
                         double tol = 1e-8);

struct DegreeReport {
    double degree = 0.0;
    double curvature_term = 0.0;  ///< int tr(pi sqrt(-1) Lambda F_H)
    double dbar_term = 0.0;       ///< int |dbar_E pi|^2
    int rank = 0;
    double slope = 0.0;
    double dbar_pi_l2 = 0.0;      ///< sqrt of dbar_term
    double quadrature_error = 0.0;  ///< |fine - stride-2| quadrature of the integrand
    double curvature_bound = 0.0;   ///< int sqrt(rank) |sqrt(-1) Lambda F_H|_H
};

DegreeReport degree_chern_weil(const HolomorphicModel& model, const GridDomain& dom, const MetricField& H,
                               const ProjectionField& pi);

/// deg(E) with pi = Id.
DegreeReport total_degree(const HolomorphicModel& model, const GridDomain& dom, const MetricField& H);

enum class SlopeVerdict { STABLE_WITNESS_PASSED, SEMISTABLE_BORDERLINE, DESTABILIZING };
std::string to_string(SlopeVerdict v);

struct SlopeComparison {
    SlopeVerdict verdict = SlopeVerdict::STABLE_WITNESS_PASSED;
    double tol_slope = 0.0;
    double sub_slope = 0.0;
    double total_slope = 0.0;
};

/// Compares mu(S) with mu(E).  A negative tol selects the default: ten times
/// the quadrature error of the two slopes, floored at 1e-10 (1 + |mu(E)|).
SlopeComparison slope_compare(const DegreeReport& sub, const DegreeReport& total, double tol_slope = -1.0);

struct RestrictionReport {
    double identity1 = 0.0;  ///< max |H1_S^{-1} H2_S - (pi k pi)|_S| over active nodes
    double identity2 = 0.0;  ///< max |dbar(pi k pi) pi - pi dbar(k) pi - dbar(pi)(1 - pi) k pi| over interior nodes
    double scale2 = 0.0;     ///< max |dbar(pi k pi) pi|, for relative statements
};

/// k = H1^{-1} H2, pi orthogonal w.r.t. H1 onto a dbar_E-invariant sub-bundle.
RestrictionReport restriction_algebra_check(const HolomorphicModel& model, const GridDomain& dom,
                                            const MetricField& H1, const MetricField& H2,
                                            const ProjectionField& pi_h1);

struct SubharmonicityReport {
    double identity_residual = 0.0;  ///< max |Lap tr k - rhs| over interior nodes
    double min_laplacian = 0.0;      ///< min Lap tr k
    double max_square_term = 0.0;
};

/// Discrete check of
///     Lap tr k = 2 tr(k (S1 - S2)) + (4 / lambda) |dbar_E(k) k^{-1/2}|^2_{H1},
/// k = H1^{-1} H2 and S_i = sqrt(-1) Lambda F_{H_i}.
SubharmonicityReport subharmonicity_identity(const HolomorphicModel& model, const GridDomain& dom,
                                             const MetricField& H1, const MetricField& H2);

enum class UniquenessVerdict { IDENTICAL, DECOMPOSITION, INCONCLUSIVE };
std::string to_string(UniquenessVerdict v);

struct UniquenessReport {
    SubharmonicityReport identity;
    std::vector<double> eigen_mean;      ///< per eigenvalue index of k, over active nodes
    std::vector<double> eigen_variance;
    double max_deviation_from_one = 0.0;
    UniquenessVerdict verdict = UniquenessVerdict::INCONCLUSIVE;
};

/// Rejects inputs with |det(K^{-1} H_i) - 1| > det_tol or residual sup above
/// tol_residual, then checks the identity and inspects the eigenvalues of k.
UniquenessReport uniqueness_probe(const HolomorphicModel& model, const GridDomain& dom, const MetricField& H1,
                                  const MetricField& H2, double epsilon, double tol_residual = 1e-6,
                                  double det_tol = 1e-8, double eigen_tol = 1e-5);

struct WeightedGap {
    double direct = 0.0;  ///< lambda_k deg(E) - sum (lambda_{i+1} - lambda_i) deg(S_i)
    double slope_form = 0.0;  ///< sum (lambda_{i+1} - lambda_i) rank(S_i) (mu(E) - mu(S_i))
};

/// levels strictly increasing, one report per S_1 .. S_{k-1} with increasing
/// ranks below rank(E); the rank-weighted level sum must vanish, as it does
/// for the eigenvalues of a traceless u.
WeightedGap weighted_degree_gap(const std::vector<double>& levels, const std::vector<DegreeReport>& subs,
                                const DegreeReport& total);

}  // namespace hef
