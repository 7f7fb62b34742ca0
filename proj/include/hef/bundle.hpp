#pragma once

// Holomorphic bundle background and curvature of arbitrary metrics.
//
// The bundle is trivialized over the lattice with dbar_E = dbar + a dzbar.
// The background metric K must be spatially constant; internally all fields
// are moved to a K-unitary frame (hat quantities, X^ = K^{1/2} X K^{-1/2}),
// where h = K^{-1} H becomes the Hermitian matrix K^{-1/2} H K^{-1/2} and the
// K-Chern connection has real components
//
//     A_x = a - a^*,   A_y = -i (a + a^*).
//
// Curvature of H is evaluated with the relative formula
//
//     sqrt(-1) Lambda F_H = lambdaFK - (2 / lambda) Q(h),
//     Q(h) = dbar_E(h^{-1} d_K h)  (dzbar ^ dz coefficient)
//          = 1/4 [ sum_mu nabla_mu B_mu + i ([B_x, B_y] - h^{-1} [F_xy, h]) ],
//
// with B_mu = h^{-1} nabla_mu h.  On the lattice B_mu lives on edges as
// log(h_n^{-1} W h_{n+mu} W^*) / spacing, W the parallel transport of the
// K-connection along the edge; the divergence is the difference of the two
// edges meeting at a node after transporting both into its frame.  In rank 1
// with a = 0 this is exactly the 5-point Laplacian of log h, and its trace is
// always the 5-point Laplacian of log det h.

#include "hef/endo.hpp"
#include "hef/grid.hpp"

#include <string>
#include <vector>

namespace hef {

struct HolomorphicModel {
    int rank = 0;
    std::string scenario_tag;
    EndoField a_field;    ///< dzbar coefficient of dbar_E - dbar, fixed frame
    MetricField K;        ///< background metric, spatially constant
    EndoField lambdaFK;   ///< closed-form sqrt(-1) Lambda F_K, fixed frame
    double declared_degree = 0.0;
    double sup_perp = 0.0;  ///< sup |Lambda F_K^perp|_K

    // Derived data in the K-unitary frame.
    int lattice_n = 0;
    double spacing = 0.0;
    Mat k_half;
    Mat k_half_inv;
    bool k_identity = true;
    bool flat_connection = true;  ///< a == 0 everywhere: trivial transports
    EndoField a_hat;
    EndoField lambdaFK_hat;
    EndoField links[2];   ///< W_mu(n): transport from n + mu back to n
    EndoField f_xy;       ///< curvature F_xy of the K-connection (skew-Hermitian)

    Mat to_hat_metric(const Mat& h) const;
    Mat from_hat_metric(const Mat& h) const;
    Mat to_hat_endo(const Mat& e) const;
    Mat from_hat_endo(const Mat& e) const;

    double mean_trace_lambdaFK(std::size_t i) const;
};

/// Builds a model from raw data; validates shapes, constancy and positivity
/// of K, K-selfadjointness of lambdaFK, and precomputes the frame data.
HolomorphicModel build_model(const GridDomain& lattice, int rank, EndoField a_field, MetricField K,
                             EndoField lambdaFK, std::string tag);

struct ScenarioParams {
    double c = 0.0;   ///< rank1_flat curvature constant
    double c1 = 1.0;  ///< direct_sum constants
    double c2 = -1.0;
    double nu = 1.0;  ///< extension coupling
    double bump = 0.5;  ///< amplitude of the zero-mean bump for bumped_* tags

    bool operator==(const ScenarioParams&) const = default;
};

/// Built-in scenarios: rank1_flat (s1), direct_sum (s2), extension (s3), and
/// bumped_rank1_flat / bumped_direct_sum / bumped_extension (s4).  Punctured
/// variants reuse the same model on an exhaustion lattice.
HolomorphicModel make_scenario(const std::string& tag, const ScenarioParams& params, const GridDomain& lattice);

std::vector<std::string> scenario_tags();

/// The zero-mean bump beta(x, y) = cos(2 pi x / L) cos(2 pi y / L).
double bump_profile(const GridDomain& dom, std::size_t i);

MetricField constant_metric(const GridDomain& dom, const Mat& value);

/// Centered-difference dbar f + [a, f] at interior nodes (zero elsewhere).
FormField dbar_E(const HolomorphicModel& model, const GridDomain& dom, const EndoField& f,
                 Exec exec = Exec::parallel);

/// sqrt(-1) Lambda F_H at interior nodes, H-selfadjoint; boundary and
/// excised nodes carry lambdaFK.  Returns lambdaFK unchanged when H == K.
EndoField lambda_F(const HolomorphicModel& model, const GridDomain& dom, const MetricField& H,
                   Exec exec = Exec::parallel);

struct Residual {
    EndoField field;   ///< traceless(sqrt(-1) Lambda F_H) + eps log(K^{-1} H)
    double sup_norm = 0.0;  ///< over interior nodes, H-weighted Frobenius
    double l2_norm = 0.0;
};

Residual residual(const HolomorphicModel& model, const GridDomain& dom, const MetricField& H, double epsilon,
                  Exec exec = Exec::parallel);

/// log(K^{-1} H) in the fixed frame.
EndoField log_relative(const HolomorphicModel& model, const MetricField& H);

/// sup over active nodes of |log(K^{-1} H)|_K.
double sup_log_relative(const HolomorphicModel& model, const GridDomain& dom, const MetricField& H);

/// max over active nodes of |det(K^{-1} H) - 1|.
double max_det_drift(const HolomorphicModel& model, const GridDomain& dom, const MetricField& H);

/// Applies a constant unitary change of frame U to every field of the model.
HolomorphicModel conjugate_model(const HolomorphicModel& model, const GridDomain& lattice, const Mat& u);

namespace kernels {

/// Per-node spectral data of h^ and per-edge logarithms used by the
/// curvature kernel.  Reused across time steps to avoid reallocation.
struct CurvatureCache {
    std::vector<Mat> sqrt_h;
    std::vector<Mat> inv_sqrt_h;
    std::vector<Mat> log_h;
    std::vector<Mat> edge[2];
};

/// OpenMP kernel: fills s_hat with sqrt(-1) Lambda F_H in the K-unitary
/// frame at interior nodes (h^-selfadjoint), and the cache with h^ data at
/// active nodes.
void curvature_hat(const HolomorphicModel& model, const GridDomain& dom, const std::vector<Mat>& h_hat,
                   std::vector<Mat>& s_hat, CurvatureCache& cache, Exec exec);

/// Serial reference: same discretization written node by node without the
/// cache.  Kept for testing and benchmarking the kernel.
std::vector<Mat> curvature_hat_reference(const HolomorphicModel& model, const GridDomain& dom,
                                         const std::vector<Mat>& h_hat);

}  // namespace kernels

}  // namespace hef
