#pragma once

// Pointwise algebra of Hermitian endomorphisms of a rank 1..4 bundle.
//
// Matrix convention: a metric H is a Hermitian positive-definite matrix and
// pairs vectors as <u, v>_H = v^* H u.  The H-adjoint of an endomorphism A is
// A^{*H} = H^{-1} A^* H, and the H-weighted Frobenius pairing is
//
//     inner(A, B, H) = tr(A H^{-1} B^* H),
//
// so norm(A, Id) is the plain Frobenius norm.  For an H-selfadjoint A the
// norm reduces to sqrt(tr A^2).

#include <Eigen/Dense>

#include <complex>
#include <vector>

namespace hef {

using cplx = std::complex<double>;
inline constexpr int kMaxRank = 4;

using Mat = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, kMaxRank, kMaxRank>;
using RVec = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxRank, 1>;

inline Mat identity(int r) { return Mat::Identity(r, r); }
inline Mat zeros(int r) { return Mat::Zero(r, r); }

/// Eigendecomposition A = V diag(values) V^* of a Hermitian matrix,
/// eigenvalues ascending.
struct Spectrum {
    RVec values;
    Mat vectors;
};

/// Closed form for r <= 2, Eigen's self-adjoint solver otherwise.
/// Only the lower triangle of `a` is trusted for r > 2.
Spectrum eigh(const Mat& a);

/// V f(values) V^* for a function of one real variable; exactly Hermitian.
template <class F>
Mat spectral_map(const Spectrum& s, F&& f) {
    const int r = static_cast<int>(s.values.size());
    Mat out = Mat::Zero(r, r);
    for (int k = 0; k < r; ++k) {
        const double fk = f(s.values(k));
        for (int j = 0; j < r; ++j) {
            const cplx vj = std::conj(s.vectors(j, k)) * fk;
            for (int i = 0; i <= j; ++i) out(i, j) += s.vectors(i, k) * vj;
        }
    }
    // mirror the upper triangle so the result is exactly Hermitian
    for (int j = 0; j < r; ++j) {
        out(j, j) = out(j, j).real();
        for (int i = 0; i < j; ++i) out(j, i) = std::conj(out(i, j));
    }
    return out;
}

/// (A + A^*) / 2
Mat hermitian_part(const Mat& a);

/// Average of A and its H-adjoint H^{-1} A^* H.
Mat selfadjoint_part(const Mat& a, const Mat& h);

double max_abs(const Mat& a);

/// Smallest admissible min eig / max eig of a positive-definite argument.
inline constexpr double condition_floor = 1e-14;
/// Floor used for metric fields inside the flow and its diagnostics.  Exact
/// solutions at small eps reach condition numbers e^{2 sup |log h|}, far
/// beyond 1e14; the eigensolver keeps such (near-)diagonal inputs accurate.
inline constexpr double metric_condition_floor = 1e-30;

/// Hermitian logarithm of a positive-definite matrix; throws
/// ConditioningError when min eig <= floor * max eig.
Mat herm_log(const Mat& p, double floor = condition_floor);
Mat herm_log(const Spectrum& s, double floor = condition_floor);
Mat herm_exp(const Mat& a);
Mat herm_sqrt(const Mat& p, double floor = condition_floor);
Mat herm_inv_sqrt(const Mat& p, double floor = condition_floor);

/// Throws ConditioningError unless `s` describes a positive-definite matrix
/// with min eig > floor * max eig.
void require_positive(const Spectrum& s, const char* context, double floor = condition_floor);

/// Theta(x, y) = (e^{y-x} - 1) / (y - x), with Theta(x, x) = 1.
double theta(double x, double y);

/// In the eigenbasis {e_a} of `logh`, the map e_a -> e_b component of A
/// (matrix entry (b, a)) is scaled by Theta(lambda_a, lambda_b).
Mat theta_transform(const Mat& logh, const Mat& a);
Mat theta_transform(const Spectrum& logh, const Mat& a);

/// A - (tr A / r) Id
Mat traceless_part(const Mat& a);

cplx inner(const Mat& a, const Mat& b, const Mat& h);
double norm(const Mat& a, const Mat& h);

/// tr(h~ + h~^{-1}) - 2r with h~ = H^{-1} Ht; Donaldson's distance.
double sigma(const Mat& h, const Mat& ht);

/// Orthogonal projection (w.r.t. H) onto the column span of `basis`.
Mat orthogonal_projection(const Mat& basis, const Mat& h);

// ---------------------------------------------------------------------------
// Lattice fields.  One matrix per lattice node (n*n nodes, row-major with
// x fastest); values at inactive nodes are carried along but never read.

template <class Tag>
struct LatticeField {
    int rank = 0;
    std::vector<Mat> values;

    LatticeField() = default;
    LatticeField(std::size_t nodes, int r, const Mat& fill) : rank(r), values(nodes, fill) {}
    LatticeField(std::size_t nodes, int r) : rank(r), values(nodes, Mat::Zero(r, r)) {}

    std::size_t size() const { return values.size(); }
    Mat& operator[](std::size_t i) { return values[i]; }
    const Mat& operator[](std::size_t i) const { return values[i]; }
};

struct EndoTag {};
struct MetricTag {};
struct FormTag {};

/// Endomorphism-valued lattice field.
using EndoField = LatticeField<EndoTag>;
/// Positive-definite Hermitian matrix per node (H relative to the fixed frame).
using MetricField = LatticeField<MetricTag>;
/// dz-bar coefficient of an End(E)-valued (0,1)-form.
using FormField = LatticeField<FormTag>;

using ScalarField = std::vector<double>;

/// Pointwise sigma(H, Ht) over every node of two fields of equal shape.
ScalarField sigma_distance(const MetricField& h, const MetricField& ht);

}  // namespace hef
