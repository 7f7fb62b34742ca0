#include "hef/endo.hpp"

#include "hef/error.hpp"

#include <cmath>
#include <sstream>

namespace hef {

namespace {

Spectrum eigh2(const Mat& a) {
    const double p = a(0, 0).real();
    const double q = a(1, 1).real();
    const cplx b = a(0, 1);
    const double mean = 0.5 * (p + q);
    const double half_diff = 0.5 * (p - q);
    const double babs = std::abs(b);
    const double rho = std::hypot(half_diff, babs);

    Spectrum s;
    s.values.resize(2);
    s.vectors.resize(2, 2);
    // the eigenvalue of larger magnitude is free of cancellation; the other
    // follows from the determinant
    const double big = mean >= 0.0 ? mean + rho : mean - rho;
    const double small = big != 0.0 ? (p * q - babs * babs) / big : 0.0;
    s.values(0) = mean >= 0.0 ? small : big;
    s.values(1) = mean >= 0.0 ? big : small;
    if (babs == 0.0) {
        // already diagonal; keep the ordering ascending
        if (p <= q) {
            s.values << p, q;
            s.vectors << 1.0, 0.0, 0.0, 1.0;
        } else {
            s.values << q, p;
            s.vectors << 0.0, 1.0, 1.0, 0.0;
        }
        return s;
    }
    // rotation angle: cos 2t = half_diff / rho, sin 2t = |b| / rho
    const double t = 0.5 * std::atan2(babs, half_diff);
    const double c = std::cos(t);
    const double sn = std::sin(t);
    const cplx phase = b / babs;
    // column 1 (largest): (c, sn e^{-i phi}); column 0: (-sn e^{i phi}, c)
    s.vectors(0, 1) = c;
    s.vectors(1, 1) = sn * std::conj(phase);
    s.vectors(0, 0) = -sn * phase;
    s.vectors(1, 0) = c;
    return s;
}

}  // namespace

Spectrum eigh(const Mat& a) {
    const int r = static_cast<int>(a.rows());
    if (r == 1) {
        Spectrum s;
        s.values.resize(1);
        s.values(0) = a(0, 0).real();
        s.vectors = Mat::Identity(1, 1);
        return s;
    }
    if (r == 2) return eigh2(a);
    Eigen::SelfAdjointEigenSolver<Mat> es(a);
    return Spectrum{es.eigenvalues(), es.eigenvectors()};
}

Mat hermitian_part(const Mat& a) { return 0.5 * (a + a.adjoint()); }

Mat selfadjoint_part(const Mat& a, const Mat& h) {
    return 0.5 * (a + h.inverse() * a.adjoint() * h);
}

double max_abs(const Mat& a) {
    double m = 0.0;
    for (Eigen::Index j = 0; j < a.cols(); ++j)
        for (Eigen::Index i = 0; i < a.rows(); ++i) m = std::max(m, std::abs(a(i, j)));
    return m;
}

void require_positive(const Spectrum& s, const char* context, double floor) {
    const double lo = s.values.minCoeff();
    const double hi = s.values.maxCoeff();
    if (!(lo > floor * hi) || !(hi > 0.0) || !std::isfinite(hi)) {
        std::ostringstream os;
        os << context << ": matrix is not well-conditioned positive definite (min eigenvalue " << lo
           << ", max eigenvalue " << hi << ")";
        throw ConditioningError(os.str(), lo);
    }
}

Mat herm_log(const Spectrum& s, double floor) {
    require_positive(s, "herm_log", floor);
    return spectral_map(s, [](double x) { return std::log(x); });
}

Mat herm_log(const Mat& p, double floor) { return herm_log(eigh(p), floor); }

Mat herm_exp(const Mat& a) {
    return spectral_map(eigh(a), [](double x) { return std::exp(x); });
}

Mat herm_sqrt(const Mat& p, double floor) {
    const Spectrum s = eigh(p);
    require_positive(s, "herm_sqrt", floor);
    return spectral_map(s, [](double x) { return std::sqrt(x); });
}

Mat herm_inv_sqrt(const Mat& p, double floor) {
    const Spectrum s = eigh(p);
    require_positive(s, "herm_inv_sqrt", floor);
    return spectral_map(s, [](double x) { return 1.0 / std::sqrt(x); });
}

double theta(double x, double y) {
    const double t = y - x;
    if (std::abs(t) < 1e-6) return 1.0 + t * (0.5 + t * (1.0 / 6.0 + t / 24.0));
    return std::expm1(t) / t;
}

Mat theta_transform(const Spectrum& logh, const Mat& a) {
    const int r = static_cast<int>(a.rows());
    const Mat& v = logh.vectors;
    Mat b = v.adjoint() * a * v;
    for (int j = 0; j < r; ++j)
        for (int i = 0; i < r; ++i) b(i, j) *= theta(logh.values(j), logh.values(i));
    return v * b * v.adjoint();
}

Mat theta_transform(const Mat& logh, const Mat& a) { return theta_transform(eigh(logh), a); }

Mat traceless_part(const Mat& a) {
    const int r = static_cast<int>(a.rows());
    Mat out = a;
    const cplx shift = a.trace() / static_cast<double>(r);
    for (int i = 0; i < r; ++i) out(i, i) -= shift;
    return out;
}

cplx inner(const Mat& a, const Mat& b, const Mat& h) {
    return (a * h.inverse() * b.adjoint() * h).trace();
}

double norm(const Mat& a, const Mat& h) { return std::sqrt(std::max(0.0, inner(a, a, h).real())); }

double sigma(const Mat& h, const Mat& ht) {
    // eigenvalues m of L^{-1} Ht L^{-*} (H = L L^*) are those of H^{-1} Ht;
    // sum (sqrt m - 1/sqrt m)^2 avoids the cancellation in tr + tr - 2r
    if (h == ht) return 0.0;
    Eigen::LLT<Mat> lh(h);
    if (lh.info() != Eigen::Success) throw ConditioningError("sigma: metric is not positive definite", 0.0);
    const Mat l = lh.matrixL();
    Mat c = l.triangularView<Eigen::Lower>().solve(ht);
    c = l.triangularView<Eigen::Lower>().solve(c.adjoint().eval());
    const Spectrum s = eigh(hermitian_part(c));
    if (!(s.values.minCoeff() > 0.0)) throw ConditioningError("sigma: metric is not positive definite", s.values.minCoeff());
    double out = 0.0;
    for (Eigen::Index k = 0; k < s.values.size(); ++k) {
        const double root = std::sqrt(s.values(k));
        const double d = root - 1.0 / root;
        out += d * d;
    }
    return out;
}

ScalarField sigma_distance(const MetricField& h, const MetricField& ht) {
    if (h.size() != ht.size() || h.rank != ht.rank)
        throw InvalidArgument("sigma_distance: fields differ in size or rank");
    ScalarField out(h.size());
    for (std::size_t i = 0; i < h.size(); ++i) out[i] = sigma(h[i], ht[i]);
    return out;
}

Mat orthogonal_projection(const Mat& basis, const Mat& h) {
    const Mat gram = basis.adjoint() * h * basis;
    return basis * gram.inverse() * basis.adjoint() * h;
}

}  // namespace hef
