#include "hef/bundle.hpp"

#include "hef/error.hpp"
#include "hef/parallel.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace hef {

namespace {

const cplx kI(0.0, 1.0);

/// exp(scale * A) for skew-Hermitian A, computed from the Hermitian -iA.
Mat unitary_exp(const Mat& skew, double scale) {
    const Mat herm = hermitian_part(Mat(-kI * skew));
    const Spectrum s = eigh(herm);
    const int r = static_cast<int>(skew.rows());
    Mat out = Mat::Zero(r, r);
    for (int k = 0; k < r; ++k) {
        const cplx ph = std::exp(kI * (scale * s.values(k)));
        out += ph * s.vectors.col(k) * s.vectors.col(k).adjoint();
    }
    return out;
}

bool is_zero(const Mat& m) { return max_abs(m) == 0.0; }

bool bitwise_equal(const Mat& a, const Mat& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
    for (Eigen::Index j = 0; j < a.cols(); ++j)
        for (Eigen::Index i = 0; i < a.rows(); ++i)
            if (a(i, j) != b(i, j)) return false;
    return true;
}

void connection_components(const Mat& a_hat, Mat& ax, Mat& ay) {
    ax = a_hat - a_hat.adjoint();
    ay = -kI * (a_hat + a_hat.adjoint());
}

}  // namespace

Mat HolomorphicModel::to_hat_metric(const Mat& h) const {
    return k_identity ? h : Mat(k_half_inv * h * k_half_inv);
}

Mat HolomorphicModel::from_hat_metric(const Mat& h) const {
    return k_identity ? h : Mat(k_half * h * k_half);
}

Mat HolomorphicModel::to_hat_endo(const Mat& e) const {
    return k_identity ? e : Mat(k_half * e * k_half_inv);
}

Mat HolomorphicModel::from_hat_endo(const Mat& e) const {
    return k_identity ? e : Mat(k_half_inv * e * k_half);
}

double HolomorphicModel::mean_trace_lambdaFK(std::size_t i) const {
    return lambdaFK[i].trace().real() / rank;
}

HolomorphicModel build_model(const GridDomain& lattice, int rank, EndoField a_field, MetricField K,
                             EndoField lambdaFK, std::string tag) {
    if (rank < 1 || rank > kMaxRank) {
        std::ostringstream os;
        os << "build_model: rank " << rank << " outside 1.." << kMaxRank;
        throw InvalidArgument(os.str());
    }
    const std::size_t nodes = lattice.nodes();
    for (const auto* sz : {&a_field.values, &lambdaFK.values})
        if (sz->size() != nodes) throw InvalidArgument("build_model: field size does not match the lattice");
    if (K.size() != nodes) throw InvalidArgument("build_model: K size does not match the lattice");
    if (a_field.rank != rank || lambdaFK.rank != rank || K.rank != rank)
        throw InvalidArgument("build_model: field rank differs from the declared rank");

    HolomorphicModel m;
    m.rank = rank;
    m.scenario_tag = std::move(tag);
    m.lattice_n = lattice.n;
    m.spacing = lattice.spacing;
    m.a_field = std::move(a_field);
    m.K = std::move(K);
    m.lambdaFK = std::move(lambdaFK);
    m.a_field.rank = m.K.rank = m.lambdaFK.rank = rank;

    const Mat& k0 = m.K[0];
    for (std::size_t i = 0; i < nodes; ++i)
        if (!bitwise_equal(m.K[i], k0))
            throw InvalidArgument("build_model: background metric K must be spatially constant");
    const Spectrum ks = eigh(hermitian_part(k0));
    require_positive(ks, "build_model: K");
    m.k_identity = bitwise_equal(k0, identity(rank));
    m.k_half = spectral_map(ks, [](double x) { return std::sqrt(x); });
    m.k_half_inv = spectral_map(ks, [](double x) { return 1.0 / std::sqrt(x); });
    if (m.k_identity) {
        m.k_half = identity(rank);
        m.k_half_inv = identity(rank);
    }

    const Mat kinv = k0.inverse();
    double sup_perp = 0.0;
    m.a_hat = EndoField(nodes, rank);
    m.lambdaFK_hat = EndoField(nodes, rank);
    m.flat_connection = true;
    for (std::size_t i = 0; i < nodes; ++i) {
        const Mat& f = m.lambdaFK[i];
        if (max_abs(f - kinv * f.adjoint() * k0) > 1e-10 * (1.0 + max_abs(f)))
            throw InvalidArgument("build_model: lambdaFK is not K-selfadjoint");
        m.lambdaFK_hat[i] = m.to_hat_endo(f);
        m.a_hat[i] = m.to_hat_endo(m.a_field[i]);
        m.flat_connection = m.flat_connection && is_zero(m.a_field[i]);
        sup_perp = std::max(sup_perp, norm(traceless_part(f), k0));
    }
    m.sup_perp = sup_perp;

    const double h = lattice.spacing;
    for (int mu = 0; mu < 2; ++mu) m.links[mu] = EndoField(nodes, rank, identity(rank));
    m.f_xy = EndoField(nodes, rank);
    if (!m.flat_connection) {
        std::vector<Mat> ax(nodes), ay(nodes);
        for (std::size_t i = 0; i < nodes; ++i) connection_components(m.a_hat[i], ax[i], ay[i]);
        for (std::size_t i = 0; i < nodes; ++i) {
            const std::size_t jx = lattice.neighbor(i, 0, 1);
            const std::size_t jy = lattice.neighbor(i, 1, 1);
            m.links[0][i] = unitary_exp(Mat(0.5 * (ax[i] + ax[jx])), h);
            m.links[1][i] = unitary_exp(Mat(0.5 * (ay[i] + ay[jy])), h);
            const Mat dxay = (ay[jx] - ay[lattice.neighbor(i, 0, -1)]) / (2.0 * h);
            const Mat dyax = (ax[jy] - ax[lattice.neighbor(i, 1, -1)]) / (2.0 * h);
            m.f_xy[i] = dxay - dyax + ax[i] * ay[i] - ay[i] * ax[i];
        }
    }
    return m;
}

double bump_profile(const GridDomain& dom, std::size_t i) {
    const double k = 2.0 * std::numbers::pi / dom.side_length;
    return std::cos(k * coord_x(dom, i)) * std::cos(k * coord_y(dom, i));
}

MetricField constant_metric(const GridDomain& dom, const Mat& value) {
    return MetricField(dom.nodes(), static_cast<int>(value.rows()), value);
}

std::vector<std::string> scenario_tags() {
    return {"rank1_flat", "direct_sum", "extension", "bumped_rank1_flat", "bumped_direct_sum", "bumped_extension"};
}

HolomorphicModel make_scenario(const std::string& tag_in, const ScenarioParams& p, const GridDomain& lattice) {
    std::string tag = tag_in;
    if (tag == "s1") tag = "rank1_flat";
    if (tag == "s2") tag = "direct_sum";
    if (tag == "s3") tag = "extension";
    bool bumped = false;
    std::string base = tag;
    if (tag.rfind("bumped_", 0) == 0) {
        bumped = true;
        base = tag.substr(7);
    }
    const std::size_t nodes = lattice.nodes();
    const double vol = lattice.volume();
    const double amp = bumped ? p.bump : 0.0;
    if (!std::isfinite(p.c) || !std::isfinite(p.c1) || !std::isfinite(p.c2) || !std::isfinite(p.nu) ||
        !std::isfinite(p.bump))
        throw InvalidArgument("make_scenario: parameters must be finite");

    if (base == "rank1_flat") {
        EndoField lam(nodes, 1);
        for (std::size_t i = 0; i < nodes; ++i) lam[i](0, 0) = p.c + amp * bump_profile(lattice, i);
        auto m = build_model(lattice, 1, EndoField(nodes, 1), constant_metric(lattice, identity(1)), std::move(lam),
                             tag);
        m.declared_degree = p.c * vol;
        return m;
    }
    if (base == "direct_sum") {
        EndoField lam(nodes, 2);
        for (std::size_t i = 0; i < nodes; ++i) {
            const double b = amp * bump_profile(lattice, i);
            lam[i](0, 0) = p.c1 + b;
            lam[i](1, 1) = p.c2 - b;
        }
        auto m = build_model(lattice, 2, EndoField(nodes, 2), constant_metric(lattice, identity(2)), std::move(lam),
                             tag);
        m.declared_degree = (p.c1 + p.c2) * vol;
        return m;
    }
    if (base == "extension") {
        EndoField a(nodes, 2);
        EndoField lam(nodes, 2);
        for (std::size_t i = 0; i < nodes; ++i) {
            a[i](0, 1) = p.nu;
            const double b = amp * bump_profile(lattice, i);
            lam[i](0, 0) = b;
            lam[i](1, 1) = -b;
        }
        auto m = build_model(lattice, 2, std::move(a), constant_metric(lattice, identity(2)), std::move(lam), tag);
        m.declared_degree = 0.0;
        return m;
    }
    throw InvalidArgument("make_scenario: unknown scenario tag '" + tag_in + "'");
}

HolomorphicModel conjugate_model(const HolomorphicModel& model, const GridDomain& lattice, const Mat& u) {
    const std::size_t nodes = model.a_field.size();
    EndoField a(nodes, model.rank), lam(nodes, model.rank);
    MetricField k(nodes, model.rank);
    const Mat ud = u.adjoint();
    for (std::size_t i = 0; i < nodes; ++i) {
        a[i] = u * model.a_field[i] * ud;
        lam[i] = u * model.lambdaFK[i] * ud;
        k[i] = hermitian_part(Mat(u * model.K[i] * ud));
    }
    // one shared matrix so K stays bitwise constant
    for (std::size_t i = 1; i < nodes; ++i) k[i] = k[0];
    auto m = build_model(lattice, model.rank, std::move(a), std::move(k), std::move(lam), model.scenario_tag);
    m.declared_degree = model.declared_degree;
    return m;
}

// ---------------------------------------------------------------------------
// Curvature kernels

namespace kernels {

namespace {

/// log(h_i^{-1} W h_j W^*) / spacing given the cached roots of h_i.
Mat edge_log(const HolomorphicModel& model, const Mat& sqrt_i, const Mat& inv_sqrt_i, const Mat& h_j,
             const Mat& link, double spacing) {
    const Mat transported = model.flat_connection ? h_j : Mat(link * h_j * link.adjoint());
    const Mat c = hermitian_part(Mat(inv_sqrt_i * transported * inv_sqrt_i));
    return inv_sqrt_i * herm_log(c, metric_condition_floor) * sqrt_i / spacing;
}

Mat curvature_at(const HolomorphicModel& model, const GridDomain& dom, std::size_t i, const Mat& h_i,
                 const Mat& inv_sqrt_i, const Mat* plus[2], const Mat* minus[2]) {
    const double dx = dom.spacing;
    Mat div = Mat::Zero(model.rank, model.rank);
    Mat bbar[2];
    for (int mu = 0; mu < 2; ++mu) {
        const std::size_t jm = dom.neighbor(i, mu, -1);
        const Mat xm = model.flat_connection ? *minus[mu]
                                             : Mat(model.links[mu][jm].adjoint() * *minus[mu] * model.links[mu][jm]);
        div += (*plus[mu] - xm) / dx;
        bbar[mu] = 0.5 * (*plus[mu] + xm);
    }
    Mat comm = bbar[0] * bbar[1] - bbar[1] * bbar[0];
    const Mat h_inv = inv_sqrt_i * inv_sqrt_i;
    if (!model.flat_connection) {
        const Mat& f = model.f_xy[i];
        comm -= h_inv * (f * h_i - h_i * f);
    }
    const Mat q = 0.25 * (div + kI * comm);
    const Mat s = model.lambdaFK_hat[i] - (2.0 / dom.conformal_factor[i]) * q;
    return 0.5 * (s + h_inv * s.adjoint() * h_i);
}

}  // namespace

void curvature_hat(const HolomorphicModel& model, const GridDomain& dom, const std::vector<Mat>& h_hat,
                   std::vector<Mat>& s_hat, CurvatureCache& cache, Exec exec) {
    const std::size_t nodes = dom.nodes();
    const int r = model.rank;
    auto ensure = [&](std::vector<Mat>& v) {
        if (v.size() != nodes) v.assign(nodes, Mat::Identity(r, r));
    };
    ensure(cache.sqrt_h);
    ensure(cache.inv_sqrt_h);
    ensure(cache.log_h);
    ensure(cache.edge[0]);
    ensure(cache.edge[1]);
    if (s_hat.size() != nodes) s_hat.assign(nodes, Mat::Zero(r, r));

    for_each_index(exec, nodes, [&](std::size_t i) {
        if (!dom.active(i)) return;
        const Spectrum s = eigh(h_hat[i]);
        require_positive(s, "curvature: metric", metric_condition_floor);
        cache.sqrt_h[i] = spectral_map(s, [](double x) { return std::sqrt(x); });
        cache.inv_sqrt_h[i] = spectral_map(s, [](double x) { return 1.0 / std::sqrt(x); });
        cache.log_h[i] = spectral_map(s, [](double x) { return std::log(x); });
    });
    for_each_index(exec, nodes, [&](std::size_t i) {
        if (!dom.active(i)) return;
        for (int mu = 0; mu < 2; ++mu) {
            const std::size_t j = dom.neighbor(i, mu, 1);
            if (!dom.active(j)) continue;
            cache.edge[mu][i] = edge_log(model, cache.sqrt_h[i], cache.inv_sqrt_h[i], h_hat[j], model.links[mu][i],
                                         dom.spacing);
        }
    });
    for_each_index(exec, nodes, [&](std::size_t i) {
        if (!dom.interior(i)) return;
        const Mat* plus[2] = {&cache.edge[0][i], &cache.edge[1][i]};
        const Mat* minus[2] = {&cache.edge[0][dom.neighbor(i, 0, -1)], &cache.edge[1][dom.neighbor(i, 1, -1)]};
        s_hat[i] = curvature_at(model, dom, i, h_hat[i], cache.inv_sqrt_h[i], plus, minus);
    });
}

std::vector<Mat> curvature_hat_reference(const HolomorphicModel& model, const GridDomain& dom,
                                         const std::vector<Mat>& h_hat) {
    const std::size_t nodes = dom.nodes();
    std::vector<Mat> out(nodes, Mat::Zero(model.rank, model.rank));
    for (std::size_t i = 0; i < nodes; ++i) {
        if (!dom.interior(i)) continue;
        Mat edges_plus[2], edges_minus[2];
        for (int mu = 0; mu < 2; ++mu) {
            const std::size_t jp = dom.neighbor(i, mu, 1);
            const std::size_t jm = dom.neighbor(i, mu, -1);
            edges_plus[mu] = edge_log(model, herm_sqrt(h_hat[i], metric_condition_floor), herm_inv_sqrt(h_hat[i], metric_condition_floor), h_hat[jp],
                                      model.links[mu][i], dom.spacing);
            edges_minus[mu] = edge_log(model, herm_sqrt(h_hat[jm], metric_condition_floor), herm_inv_sqrt(h_hat[jm], metric_condition_floor), h_hat[i],
                                       model.links[mu][jm], dom.spacing);
        }
        const Mat* plus[2] = {&edges_plus[0], &edges_plus[1]};
        const Mat* minus[2] = {&edges_minus[0], &edges_minus[1]};
        out[i] = curvature_at(model, dom, i, h_hat[i], herm_inv_sqrt(h_hat[i], metric_condition_floor), plus, minus);
    }
    return out;
}

}  // namespace kernels

// ---------------------------------------------------------------------------

namespace {

std::vector<Mat> hat_metric(const HolomorphicModel& model, const MetricField& H) {
    std::vector<Mat> out(H.size());
    for (std::size_t i = 0; i < H.size(); ++i) out[i] = model.to_hat_metric(H[i]);
    return out;
}

void check_metric(const HolomorphicModel& model, const GridDomain& dom, const MetricField& H) {
    if (H.size() != dom.nodes() || H.rank != model.rank)
        throw InvalidArgument("metric field does not match the model lattice or rank");
    if (dom.n != model.lattice_n) throw InvalidArgument("domain lattice differs from the model lattice");
}

}  // namespace

EndoField lambda_F(const HolomorphicModel& model, const GridDomain& dom, const MetricField& H, Exec exec) {
    check_metric(model, dom, H);
    bool equals_k = true;
    for (std::size_t i = 0; i < H.size() && equals_k; ++i) equals_k = bitwise_equal(H[i], model.K[i]);
    if (equals_k) return model.lambdaFK;

    const auto h_hat = hat_metric(model, H);
    std::vector<Mat> s_hat;
    kernels::CurvatureCache cache;
    kernels::curvature_hat(model, dom, h_hat, s_hat, cache, exec);
    EndoField out = model.lambdaFK;
    for (std::size_t i = 0; i < dom.nodes(); ++i)
        if (dom.interior(i)) out[i] = model.from_hat_endo(s_hat[i]);
    return out;
}

Residual residual(const HolomorphicModel& model, const GridDomain& dom, const MetricField& H, double epsilon,
                  Exec exec) {
    check_metric(model, dom, H);
    const EndoField lf = lambda_F(model, dom, H, exec);
    Residual res;
    res.field = EndoField(dom.nodes(), model.rank);
    ScalarField sq(dom.nodes(), 0.0);
    for_each_index(exec, dom.nodes(), [&](std::size_t i) {
        if (!dom.interior(i)) return;
        const Mat hh = model.to_hat_metric(H[i]);
        const Mat logh = herm_log(hh, metric_condition_floor);
        const Mat r_hat = traceless_part(model.to_hat_endo(lf[i])) + epsilon * logh;
        res.field[i] = model.from_hat_endo(r_hat);
        // |R|_H^2 = tr(R R^{*H}); in the hat frame the metric is h^
        sq[i] = norm(r_hat, hh) * norm(r_hat, hh);
    });
    double sup = 0.0;
    for (std::size_t i = 0; i < dom.nodes(); ++i)
        if (dom.interior(i)) sup = std::max(sup, std::sqrt(sq[i]));
    res.sup_norm = sup;
    res.l2_norm = std::sqrt(integrate_interior(dom, sq));
    return res;
}

EndoField log_relative(const HolomorphicModel& model, const MetricField& H) {
    EndoField out(H.size(), model.rank);
    for (std::size_t i = 0; i < H.size(); ++i) out[i] = model.from_hat_endo(herm_log(model.to_hat_metric(H[i]), metric_condition_floor));
    return out;
}

double sup_log_relative(const HolomorphicModel& model, const GridDomain& dom, const MetricField& H) {
    double sup = 0.0;
    for (std::size_t i = 0; i < dom.nodes(); ++i)
        if (dom.active(i)) sup = std::max(sup, herm_log(model.to_hat_metric(H[i]), metric_condition_floor).norm());
    return sup;
}

double max_det_drift(const HolomorphicModel& model, const GridDomain& dom, const MetricField& H) {
    double drift = 0.0;
    for (std::size_t i = 0; i < dom.nodes(); ++i)
        if (dom.active(i)) drift = std::max(drift, std::abs(model.to_hat_metric(H[i]).determinant().real() - 1.0));
    return drift;
}

FormField dbar_E(const HolomorphicModel& model, const GridDomain& dom, const EndoField& f, Exec exec) {
    if (f.size() != dom.nodes()) throw InvalidArgument("dbar_E: field size does not match the lattice");
    FormField out(dom.nodes(), f.rank);
    const double inv2h = 1.0 / (2.0 * dom.spacing);
    for_each_index(exec, dom.nodes(), [&](std::size_t i) {
        if (!dom.interior(i)) return;
        const Mat dx = (f[dom.neighbor(i, 0, 1)] - f[dom.neighbor(i, 0, -1)]) * inv2h;
        const Mat dy = (f[dom.neighbor(i, 1, 1)] - f[dom.neighbor(i, 1, -1)]) * inv2h;
        const Mat& a = model.a_field[i];
        out[i] = 0.5 * (dx + kI * dy) + (a * f[i] - f[i] * a);
    });
    return out;
}

}  // namespace hef
