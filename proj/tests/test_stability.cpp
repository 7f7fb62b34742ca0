#include <doctest.h>

#include "hef/error.hpp"
#include "hef/flow.hpp"
#include "hef/stability.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace hef;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

Mat e1_basis(int r) {
    Mat v = Mat::Zero(r, 1);
    v(0, 0) = 1.0;
    return v;
}

/// Smooth metric fields defined analytically so they can be sampled on any lattice.
MetricField smooth_metric(const HolomorphicModel& m, const GridDomain& d, double amp, double shift) {
    MetricField h(d.nodes(), m.rank);
    for (std::size_t i = 0; i < d.nodes(); ++i) {
        const double x = coord_x(d, i), y = coord_y(d, i);
        Mat a = zeros(m.rank);
        if (m.rank == 1) {
            a(0, 0) = amp * std::cos(kTwoPi * (x + shift)) * std::sin(kTwoPi * y);
        } else {
            a(0, 0) = amp * std::cos(kTwoPi * (x + shift));
            a(1, 1) = -a(0, 0);
            a(0, 1) = amp * cplx(std::sin(kTwoPi * y), 0.5 * std::cos(kTwoPi * (x + y + shift)));
            a(1, 0) = std::conj(a(0, 1));
        }
        h[i] = herm_exp(a);
    }
    return h;
}

double identity2_error(int n) {
    const GridDomain d = build_flat_torus(n, 1.0);
    ScenarioParams p;
    p.nu = 0.6;
    const auto m = make_scenario("extension", p, d);
    const MetricField h1 = smooth_metric(m, d, 0.5, 0.1);
    const MetricField h2 = smooth_metric(m, d, 0.8, 0.35);
    const ProjectionField pi = make_projection(d, e1_basis(2), h1);
    return restriction_algebra_check(m, d, h1, h2, pi).identity2;
}

double subharmonic_error(int n, const char* tag) {
    const GridDomain d = build_flat_torus(n, 1.0);
    ScenarioParams p;
    p.nu = 0.5;
    const auto m = make_scenario(tag, p, d);
    return subharmonicity_identity(m, d, smooth_metric(m, d, 0.4, 0.0), smooth_metric(m, d, 0.7, 0.2))
        .identity_residual;
}

}  // namespace

TEST_CASE("direct-sum line bundle degrees") {
    const GridDomain d = build_flat_torus(16, 1.0);
    const auto m = make_scenario("direct_sum", ScenarioParams{}, d);
    Mat e2 = Mat::Zero(2, 1);
    e2(1, 0) = 1.0;
    const DegreeReport l1 = degree_chern_weil(m, d, m.K, make_projection(d, e1_basis(2), m.K, ProjectionMetric::K));
    const DegreeReport l2 = degree_chern_weil(m, d, m.K, make_projection(d, e2, m.K, ProjectionMetric::K));
    const DegreeReport e = total_degree(m, d, m.K);
    CHECK(std::abs(l1.degree - 1.0) < 1e-10);
    CHECK(std::abs(l2.degree + 1.0) < 1e-10);
    CHECK(l1.dbar_term == 0.0);
    CHECK(std::abs(l1.degree + l2.degree - e.degree) < 1e-10);
    CHECK(std::abs(e.degree - m.declared_degree) < 1e-10);
    CHECK(l1.curvature_term <= l1.curvature_bound + 1e-12);

    CHECK(slope_compare(l1, e).verdict == SlopeVerdict::DESTABILIZING);
    CHECK(slope_compare(l2, e).verdict == SlopeVerdict::STABLE_WITNESS_PASSED);

    ScenarioParams eq;
    eq.c1 = eq.c2 = 0.7;
    const auto me = make_scenario("direct_sum", eq, d);
    const DegreeReport s = degree_chern_weil(me, d, me.K, make_projection(d, e1_basis(2), me.K));
    CHECK(slope_compare(s, total_degree(me, d, me.K)).verdict == SlopeVerdict::SEMISTABLE_BORDERLINE);
}

TEST_CASE("extension sub-bundle pays the second fundamental form") {
    const GridDomain d = build_flat_torus(16, 1.0);
    ScenarioParams p;
    p.nu = 0.7;
    const auto m = make_scenario("extension", p, d);
    const DegreeReport s = degree_chern_weil(m, d, m.K, make_projection(d, e1_basis(2), m.K));
    // dbar_E pi = [a, pi] = -nu E_12, pointwise norm (2 / lambda) nu^2
    CHECK(std::abs(s.dbar_term - 2.0 * 0.49) < 1e-12);
    CHECK(std::abs(s.curvature_term) < 1e-14);
    CHECK(s.dbar_pi_l2 == doctest::Approx(std::sqrt(0.98)));
}

TEST_CASE("non-projections are rejected") {
    const GridDomain d = build_flat_torus(8, 1.0);
    const auto m = make_scenario("direct_sum", ScenarioParams{}, d);
    ProjectionField bad = make_projection(d, e1_basis(2), m.K);
    bad.pi[5](0, 1) = 0.3;  // idempotent but not selfadjoint
    CHECK_THROWS_AS(degree_chern_weil(m, d, m.K, bad), InvalidArgument);
    ProjectionField wrong_rank = make_projection(d, e1_basis(2), m.K);
    wrong_rank.target_rank = 2;
    CHECK_THROWS_AS(validate_projection(d, wrong_rank, m.K), InvalidArgument);
}

TEST_CASE("degrees are invariant under a constant unitary change of frame") {
    const GridDomain d = build_flat_torus(16, 1.0);
    ScenarioParams p;
    p.nu = 0.4;
    const auto m = make_scenario("bumped_extension", p, d);
    const MetricField h = random_compatible_metric(m, d, 21, 0.6);
    Mat u(2, 2);
    u << cplx(0.6, 0.0), cplx(0.0, 0.8), cplx(0.0, 0.8), cplx(0.6, 0.0);
    const auto mu = conjugate_model(m, d, u);
    MetricField hu(d.nodes(), 2);
    for (std::size_t i = 0; i < d.nodes(); ++i) hu[i] = u * h[i] * u.adjoint();
    const DegreeReport a = degree_chern_weil(m, d, h, make_projection(d, e1_basis(2), h));
    const DegreeReport b = degree_chern_weil(mu, d, hu, make_projection(d, Mat(u * e1_basis(2)), hu));
    CHECK(std::abs(a.degree - b.degree) < 1e-12);
    CHECK(std::abs(a.dbar_term - b.dbar_term) < 1e-12);
}

TEST_CASE("degree of a holomorphic sub-bundle does not depend on the metric") {
    auto gap = [](int n) {
        const GridDomain d = build_flat_torus(n, 1.0);
        ScenarioParams p;
        p.nu = 0.5;
        const auto m = make_scenario("bumped_extension", p, d);
        const MetricField h1 = smooth_metric(m, d, 0.3, 0.0);
        const MetricField h2 = smooth_metric(m, d, 0.6, 0.25);
        const double a = degree_chern_weil(m, d, h1, make_projection(d, e1_basis(2), h1)).degree;
        const double b = degree_chern_weil(m, d, h2, make_projection(d, e1_basis(2), h2)).degree;
        return std::abs(a - b);
    };
    const double g16 = gap(16), g32 = gap(32);
    CHECK(g32 < 0.05);
    CHECK(std::log2(g16 / g32) > 1.8);
}

TEST_CASE("restriction identities: exact cases") {
    const GridDomain d = build_flat_torus(16, 1.0);
    const auto m = make_scenario("direct_sum", ScenarioParams{}, d);
    const MetricField h1 = smooth_metric(m, d, 0.5, 0.0);
    const ProjectionField pi = make_projection(d, e1_basis(2), h1);
    const RestrictionReport same = restriction_algebra_check(m, d, h1, h1, pi);
    CHECK(same.identity1 < 1e-12);

    MetricField c1(d.nodes(), 2), c2(d.nodes(), 2);
    for (std::size_t i = 0; i < d.nodes(); ++i) {
        c1[i] = identity(2);
        c1[i](1, 1) = 2.0;
        c2[i] = identity(2);
        c2[i](0, 0) = 3.0;
    }
    const RestrictionReport diag = restriction_algebra_check(m, d, c1, c2, make_projection(d, e1_basis(2), c1));
    CHECK(diag.identity1 < 1e-14);
    CHECK(diag.identity2 == 0.0);
    CHECK(diag.scale2 == 0.0);
}

TEST_CASE("restriction identities on random inputs") {
    std::mt19937_64 rng(77);
    std::normal_distribution<double> nd;
    const GridDomain d = build_flat_torus(8, 1.0);
    const auto m = make_scenario("direct_sum", ScenarioParams{}, d);
    for (int k = 0; k < 100; ++k) {
        const MetricField h1 = random_compatible_metric(m, d, 1000 + k, 1.0);
        const MetricField h2 = random_compatible_metric(m, d, 5000 + k, 1.0);
        Mat v(2, 1);
        v << cplx(nd(rng), nd(rng)), cplx(nd(rng), nd(rng));
        const RestrictionReport r = restriction_algebra_check(m, d, h1, h2, make_projection(d, v, h1));
        CHECK(r.identity1 < 1e-12);
    }
    const double e32 = identity2_error(32), e64 = identity2_error(64), e128 = identity2_error(128);
    CHECK(std::log2(e32 / e64) >= 1.8);
    CHECK(std::log2(e64 / e128) >= 1.8);
}

TEST_CASE("subharmonicity identity") {
    const GridDomain d = build_flat_torus(16, 1.0);
    const auto m = make_scenario("extension", ScenarioParams{}, d);
    const MetricField h = smooth_metric(m, d, 0.5, 0.0);
    const SubharmonicityReport same = subharmonicity_identity(m, d, h, h);
    CHECK(same.identity_residual < 1e-10);
    CHECK(same.max_square_term < 1e-20);

    for (const char* tag : {"rank1_flat", "bumped_direct_sum", "extension"}) {
        const double e16 = subharmonic_error(16, tag), e32 = subharmonic_error(32, tag),
                     e64 = subharmonic_error(64, tag);
        CHECK(std::log2(e16 / e32) > 1.8);
        CHECK(std::log2(e32 / e64) > 1.8);
    }
}

TEST_CASE("uniqueness probe preconditions and the identical case") {
    const GridDomain d = build_flat_torus(8, 1.0);
    const auto m = make_scenario("direct_sum", ScenarioParams{}, d);
    MetricField oracle(d.nodes(), 2);
    for (std::size_t i = 0; i < d.nodes(); ++i) {
        oracle[i] = zeros(2);
        oracle[i](0, 0) = std::exp(-10.0);
        oracle[i](1, 1) = std::exp(10.0);
    }
    const UniquenessReport same = uniqueness_probe(m, d, oracle, oracle, 0.1);
    CHECK(same.verdict == UniquenessVerdict::IDENTICAL);
    CHECK(same.identity.identity_residual < 1e-8);

    MetricField scaled = oracle;
    for (auto& h : scaled.values) h *= 2.0;
    try {
        (void)uniqueness_probe(m, d, oracle, scaled, 0.1);
        FAIL("expected a precondition error");
    } catch (const InvalidArgument& e) {
        CHECK(std::string(e.what()).find("det") != std::string::npos);
    }
    CHECK_THROWS_AS(uniqueness_probe(m, d, m.K, oracle, 0.1), InvalidArgument);  // K is not a solution
}

TEST_CASE("weighted degree gap") {
    DegreeReport total, sub;
    total.degree = 0.0;
    total.rank = 2;
    total.slope = 0.0;
    sub.degree = 1.0;
    sub.rank = 1;
    sub.slope = 1.0;
    const WeightedGap w = weighted_degree_gap({-1.0, 1.0}, {sub}, total);
    CHECK(w.direct == doctest::Approx(-2.0));
    CHECK(w.slope_form == doctest::Approx(-2.0));

    sub.degree = 0.0;
    const WeightedGap zero = weighted_degree_gap({-1.0, 1.0}, {sub}, total);
    CHECK(zero.direct == 0.0);
    CHECK(zero.slope_form == 0.0);

    CHECK_THROWS_AS(weighted_degree_gap({-1.0, 1.0}, {}, total), InvalidArgument);
    CHECK_THROWS_AS(weighted_degree_gap({1.0, -1.0}, {sub}, total), InvalidArgument);
    CHECK_THROWS_AS(weighted_degree_gap({0.0, 1.0}, {sub}, total), InvalidArgument);

    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    for (int k = 0; k < 100; ++k) {
        // rank 4 with flag ranks 1, 3: multiplicities 1, 2, 1 and l0 + 2 l1 + l2 = 0
        const double l1 = -std::abs(u(rng)) - 0.01;
        const double l0 = l1 - 0.1 - std::abs(u(rng));
        const double l2b = -(l0 + 2.0 * l1);
        DegreeReport t, s1, s3;
        t.rank = 4;
        t.degree = u(rng);
        s1.rank = 1;
        s1.degree = u(rng);
        s3.rank = 3;
        s3.degree = u(rng);
        const WeightedGap g = weighted_degree_gap({l0, l1, l2b}, {s1, s3}, t);
        CHECK(std::abs(g.direct - g.slope_form) < 1e-10);
    }
}
