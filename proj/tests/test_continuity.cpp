#include <doctest.h>

#include "hef/continuity.hpp"
#include "hef/error.hpp"

#include <cmath>
#include <limits>

using namespace hef;

namespace {

FlowConfig fast_cfg(double eps) {
    FlowConfig cfg;
    cfg.epsilon = eps;
    cfg.t_max = 200.0;
    cfg.tol_residual = 1e-9;
    cfg.monitor_stride = 1000;
    return cfg;
}

EpsilonSweepReport synthetic(const std::vector<double>& eps, const std::vector<double>& sup_logh) {
    EpsilonSweepReport r;
    for (std::size_t k = 0; k < eps.size(); ++k) {
        SweepEntry e;
        e.epsilon = eps[k];
        e.sup_logh = sup_logh[k];
        e.sup_eps_logh = eps[k] * sup_logh[k];
        e.converged = true;
        r.entries.push_back(e);
    }
    return r;
}

}  // namespace

TEST_CASE("log-log slope fit") {
    CHECK(loglog_slope({0.4, 0.2, 0.1}, {4.0, 2.0, 1.0}) == doctest::Approx(-1.0));
    CHECK(loglog_slope({0.4, 0.2, 0.1}, {1.0, 2.0, 4.0}) == doctest::Approx(1.0));
    CHECK_THROWS_AS(loglog_slope({0.4}, {1.0}), InvalidArgument);
}

TEST_CASE("decision rule on synthetic series") {
    SweepConfig sc;
    auto div = synthetic({0.4, 0.2, 0.1, 0.05}, {2.5, 5.0, 10.0, 20.0});
    classify(div, sc);
    CHECK(div.classification == SweepClass::DIVERGENT);
    CHECK(div.growth_slope == doctest::Approx(1.0));
    CHECK(div.decay_slope == doctest::Approx(0.0).epsilon(1e-12));

    auto ahe = synthetic({0.4, 0.2, 0.1, 0.05}, {0.1, 0.1, 0.1, 0.1});
    classify(ahe, sc);
    CHECK(ahe.classification == SweepClass::AHE);
    CHECK(ahe.decay_slope == doctest::Approx(-1.0));

    auto zero = synthetic({0.4, 0.2}, {0.0, 0.0});
    classify(zero, sc);
    CHECK(zero.classification == SweepClass::AHE);
    CHECK(zero.decay_slope == -std::numeric_limits<double>::infinity());

    auto slow = synthetic({0.4, 0.2, 0.1, 0.05}, {1.0, 1.5, 2.25, 3.375});
    classify(slow, sc);
    CHECK(slow.classification == SweepClass::INCONCLUSIVE);
}

TEST_CASE("a trivial exhaustion is a single stationary solve") {
    const GridDomain d = build_flat_torus(8, 1.0);
    const auto m = make_scenario("direct_sum", ScenarioParams{}, d);
    const FlowConfig cfg = fast_cfg(0.8);
    const ExhaustionResult ex = solve_exhaustion(m, trivial_exhaustion(d), cfg, 1e-6);
    const FlowState st = run_to_stationary(m, d, cfg, m.K);
    REQUIRE(ex.stages_used == 1);
    for (std::size_t i = 0; i < d.nodes(); ++i) CHECK(ex.H[i] == st.H[i]);
}

TEST_CASE("punctured rank one stays at K on every stage") {
    const ExhaustionSequence seq = build_punctured_square(24, 1.0, {0.24, 0.16, 0.09});
    const auto m = make_scenario("bumped_rank1_flat", ScenarioParams{0.3}, seq.base);
    const ExhaustionResult ex = solve_exhaustion(m, seq, fast_cfg(0.2), 0.0);
    CHECK(ex.stages_used == 3);
    for (double diff : ex.stage_differences) CHECK(diff == 0.0);
    for (std::size_t i = 0; i < seq.base.nodes(); ++i) CHECK(ex.H[i] == m.K[i]);
}

TEST_CASE("punctured direct sum: every stage converges with det compatibility") {
    const ExhaustionSequence seq = build_punctured_square(16, 1.0, {0.24, 0.125});
    const auto m = make_scenario("direct_sum", ScenarioParams{}, seq.base);
    const ExhaustionResult ex = solve_exhaustion(m, seq, fast_cfg(0.4), 0.0);
    REQUIRE(ex.stage_differences.size() == 1);
    CHECK(std::isfinite(ex.stage_differences[0]));
    CHECK(ex.stage_differences[0] > 0.0);
    for (const FlowState& st : ex.stages) CHECK(st.converged);
    CHECK(max_det_drift(m, seq.masks(1), ex.H) < 1e-10);
}

TEST_CASE("non-convergence at a stage names the stage") {
    const ExhaustionSequence seq = build_punctured_square(16, 1.0, {0.24, 0.125});
    const auto m = make_scenario("direct_sum", ScenarioParams{}, seq.base);
    FlowConfig cfg = fast_cfg(0.4);
    cfg.t_max = 0.01;
    try {
        (void)solve_exhaustion(m, seq, cfg, 0.0);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("stage 0") != std::string::npos);
    }
}

TEST_CASE("equal slopes: the background is already Hermitian-Einstein") {
    const GridDomain d = build_flat_torus(8, 1.0);
    ScenarioParams p;
    p.c1 = p.c2 = 0.5;
    const auto m = make_scenario("direct_sum", p, d);
    const auto rep = epsilon_sweep(m, d, fast_cfg(0.4), {0.4, 0.2, 0.1, 0.05});
    CHECK(rep.classification == SweepClass::AHE);
    for (const auto& e : rep.entries) {
        CHECK(e.converged);
        CHECK(e.sup_logh == 0.0);
    }
    CHECK_THROWS_AS(normalized_limit(m, d, rep), MisuseError);
    const MeanValueReport mv = mean_value_check(rep);
    CHECK(!mv.bounded);
    for (const auto& r : mv.ratios) CHECK(!r.has_value());
}

TEST_CASE("bumped direct sum with equal constants decays like eps") {
    const GridDomain d = build_flat_torus(8, 1.0);
    ScenarioParams p;
    p.c1 = p.c2 = 0.0;
    p.bump = 0.5;
    const auto m = make_scenario("bumped_direct_sum", p, d);
    const auto rep = epsilon_sweep(m, d, fast_cfg(0.4), {0.4, 0.2, 0.1, 0.05});
    for (const auto& e : rep.entries) CHECK(e.converged);
    CHECK(rep.classification == SweepClass::AHE);
    CHECK(rep.decay_slope < -0.9);
    const MeanValueReport mv = mean_value_check(rep);
    CHECK(mv.bounded);
    for (const auto& r : mv.ratios) CHECK(*r <= mv.constant);
}

TEST_CASE("short divergent sweep, normalized limit and frame invariance") {
    const GridDomain d = build_flat_torus(8, 1.0);
    const auto m = make_scenario("direct_sum", ScenarioParams{}, d);
    const std::vector<double> eps = {1.6, 0.8, 0.4};
    const auto rep = epsilon_sweep(m, d, fast_cfg(0.4), eps);
    CHECK(rep.classification == SweepClass::DIVERGENT);
    for (const auto& e : rep.entries) CHECK(std::abs(e.sup_eps_logh - std::sqrt(2.0)) < 1e-6);

    const NormalizedLimit lim = normalized_limit(m, d, rep);
    CHECK(std::abs(lim.l1_norm - 1.0) < 1e-8);
    CHECK(lim.spread < 1e-8);
    CHECK(lim.max_abs_trace < 1e-12);
    CHECK(lim.eigenvalue_fields[0][0] == doctest::Approx(-1.0 / std::sqrt(2.0)));

    const MeanValueReport mv = mean_value_check(rep);
    for (const auto& r : mv.ratios) CHECK(*r == doctest::Approx(1.0));

    // relabel e1 <-> e2 and a generic constant unitary
    Mat swap = zeros(2);
    swap(0, 1) = swap(1, 0) = 1.0;
    Mat rot(2, 2);
    rot << cplx(0.6, 0.0), cplx(0.0, 0.8), cplx(0.0, 0.8), cplx(0.6, 0.0);
    for (const Mat& u : {swap, rot}) {
        const auto mu = conjugate_model(m, d, u);
        const auto ru = epsilon_sweep(mu, d, fast_cfg(0.4), eps);
        CHECK(ru.classification == rep.classification);
        for (std::size_t k = 0; k < eps.size(); ++k)
            CHECK(std::abs(ru.entries[k].sup_eps_logh - rep.entries[k].sup_eps_logh) < 1e-8);
    }
}

TEST_CASE("warm and cold starts agree") {
    const GridDomain d = build_flat_torus(8, 1.0);
    ScenarioParams p;
    p.bump = 0.6;
    const auto m = make_scenario("bumped_direct_sum", p, d);
    const FlowConfig cfg = fast_cfg(0.4);
    SweepConfig warm, cold;
    cold.warm_start = false;
    const auto a = epsilon_sweep(m, d, cfg, {0.8, 0.4}, warm);
    const auto b = epsilon_sweep(m, d, cfg, {0.8, 0.4}, cold);
    const EndoField la = log_relative(m, a.entries[1].H);
    const EndoField lb = log_relative(m, b.entries[1].H);
    double diff = 0.0;
    for (std::size_t i = 0; i < d.nodes(); ++i) diff = std::max(diff, (la[i] - lb[i]).norm());
    CHECK(diff < 10.0 * cfg.tol_residual / 0.4);
}

TEST_CASE("sweep input validation") {
    const GridDomain d = build_flat_torus(8, 1.0);
    const auto m = make_scenario("direct_sum", ScenarioParams{}, d);
    CHECK_THROWS_AS(epsilon_sweep(m, d, fast_cfg(0.1), {0.1, 0.2}), InvalidArgument);
    CHECK_THROWS_AS(epsilon_sweep(m, d, fast_cfg(0.1), {0.1, 0.0}), InvalidArgument);
    CHECK_THROWS_AS(epsilon_sweep(m, d, fast_cfg(0.1), {}), InvalidArgument);
}

TEST_CASE("mean-value ratio of a constant field on the unit torus is one") {
    const MeanValueReport mv = mean_value_check(std::vector<SweepMeasures>{{2.0, 2.0}, {0.0, 0.0}});
    CHECK(*mv.ratios[0] == 1.0);
    CHECK(!mv.ratios[1].has_value());
    CHECK(mv.bounded);
}
