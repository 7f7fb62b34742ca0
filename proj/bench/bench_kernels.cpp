// Parallel kernels against their serial references.  Thread count follows
// OMP_NUM_THREADS; on one core the comparison measures the kernel overhead.

#include "hef/bundle.hpp"
#include "hef/flow.hpp"
#include "hef/grid.hpp"

#include <benchmark/benchmark.h>

#include <cmath>
#include <numbers>

using namespace hef;

namespace {

struct Fixture {
    GridDomain dom;
    HolomorphicModel model;
    MetricField H;
    std::vector<Mat> h_hat;

    explicit Fixture(int n) : dom(build_flat_torus(n, 1.0)) {
        ScenarioParams p;
        model = make_scenario("bumped_extension", p, dom);
        H = random_compatible_metric(model, dom, 3, 0.5);
        for (const Mat& h : H.values) h_hat.push_back(model.to_hat_metric(h));
    }
};

void BM_CurvatureKernel(benchmark::State& st, Exec exec) {
    Fixture f(static_cast<int>(st.range(0)));
    std::vector<Mat> s_hat;
    kernels::CurvatureCache cache;
    for (auto _ : st) {
        kernels::curvature_hat(f.model, f.dom, f.h_hat, s_hat, cache, exec);
        benchmark::DoNotOptimize(s_hat.data());
    }
    st.SetItemsProcessed(st.iterations() * static_cast<std::int64_t>(f.dom.nodes()));
}

void BM_CurvatureReference(benchmark::State& st) {
    Fixture f(static_cast<int>(st.range(0)));
    for (auto _ : st) benchmark::DoNotOptimize(kernels::curvature_hat_reference(f.model, f.dom, f.h_hat));
    st.SetItemsProcessed(st.iterations() * static_cast<std::int64_t>(f.dom.nodes()));
}

void BM_FlowStep(benchmark::State& st, Exec exec) {
    Fixture f(static_cast<int>(st.range(0)));
    FlowConfig cfg;
    cfg.exec = exec;
    FlowIntegrator flow(f.model, f.dom, resolve(cfg, f.dom));
    flow.reset(f.H);
    for (auto _ : st) {
        benchmark::DoNotOptimize(flow.evaluate());
        flow.advance();
    }
    st.SetItemsProcessed(st.iterations() * static_cast<std::int64_t>(f.dom.nodes()));
}

void BM_FlowStepReference(benchmark::State& st) {
    Fixture f(static_cast<int>(st.range(0)));
    const FlowConfig cfg = resolve(FlowConfig{}, f.dom);
    for (auto _ : st) benchmark::DoNotOptimize(flow_step_reference(f.model, f.dom, f.H, cfg));
    st.SetItemsProcessed(st.iterations() * static_cast<std::int64_t>(f.dom.nodes()));
}

void BM_Laplacian(benchmark::State& st, bool reference) {
    const GridDomain dom = build_flat_torus(static_cast<int>(st.range(0)), 1.0);
    ScalarField f(dom.nodes());
    for (std::size_t i = 0; i < dom.nodes(); ++i) f[i] = std::sin(2.0 * std::numbers::pi * coord_x(dom, i));
    for (auto _ : st) benchmark::DoNotOptimize(reference ? laplacian_reference(dom, f) : laplacian(dom, f));
    st.SetItemsProcessed(st.iterations() * static_cast<std::int64_t>(dom.nodes()));
}

}  // namespace

BENCHMARK_CAPTURE(BM_CurvatureKernel, parallel, Exec::parallel)->Arg(32)->Arg(64);
BENCHMARK_CAPTURE(BM_CurvatureKernel, serial, Exec::serial)->Arg(32)->Arg(64);
BENCHMARK(BM_CurvatureReference)->Arg(32)->Arg(64);
BENCHMARK_CAPTURE(BM_FlowStep, parallel, Exec::parallel)->Arg(32)->Arg(64);
BENCHMARK_CAPTURE(BM_FlowStep, serial, Exec::serial)->Arg(32)->Arg(64);
BENCHMARK(BM_FlowStepReference)->Arg(32)->Arg(64);
BENCHMARK_CAPTURE(BM_Laplacian, parallel, false)->Arg(64)->Arg(256);
BENCHMARK_CAPTURE(BM_Laplacian, reference, true)->Arg(64)->Arg(256);

BENCHMARK_MAIN();
