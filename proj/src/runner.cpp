#include "hef/runner.hpp"

#include "hef/continuity.hpp"
#include "hef/error.hpp"
#include "hef/io.hpp"
#include "hef/parallel.hpp"
#include "hef/stability.hpp"

#include <json.hpp>

#include <cmath>
#include <optional>
#include <ostream>
#include <sstream>

namespace hef {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr double monotone_rate = 10.0;  // residual may grow by at most 10 dt per unit step
constexpr double trace_log_tol = 1e-9;

json number(double x) { return std::isfinite(x) ? json(x) : json(x > 0 ? "inf" : (x < 0 ? "-inf" : "nan")); }

CsvTable monitor_table(const std::vector<MonitorSample>& ms) {
    CsvTable t;
    t.header = {"step", "t", "sup_residual", "sup_log_h", "det_drift", "energy"};
    for (const auto& m : ms)
        t.rows.push_back({static_cast<double>(m.step), m.t, m.sup_residual, m.sup_log_h, m.det_drift, m.energy});
    return t;
}

GridFields pack(const HolomorphicModel& model, const std::vector<const MetricField*>& metrics) {
    GridFields g;
    g.n = model.lattice_n;
    g.rank = model.rank;
    g.fields.push_back(model.K.values);
    for (const MetricField* m : metrics) g.fields.push_back(m->values);
    return g;
}

/// Collects emitted files and per-run records for the manifest.
class Artifacts {
public:
    Artifacts(fs::path dir, const ScenarioConfig& cfg) : dir_(std::move(dir)), cfg_(cfg) {}

    void csv(const std::string& name, const CsvTable& t, const std::string& kind) {
        if (!cfg_.emit_csv) return;
        write_csv(dir_ / name, t);
        files_.push_back({name, kind});
    }
    void svg(const std::string& name, const PlotSpec& p) {
        if (!cfg_.emit_svg) return;
        write_file(dir_ / name, svg_plot(p));
        files_.push_back({name, "plot"});
    }
    /// Field 0 is K, the remaining fields are metrics checked by verify.
    void fields(const std::string& name, const GridFields& g, double trace_tol) {
        if (!cfg_.emit_fields) return;
        write_hegf(dir_ / name, g);
        files_.push_back({name, "fields"});
        metric_files_.push_back({{"path", name}, {"metrics", g.fields.size() - 1}, {"trace_log_tol", trace_tol}});
    }
    void model(const HolomorphicModel& m) {
        if (!cfg_.emit_fields) return;
        GridFields g;
        g.n = m.lattice_n;
        g.rank = m.rank;
        g.fields = {m.a_field.values, m.K.values, m.lambdaFK.values};
        write_hegf(dir_ / "model.hegf", g);
        files_.push_back({"model.hegf", "model"});
    }
    void run(const std::string& name, const std::vector<MonitorSample>& ms, double eps, double dt, bool converged,
             std::int64_t steps, double t) {
        const std::string file = "monitors_" + name + ".csv";
        csv(file, monitor_table(ms), "monitors");
        json r = {{"name", name},       {"epsilon", eps}, {"dt", dt},       {"det_renorm", cfg_.det_renorm},
                  {"det_bound", det_bound(dt)}, {"converged", converged}, {"steps", steps}, {"t", t}};
        if (cfg_.emit_csv) r["monitors"] = file;
        runs_.push_back(r);
        if (!converged) all_converged_ = false;
    }
    void residual_plot(const std::string& name, const std::vector<std::pair<std::string, const std::vector<MonitorSample>*>>& runs) {
        PlotSpec p;
        p.title = "sup residual along the flow";
        p.x_label = "t";
        p.y_label = "sup |residual|";
        p.log_y = true;
        for (const auto& [label, ms] : runs) {
            PlotSeries s;
            s.label = label;
            for (const auto& m : *ms) {
                s.x.push_back(m.t);
                s.y.push_back(m.sup_residual);
            }
            p.series.push_back(std::move(s));
        }
        svg(name, p);
    }

    double det_bound(double dt) const { return cfg_.det_renorm ? 1e-10 : 5.0 * dt; }
    bool all_converged() const { return all_converged_; }

    json runs_json() const { return runs_; }
    json metric_json() const { return metric_files_; }
    json files_json() const {
        json out = json::array();
        for (const auto& [name, kind] : files_) {
            const std::string bytes = read_file(dir_ / name);
            out.push_back({{"path", name}, {"kind", kind}, {"bytes", bytes.size()}, {"sha256", sha256_hex(bytes)}});
        }
        return out;
    }

private:
    fs::path dir_;
    const ScenarioConfig& cfg_;
    std::vector<std::pair<std::string, std::string>> files_;
    json runs_ = json::array();
    json metric_files_ = json::array();
    bool all_converged_ = true;
};

struct Setup {
    std::optional<ExhaustionSequence> seq;
    GridDomain lattice;
    GridDomain dom;  ///< domain for non-exhaustion pipelines: the deepest mask when punctured
    HolomorphicModel model;
    FlowConfig flow;
};

Setup make_setup(const ScenarioConfig& cfg) {
    Setup s;
    if (cfg.domain_kind == "punctured") {
        s.seq = build_punctured_square(cfg.n, cfg.side, cfg.radii);
        s.lattice = s.seq->base;
        s.dom = s.seq->masks(s.seq->size() - 1);
    } else {
        s.lattice = build_flat_torus(cfg.n, cfg.side);
        s.dom = s.lattice;
    }
    s.model = make_scenario(canonical_scenario(cfg.scenario), cfg.params, s.lattice);
    FlowConfig f;
    f.epsilon = cfg.epsilons.front();
    f.dt = cfg.dt;
    f.t_max = cfg.t_max;
    f.tol_residual = cfg.tol_residual;
    f.det_renorm = cfg.det_renorm;
    f.monitor_stride = cfg.monitor_stride;
    s.flow = resolve(f, s.dom);
    return s;
}

void run_single(const Setup& s, Artifacts& art, json& verdicts, std::ostream& log) {
    const FlowState st = run_to_stationary(s.model, s.dom, s.flow, s.model.K);
    const DecayReport d = monitor_decay(st, s.flow, s.model.sup_perp);
    art.run("flow", st.monitors, s.flow.epsilon, s.flow.dt, st.converged, st.steps, st.t);
    art.residual_plot("residual.svg", {{"flow", &st.monitors}});
    art.fields("fields.hegf", pack(s.model, {&st.H}), trace_log_tol);
    const Residual r = residual(s.model, s.dom, st.H, s.flow.epsilon);
    verdicts = {{"converged", st.converged},
                {"steps", st.steps},
                {"t", st.t},
                {"sup_residual", r.sup_norm},
                {"sup_log_h", sup_log_relative(s.model, s.dom, st.H)},
                {"log_bound", s.flow.epsilon > 0 ? number(s.model.sup_perp / s.flow.epsilon) : number(INFINITY)},
                {"max_det_drift", max_det_drift(s.model, s.dom, st.H)},
                {"residual_monotone", d.residual_monotone},
                {"log_majorant_holds", d.log_bound_holds}};
    log << "single: " << (st.converged ? "converged" : "NOT converged") << " after " << st.steps
        << " steps, sup residual " << r.sup_norm << "\n";
}

void run_exhaustion(const ScenarioConfig& cfg, const Setup& s, Artifacts& art, json& verdicts, std::ostream& log) {
    const ExhaustionSequence seq = s.seq ? *s.seq : trivial_exhaustion(s.lattice);
    const ExhaustionResult ex = solve_exhaustion(s.model, seq, s.flow, cfg.tol_j);
    std::vector<std::pair<std::string, const std::vector<MonitorSample>*>> plots;
    for (std::size_t j = 0; j < ex.stages.size(); ++j) {
        const FlowState& st = ex.stages[j];
        const std::string name = "stage" + std::to_string(j);
        art.run(name, st.monitors, s.flow.epsilon, s.flow.dt, st.converged, st.steps, st.t);
        plots.emplace_back(name, &st.monitors);
        log << "exhaustion: stage " << j << " converged after " << st.steps << " steps\n";
    }
    art.residual_plot("residual.svg", plots);
    art.fields("fields.hegf", pack(s.model, {&ex.H}), trace_log_tol);
    const GridDomain& last = seq.masks(ex.stages_used - 1);
    verdicts = {{"stages_used", ex.stages_used},
                {"stage_differences", ex.stage_differences},
                {"sup_log_h", sup_log_relative(s.model, last, ex.H)},
                {"log_bound", s.model.sup_perp / s.flow.epsilon},
                {"max_det_drift", max_det_drift(s.model, last, ex.H)}};
}

void run_sweep(const ScenarioConfig& cfg, const Setup& s, Artifacts& art, json& verdicts, std::ostream& log) {
    SweepConfig sc;
    sc.ahe_threshold = cfg.ahe_threshold;
    sc.tol_j = cfg.tol_j;
    sc.warm_start = cfg.warm_start;
    const GridDomain& dom = s.seq ? s.lattice : s.dom;
    const EpsilonSweepReport rep =
        epsilon_sweep(s.model, dom, s.flow, cfg.epsilons, sc, s.seq ? &*s.seq : nullptr);

    CsvTable t;
    t.header = {"epsilon", "sup_eps_log_h", "sup_log_h", "l1_log_h", "converged", "steps"};
    std::vector<std::pair<std::string, const std::vector<MonitorSample>*>> plots;
    std::vector<const MetricField*> metrics;
    for (std::size_t k = 0; k < rep.entries.size(); ++k) {
        const SweepEntry& e = rep.entries[k];
        t.rows.push_back({e.epsilon, e.sup_eps_logh, e.sup_logh, e.l1_logh, e.converged ? 1.0 : 0.0,
                          static_cast<double>(e.steps)});
        const std::string name = "eps" + std::to_string(k);
        art.run(name, e.monitors, e.epsilon, s.flow.dt, e.converged, e.steps, 0.0);
        plots.emplace_back("eps = " + json(e.epsilon).dump(), &e.monitors);
        metrics.push_back(&e.H);
        log << "sweep: eps = " << e.epsilon << (e.converged ? " converged" : " NOT converged")
            << ", sup |eps log h| = " << e.sup_eps_logh << (e.error.empty() ? "" : " (" + e.error + ")") << "\n";
    }
    art.csv("sweep.csv", t, "sweep");
    art.residual_plot("residual.svg", plots);
    art.fields("fields.hegf", pack(s.model, metrics), trace_log_tol);

    PlotSpec p;
    p.title = "eps sweep";
    p.x_label = "1 / eps";
    p.y_label = "sup norm";
    p.log_x = p.log_y = true;
    PlotSeries a{"sup |eps log h|", {}, {}}, b{"sup |log h|", {}, {}};
    for (const auto& e : rep.entries) {
        if (!e.converged) continue;
        a.x.push_back(1.0 / e.epsilon);
        a.y.push_back(e.sup_eps_logh);
        b.x.push_back(1.0 / e.epsilon);
        b.y.push_back(e.sup_logh);
    }
    p.series = {a, b};
    art.svg("sweep.svg", p);

    const MeanValueReport mv = mean_value_check(rep);
    json ratios = json::array();
    for (const auto& r : mv.ratios) ratios.push_back(r ? json(*r) : json(nullptr));
    verdicts = {{"classification", to_string(rep.classification)},
                {"decay_slope", number(rep.decay_slope)},
                {"growth_slope", number(rep.growth_slope)},
                {"mean_value_ratios", ratios},
                {"mean_value_constant", mv.constant},
                {"mean_value_bounded", mv.bounded}};
    if (rep.classification == SweepClass::DIVERGENT) {
        const NormalizedLimit lim = normalized_limit(s.model, s.seq ? s.seq->masks(s.seq->size() - 1) : dom, rep);
        json eig = json::array();
        for (const auto& f : lim.eigenvalue_fields) {
            double mean = 0.0;
            std::size_t cnt = 0;
            for (std::size_t i = 0; i < f.size(); ++i)
                if (s.dom.active(i)) mean += f[i], ++cnt;
            eig.push_back(cnt ? mean / cnt : 0.0);
        }
        verdicts["normalized_limit"] = {{"epsilon", lim.epsilon},       {"spread", lim.spread},
                                        {"l1_norm", lim.l1_norm},       {"max_abs_trace", lim.max_abs_trace},
                                        {"eigenvalue_means", eig}};
    }
    log << "sweep: classification " << to_string(rep.classification) << "\n";
}

void run_uniqueness(const ScenarioConfig& cfg, const Setup& s, Artifacts& art, json& verdicts, std::ostream& log) {
    const MetricField h0a = random_compatible_metric(s.model, s.dom, cfg.seed, cfg.amplitude);
    const MetricField h0b = random_compatible_metric(s.model, s.dom, cfg.seed + 1, cfg.amplitude);
    const DistanceSeries ds = two_flow_distance(s.model, s.dom, s.flow, h0a, h0b);
    art.run("a", ds.a.monitors, s.flow.epsilon, s.flow.dt, ds.a.converged, ds.a.steps, ds.a.t);
    art.run("b", ds.b.monitors, s.flow.epsilon, s.flow.dt, ds.b.converged, ds.b.steps, ds.b.t);
    art.residual_plot("residual.svg", {{"a", &ds.a.monitors}, {"b", &ds.b.monitors}});
    CsvTable t;
    t.header = {"t", "sup_sigma"};
    for (std::size_t k = 0; k < ds.t.size(); ++k) t.rows.push_back({ds.t[k], ds.sup_sigma[k]});
    art.csv("distance.csv", t, "distance");
    PlotSpec p;
    p.title = "sup sigma distance between two flows";
    p.x_label = "t";
    p.y_label = "sup sigma";
    p.log_y = true;
    p.series = {{"sup sigma", ds.t, ds.sup_sigma}};
    art.svg("distance.svg", p);
    art.fields("fields.hegf", pack(s.model, {&ds.a.H, &ds.b.H}), trace_log_tol);

    verdicts = {{"distance_monotone", ds.monotone},
                {"final_sup_sigma", ds.sup_sigma.empty() ? 0.0 : ds.sup_sigma.back()},
                {"converged", ds.a.converged && ds.b.converged}};
    if (ds.a.converged && ds.b.converged) {
        const UniquenessReport u = uniqueness_probe(s.model, s.dom, ds.a.H, ds.b.H, s.flow.epsilon,
                                                    std::max(1e-6, 10.0 * cfg.tol_residual));
        verdicts["verdict"] = to_string(u.verdict);
        verdicts["identity_residual"] = u.identity.identity_residual;
        verdicts["max_eigen_deviation"] = u.max_deviation_from_one;
        log << "uniqueness: " << to_string(u.verdict) << ", max |eig(k) - 1| = " << u.max_deviation_from_one << "\n";
    } else {
        log << "uniqueness: flows did not converge by t_max\n";
    }
}

void run_stability(const ScenarioConfig& cfg, const Setup& s, Artifacts& art, json& verdicts, std::ostream& log) {
    const FlowState st = run_to_stationary(s.model, s.dom, s.flow, s.model.K);
    art.run("flow", st.monitors, s.flow.epsilon, s.flow.dt, st.converged, st.steps, st.t);
    art.fields("fields.hegf", pack(s.model, {&st.H}), trace_log_tol);

    Mat basis = Mat::Zero(s.model.rank, 1);
    if (cfg.basis.empty()) basis(0, 0) = 1.0;
    else
        for (int a = 0; a < s.model.rank; ++a) basis(a, 0) = cfg.basis[a];

    CsvTable t;
    t.header = {"metric", "deg_total", "deg_sub", "mu_total", "mu_sub", "dbar_term", "verdict"};
    json per = json::array();
    const std::pair<const char*, const MetricField*> metrics[] = {{"K", &s.model.K}, {"H_eps", &st.H}};
    for (std::size_t k = 0; k < 2; ++k) {
        const MetricField& H = *metrics[k].second;
        const ProjectionField pi = make_projection(s.dom, basis, H);
        const DegreeReport sub = degree_chern_weil(s.model, s.dom, H, pi);
        const DegreeReport tot = total_degree(s.model, s.dom, H);
        const SlopeComparison cmp = slope_compare(sub, tot);
        t.rows.push_back({static_cast<double>(k), tot.degree, sub.degree, tot.slope, sub.slope, sub.dbar_term,
                          static_cast<double>(cmp.verdict)});
        per.push_back({{"metric", metrics[k].first},
                       {"deg_total", tot.degree},
                       {"deg_sub", sub.degree},
                       {"mu_total", tot.slope},
                       {"mu_sub", sub.slope},
                       {"tol_slope", cmp.tol_slope},
                       {"verdict", to_string(cmp.verdict)}});
        log << "stability: metric " << metrics[k].first << ": mu(S) = " << sub.slope << ", mu(E) = " << tot.slope
            << " -> " << to_string(cmp.verdict) << "\n";
    }
    art.csv("stability.csv", t, "stability");
    verdicts = {{"converged", st.converged}, {"witness", per}};
}

}  // namespace

RunOutcome run_pipeline(const ScenarioConfig& cfg, const fs::path& out_dir, std::ostream& log) {
    RunOutcome out;
    out.directory = out_dir;
    fs::create_directories(out_dir);
    Artifacts art(out_dir, cfg);
    json verdicts = json::object();
    std::string stage = "setup";
    std::string error;
    try {
        Setup s = make_setup(cfg);
        art.model(s.model);
        stage = to_string(cfg.pipeline);
        switch (cfg.pipeline) {
            case Pipeline::single: run_single(s, art, verdicts, log); break;
            case Pipeline::exhaustion: run_exhaustion(cfg, s, art, verdicts, log); break;
            case Pipeline::sweep: run_sweep(cfg, s, art, verdicts, log); break;
            case Pipeline::uniqueness: run_uniqueness(cfg, s, art, verdicts, log); break;
            case Pipeline::stability: run_stability(cfg, s, art, verdicts, log); break;
        }
        if (art.all_converged()) {
            out.status = "ok";
            out.exit_code = exit_ok;
        } else {
            out.status = "not_converged";
            out.exit_code = exit_not_converged;
        }
    } catch (const Error& e) {
        error = stage + ": " + e.what();
        const bool stage_failure = std::string(e.what()).find("did not converge") != std::string::npos;
        out.status = stage_failure ? "not_converged" : "error";
        out.exit_code = stage_failure ? exit_not_converged : exit_failure;
        log << "error in " << error << "\n";
    }

    const std::string text = emit_config(cfg);
    json manifest = {{"format", "heflow-manifest"},
                     {"version", 1},
                     {"pipeline", to_string(cfg.pipeline)},
                     {"scenario", cfg.scenario},
                     {"seed", cfg.seed},
                     {"status", out.status},
                     {"config", text},
                     {"config_sha256", sha256_hex(text)},
                     {"verdicts", verdicts},
                     {"runs", art.runs_json()},
                     {"metric_fields", art.metric_json()},
                     {"files", art.files_json()}};
    if (!error.empty()) manifest["error"] = error;
    write_file(out_dir / "manifest.json", manifest.dump(2) + "\n");
    return out;
}

// ---------------------------------------------------------------------------

VerifyOutcome verify_artifacts(const fs::path& dir) {
    VerifyOutcome v;
    auto fail = [&](const std::string& s) { v.failures.push_back(s); };
    const fs::path mpath = dir / "manifest.json";
    if (!fs::is_regular_file(mpath)) {
        fail("missing manifest.json in " + dir.string());
        return v;
    }
    json m;
    try {
        m = json::parse(read_file(mpath));
        if (!m.is_object() || m.value("format", "") != "heflow-manifest") throw Error("not a heflow manifest");
        if (!m.contains("files") || !m["files"].is_array()) throw Error("no file list");
    } catch (const std::exception& e) {
        fail(std::string("corrupt manifest.json: ") + e.what());
        return v;
    }

    try {
        const std::string text = m.at("config").get<std::string>();
        if (sha256_hex(text) != m.at("config_sha256").get<std::string>()) fail("manifest.json: config hash mismatch");
        else v.checked.push_back("config hash");
    } catch (const std::exception& e) {
        fail(std::string("manifest.json: config record unreadable: ") + e.what());
    }

    for (const auto& f : m["files"]) {
        const std::string name = f.value("path", "");
        const fs::path p = dir / name;
        if (name.empty() || !fs::is_regular_file(p)) {
            fail("missing file " + name);
            continue;
        }
        const std::string bytes = read_file(p);
        if (sha256_hex(bytes) != f.value("sha256", "")) fail(name + ": content hash mismatch (modified or corrupt)");
        else v.checked.push_back(name + ": content hash");
    }

    for (const auto& r : m.value("runs", json::array())) {
        if (!r.contains("monitors")) continue;
        const std::string name = r["monitors"].get<std::string>();
        if (!fs::is_regular_file(dir / name)) continue;  // reported above
        try {
            const CsvTable t = read_csv(dir / name);
            const std::size_t cs = t.column("step"), ct = t.column("t"), cr = t.column("sup_residual"),
                              cd = t.column("det_drift");
            std::vector<double> x, tt;
            std::size_t first = 0;
            bool seen = false;
            double drift = 0.0;
            for (const auto& row : t.rows) {
                if (!seen && row[cs] >= 1.0) {
                    first = x.size();
                    seen = true;
                }
                x.push_back(row[cr]);
                tt.push_back(row[ct]);
                drift = std::max(drift, row[cd]);
            }
            std::size_t bad = 0;
            if (!seen || non_increasing_within(x, tt, monotone_rate, first, &bad)) {
                v.checked.push_back(name + ": monotone residual");
            } else {
                std::ostringstream os;
                os << name << ": monotone residual violated at step " << t.rows[bad][cs] << " (sup residual "
                   << x[bad - 1] << " -> " << x[bad] << ")";
                fail(os.str());
            }
            const double bound = r.value("det_bound", 1e-10);
            if (drift <= bound) {
                v.checked.push_back(name + ": det drift bound");
            } else {
                std::ostringstream os;
                os << name << ": det drift bound violated (" << drift << " > " << bound << ")";
                fail(os.str());
            }
        } catch (const std::exception& e) {
            fail(name + ": corrupt monitor table: " + e.what());
        }
    }

    for (const auto& f : m.value("metric_fields", json::array())) {
        const std::string name = f.value("path", "");
        if (!fs::is_regular_file(dir / name)) continue;
        try {
            const GridFields g = read_hegf(dir / name);
            if (g.fields.empty()) throw Error("no background field");
            const double tol = f.value("trace_log_tol", trace_log_tol);
            double worst = 0.0;
            bool positive = true;
            for (std::size_t k = 1; k < g.fields.size(); ++k)
                for (std::size_t i = 0; i < g.fields[k].size(); ++i) {
                    const Mat& K = g.fields[0][i];
                    const Mat& H = g.fields[k][i];
                    const Mat kh = herm_inv_sqrt(K, metric_condition_floor);
                    const Spectrum h = eigh(kh * H * kh);
                    if (h.values.minCoeff() <= 0.0) {
                        positive = false;
                        continue;
                    }
                    worst = std::max(worst, std::abs(h.values.array().log().sum()));
                }
            if (!positive) fail(name + ": stored metric is not positive definite");
            if (worst <= tol) {
                v.checked.push_back(name + ": tr log h = 0");
            } else {
                std::ostringstream os;
                os << name << ": tr log h = 0 violated (max |tr log h| = " << worst << " > " << tol << ")";
                fail(os.str());
            }
        } catch (const std::exception& e) {
            fail(name + ": corrupt field file: " + e.what());
        }
    }

    v.pass = v.failures.empty();
    return v;
}

std::string scenario_listing() {
    std::ostringstream os;
    os << "tag                 alias rank  background\n"
       << "rank1_flat          s1    1     lambdaFK = c\n"
       << "direct_sum          s2    2     lambdaFK = diag(c1, c2), a = 0; unstable iff c1 != c2\n"
       << "extension           s3    2     a = nu e1 (x) e2^*, lambdaFK = 0\n"
       << "bumped_rank1_flat   s4    1     rank1_flat plus a zero-mean bump of amplitude `bump`\n"
       << "bumped_direct_sum   s4    2     direct_sum plus bump diag(1, -1)\n"
       << "bumped_extension    s4    2     extension plus bump\n"
       << "Any tag runs on a punctured domain (s5) with domain.kind = punctured.\n";
    return os.str();
}

}  // namespace hef
