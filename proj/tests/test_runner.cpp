#include <doctest.h>

#include "hef/error.hpp"
#include "hef/io.hpp"
#include "hef/runner.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <set>
#include <sstream>

using namespace hef;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("heflow_test_" + name);
    fs::remove_all(p);
    return p;
}

RunOutcome run_text(const std::string& text, const fs::path& dir) {
    std::ostringstream log;
    return run_pipeline(parse_config(text), dir, log);
}

nlohmann::json manifest(const fs::path& dir) { return nlohmann::json::parse(read_file(dir / "manifest.json")); }

const char* s2_sweep =
    "pipeline = sweep\n"
    "domain.n = 8\n"
    "model.scenario = direct_sum\n"
    "flow.epsilon = 1.6, 0.8, 0.4\n"
    "flow.t_max = 200\n"
    "flow.tol_residual = 1e-9\n"
    "flow.monitor_stride = 50\n";

}  // namespace

TEST_CASE("s2 sweep artifacts: DIVERGENT, sqrt(2) column, verify passes") {
    const fs::path dir = fresh_dir("s2_sweep");
    const RunOutcome out = run_text(s2_sweep, dir);
    CHECK(out.exit_code == exit_ok);
    const auto m = manifest(dir);
    CHECK(m["status"] == "ok");
    CHECK(m["verdicts"]["classification"] == "DIVERGENT");
    const CsvTable sweep = read_csv(dir / "sweep.csv");
    const std::size_t col = sweep.column("sup_eps_log_h");
    REQUIRE(sweep.rows.size() == 3);
    for (const auto& row : sweep.rows) CHECK(std::abs(row[col] - std::sqrt(2.0)) < 1e-6);

    const VerifyOutcome v = verify_artifacts(dir);
    CHECK(v.pass);
    CHECK(v.failures.empty());
    // idempotent: a second verification sees the same directory
    CHECK(verify_artifacts(dir).checked == v.checked);

    // manifest completeness: every emitted file is listed with a hash
    std::set<std::string> listed;
    for (const auto& f : m["files"]) {
        listed.insert(f["path"].get<std::string>());
        CHECK(f["sha256"].get<std::string>().size() == 64);
    }
    for (const auto& e : fs::directory_iterator(dir))
        if (e.path().filename() != "manifest.json") CHECK(listed.count(e.path().filename().string()) == 1);
}

TEST_CASE("identical config gives bitwise identical CSV outputs") {
    const fs::path a = fresh_dir("det_a"), b = fresh_dir("det_b");
    const std::string text =
        "pipeline = uniqueness\nseed = 5\ndomain.n = 8\nflow.epsilon = 0.8\nflow.t_max = 50\n"
        "flow.tol_residual = 1e-9\nflow.monitor_stride = 20\n";
    run_text(text, a);
    run_text(text, b);
    for (const char* f : {"monitors_a.csv", "monitors_b.csv", "distance.csv"})
        CHECK(read_file(a / f) == read_file(b / f));
    CHECK(read_file(a / "fields.hegf") == read_file(b / "fields.hegf"));
    CHECK(manifest(a)["verdicts"]["verdict"] == "IDENTICAL");
}

TEST_CASE("flat line bundle: AHE and all-zero monitors") {
    const fs::path dir = fresh_dir("s1_flat");
    const RunOutcome out = run_text(
        "pipeline = sweep\ndomain.n = 8\nmodel.scenario = s1\nmodel.c = 0\nflow.epsilon = 0.4, 0.2, 0.1, 0.05\n", dir);
    CHECK(out.exit_code == exit_ok);
    CHECK(manifest(dir)["verdicts"]["classification"] == "AHE");
    for (int k = 0; k < 4; ++k) {
        const CsvTable t = read_csv(dir / ("monitors_eps" + std::to_string(k) + ".csv"));
        for (const auto& row : t.rows)
            for (std::size_t c = 0; c < row.size(); ++c) CHECK(row[c] == 0.0);
    }
    CHECK(verify_artifacts(dir).pass);
}

TEST_CASE("verify names the violated invariant after a hand edit") {
    const fs::path dir = fresh_dir("tamper");
    run_text("domain.n = 8\nflow.epsilon = 0.8\nflow.t_max = 20\nflow.tol_residual = 1e-9\nflow.monitor_stride = 100\n",
             dir);
    REQUIRE(verify_artifacts(dir).pass);

    CsvTable t = read_csv(dir / "monitors_flow.csv");
    REQUIRE(t.rows.size() > 4);
    const std::size_t col = t.column("sup_residual");
    t.rows[3][col] = 10.0 * t.rows[2][col] + 1.0;  // increasing residual
    write_csv(dir / "monitors_flow.csv", t);
    const VerifyOutcome v = verify_artifacts(dir);
    CHECK(!v.pass);
    bool monotone = false, hash = false;
    for (const auto& f : v.failures) {
        monotone = monotone || f.find("monotone residual violated") != std::string::npos;
        hash = hash || f.find("hash mismatch") != std::string::npos;
    }
    CHECK(monotone);
    CHECK(hash);
}

TEST_CASE("verify reports det drift and trace violations in stored fields") {
    const fs::path dir = fresh_dir("tamper_fields");
    run_text("domain.n = 8\nflow.epsilon = 0.8\nflow.t_max = 20\nflow.tol_residual = 1e-9\nflow.monitor_stride = 100\n",
             dir);
    GridFields g = read_hegf(dir / "fields.hegf");
    g.fields[1][10] *= 1.01;
    write_hegf(dir / "fields.hegf", g);
    CsvTable t = read_csv(dir / "monitors_flow.csv");
    t.rows.back()[t.column("det_drift")] = 1e-3;
    write_csv(dir / "monitors_flow.csv", t);
    const VerifyOutcome v = verify_artifacts(dir);
    bool trace = false, det = false;
    for (const auto& f : v.failures) {
        trace = trace || f.find("tr log h = 0 violated") != std::string::npos;
        det = det || f.find("det drift bound violated") != std::string::npos;
    }
    CHECK(trace);
    CHECK(det);
}

TEST_CASE("verify on empty, missing and corrupt directories") {
    const fs::path dir = fresh_dir("empty");
    fs::create_directories(dir);
    VerifyOutcome v = verify_artifacts(dir);
    CHECK(!v.pass);
    REQUIRE(v.failures.size() == 1);
    CHECK(v.failures[0].find("missing manifest") != std::string::npos);

    CHECK(!verify_artifacts(fresh_dir("does_not_exist")).pass);

    write_file(dir / "manifest.json", "{ not json");
    v = verify_artifacts(dir);
    CHECK(!v.pass);
    CHECK(v.failures[0].find("corrupt manifest") != std::string::npos);

    const fs::path full = fresh_dir("missing_files");
    run_text("domain.n = 8\nflow.epsilon = 0.8\nflow.t_max = 5\nflow.monitor_stride = 100\n", full);
    fs::remove(full / "fields.hegf");
    fs::remove(full / "residual.svg");
    v = verify_artifacts(full);
    int missing = 0;
    for (const auto& f : v.failures) missing += f.find("missing file") != std::string::npos;
    CHECK(missing == 2);
}

TEST_CASE("non-converged mandatory stage gives a nonzero exit and is recorded") {
    const fs::path dir = fresh_dir("not_converged");
    const RunOutcome out = run_text("domain.n = 8\nflow.epsilon = 0.1\nflow.t_max = 0.5\nflow.monitor_stride = 10\n", dir);
    CHECK(out.exit_code == exit_not_converged);
    const auto m = manifest(dir);
    CHECK(m["status"] == "not_converged");
    CHECK(m["runs"][0]["converged"] == false);

    const fs::path ex = fresh_dir("not_converged_stage");
    const RunOutcome o2 = run_text(
        "pipeline = exhaustion\ndomain.kind = punctured\ndomain.n = 16\ndomain.radii = 0.24, 0.125\n"
        "flow.epsilon = 0.4\nflow.t_max = 0.01\n",
        ex);
    CHECK(o2.exit_code == exit_not_converged);
    CHECK(manifest(ex)["error"].get<std::string>().find("stage 0") != std::string::npos);
}

TEST_CASE("stability pipeline reports the destabilizing summand") {
    const fs::path dir = fresh_dir("stability");
    const RunOutcome out = run_text(
        "pipeline = stability\ndomain.n = 8\nflow.epsilon = 0.8\nflow.t_max = 50\nflow.tol_residual = 1e-9\n"
        "flow.monitor_stride = 100\nstability.basis = 1, 0\n",
        dir);
    CHECK(out.exit_code == exit_ok);
    const auto w = manifest(dir)["verdicts"]["witness"];
    REQUIRE(w.size() == 2);
    for (const auto& row : w) {
        CHECK(row["verdict"] == "DESTABILIZING");
        CHECK(std::abs(row["deg_sub"].get<double>() - 1.0) < 1e-10);
        CHECK(std::abs(row["deg_total"].get<double>()) < 1e-10);
    }
}

TEST_CASE("output flags suppress file kinds") {
    const fs::path dir = fresh_dir("flags");
    run_text("domain.n = 8\nflow.epsilon = 0.8\nflow.t_max = 5\noutput.svg = false\noutput.fields = false\n", dir);
    CHECK(!fs::exists(dir / "residual.svg"));
    CHECK(!fs::exists(dir / "fields.hegf"));
    CHECK(!fs::exists(dir / "model.hegf"));
    CHECK(fs::exists(dir / "monitors_flow.csv"));
}
