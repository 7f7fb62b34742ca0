// heflow: run, verify and list scenarios of the perturbed heat-flow lab.

#include "hef/config.hpp"
#include "hef/error.hpp"
#include "hef/parallel.hpp"
#include "hef/runner.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <string>

int main(int argc, char** argv) {
    CLI::App app{"heflow: perturbed Hermitian-Einstein heat flow laboratory"};
    app.require_subcommand(1);

    int threads = 0;
    std::string output;
    app.add_option("--threads", threads, "worker threads (falls back to HEFLOW_THREADS)")->check(CLI::NonNegativeNumber);
    app.add_option("--output", output, "artifact directory, overrides output.dir from the config");

    std::string config_path;
    auto* run = app.add_subcommand("run", "execute the pipeline declared in a config file");
    run->add_option("config", config_path, "scenario config")->required();

    std::string verify_dir;
    auto* verify = app.add_subcommand("verify", "re-check recorded invariants of an artifact directory");
    verify->add_option("dir", verify_dir, "artifact directory")->required();

    auto* scenarios = app.add_subcommand("scenarios", "scenario catalogue");
    auto* list = scenarios->add_subcommand("list", "list built-in scenarios");
    scenarios->require_subcommand(1);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    if (threads == 0)
        if (const char* env = std::getenv("HEFLOW_THREADS")) {
            try {
                threads = std::stoi(env);
            } catch (const std::exception&) {
                std::cerr << "ignoring HEFLOW_THREADS='" << env << "': not an integer\n";
            }
        }
    if (threads > 0) hef::set_thread_count(threads);

    if (list->parsed()) {
        std::cout << hef::scenario_listing();
        return hef::exit_ok;
    }

    if (verify->parsed()) {
        const hef::VerifyOutcome v = hef::verify_artifacts(verify_dir);
        for (const auto& c : v.checked) std::cout << "ok    " << c << "\n";
        for (const auto& f : v.failures) std::cout << "FAIL  " << f << "\n";
        std::cout << (v.pass ? "verify: pass\n" : "verify: FAIL\n");
        return v.pass ? hef::exit_ok : hef::exit_failure;
    }

    hef::ScenarioConfig cfg;
    try {
        cfg = hef::load_config(config_path);
    } catch (const hef::ConfigError& e) {
        std::cerr << config_path << ": " << e.what() << "\n";
        return hef::exit_config;
    } catch (const hef::Error& e) {
        std::cerr << config_path << ": " << e.what() << "\n";
        return hef::exit_config;
    }
    if (!output.empty()) cfg.output_dir = output;
    try {
        const hef::RunOutcome out = hef::run_pipeline(cfg, cfg.output_dir, std::cout);
        std::cout << "status: " << out.status << ", artifacts in " << out.directory.string() << "\n";
        return out.exit_code;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return hef::exit_failure;
    }
}
