#pragma once

// Pipeline execution and offline verification of artifact directories.

#include "hef/config.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace hef {

/// Process exit codes shared by the CLI.
enum ExitCode : int {
    exit_ok = 0,
    exit_failure = 1,       ///< verify failed or an unexpected error
    exit_config = 2,        ///< config could not be read, parsed or range-checked
    exit_not_converged = 3  ///< a mandatory stage did not converge
};

struct RunOutcome {
    int exit_code = exit_ok;
    std::filesystem::path directory;
    std::string status;               ///< ok | not_converged | error
    std::vector<std::string> notes;   ///< one line per stage or verdict
};

/// Runs the configured pipeline and writes the artifact directory: monitor
/// CSVs, sweep CSV, SVG plots, HEGF fields and manifest.json.  Module errors
/// are reported with the stage that raised them; the manifest is written in
/// every case where the directory could be created.
RunOutcome run_pipeline(const ScenarioConfig& cfg, const std::filesystem::path& out_dir, std::ostream& log);

struct VerifyOutcome {
    bool pass = false;
    std::vector<std::string> checked;   ///< invariants that held
    std::vector<std::string> failures;  ///< each names the file and the violated invariant
};

/// Re-checks, from the stored files only: listed files present with matching
/// hashes, monitor residual non-increasing after the first step, det drift
/// within the recorded bound, and tr log(K^{-1} H) = 0 on stored metrics.
/// Never writes.
VerifyOutcome verify_artifacts(const std::filesystem::path& dir);

/// Human-readable table of the built-in scenarios.
std::string scenario_listing();

}  // namespace hef
