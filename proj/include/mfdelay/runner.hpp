#pragma once

#include "mfdelay/config.hpp"

namespace mfdelay {

inline constexpr const char* kCodeVersion = "mfdelay 0.1.0";

/// Exit codes of the batch runner (stable contract):
///   0 every requested check passed
///   2 validation failure (reported by the CLI before run_experiment)
///   3 numerical failure while running (partial artifacts + manifest kept)
///   4 at least one requested check failed
enum ExitCode : int {
    kExitAllPass = 0,
    kExitValidation = 2,
    kExitNumerical = 3,
    kExitCheckFailure = 4,
};

/// Executes the requested pipeline, writing per-check CSVs, report.txt and
/// manifest.json under config.out_dir. Identical config + seed produce
/// byte-identical CSV outputs for any thread count.
int run_experiment(const ExperimentConfig& config);

} // namespace mfdelay
