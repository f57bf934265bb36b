#pragma once

#include <string>

#include "rwi/config.hpp"

namespace rwi::cli {

struct RunResult {
    std::string report_json;
    std::string csv;
    int exit_code = 0;  // 0 = assertions pass, 2 = assertion failure
};

// Phase-transition observable sweep: eta_hat over the configured u grid.
RunResult run_phase_sweep(const ExperimentConfig& cfg, int threads);

// Full macroscopic coupling construction: Y/Z kernels, soft-local-times
// coupling, conditioned excursion re-decoration, matched interlacement
// excursions, and the vacant-set sandwich frequency on B_N.
RunResult run_coupling_pipeline(const ExperimentConfig& cfg, int threads);

// Empirical coupling-failure and tail frequencies against the evaluated
// bounds; records the calibration constants making every bound valid.
RunResult run_bound_check(const ExperimentConfig& cfg, int threads);

// Potential-theory table for the configured geometry.
RunResult run_tabulate_potential(const ExperimentConfig& cfg, int threads);

RunResult run_experiment(const ExperimentConfig& cfg, int threads);

}  // namespace rwi::cli
