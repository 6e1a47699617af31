#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cesmark/steps.hpp"
#include "cesmark/types.hpp"

namespace cesmark {

/// Run configuration for the estimation pipeline; one JSON file.
struct RunConfig {
    std::string input_csv;
    std::string truth_sidecar;       // optional; enables truth-mean runs
    bool use_truth_means = false;    // normalize with the sidecar baselines

    bool run_step1 = true, run_step2 = true, run_step3 = true;
    bool run_step4 = true, run_step5 = true;

    StepOptions steps;               // optimizer + instrument menu
    std::uint64_t seed = 1;
    int workers = 1;

    int bootstrap_reps = 0;
    std::uint64_t bootstrap_seed = 1;
    bool bootstrap_per_observation = false;
    int theta_bootstrap_reps = 0;

    bool lerner_restrict = true;     // positive-Lerner sample for report series
    double working_days = 250.0;     // annualization of daily wages

    std::vector<int> interval_starts;  // policy interval boundaries (years);
                                       // empty: four equal spans of the panel

    bool use_perpetual_inventory = false;
    double depreciation = 0.10;

    void validate() const;

    /// Policy interval of a year given the configured boundaries (or the
    /// default even split of [min_year, max_year]).
    int interval_of(int year, int min_year, int max_year) const;
};

RunConfig load_run_config(const std::string& path);
std::string run_config_canonical_json(const RunConfig& cfg);

/// Generator configuration from JSON; unspecified keys keep the defaults of
/// default_dgp_config().
struct DgpConfig;  // defined in dgp.hpp
DgpConfig load_dgp_config(const std::string& path);

/// FNV-1a 64-bit hash of the canonical config text; stable across runs.
std::uint64_t fnv1a64(const std::string& text);

}  // namespace cesmark
