#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cesmark/kalman.hpp"
#include "cesmark/labor_supply.hpp"
#include "cesmark/steps.hpp"
#include "cesmark/types.hpp"

namespace cesmark {

struct ParameterSummary {
    std::string name;
    double mean = 0, median = 0, sd = 0, max = 0, min = 0;
    int effective = 0;
};

struct BootstrapReport {
    int requested = 0;
    std::vector<std::string> param_names;
    std::vector<std::vector<double>> draws;     // [rep][param], NaN when failed
    std::vector<std::vector<char>> effective;   // [rep][param]
    std::vector<ParameterSummary> summaries;    // over effective draws only

    void finalize();  // build summaries from draws/effective
};

enum class PerturbationLevel { PerPlant, PerObservation };

struct WildBootstrapOptions {
    int reps = 100;
    std::uint64_t seed = 1;
    PerturbationLevel level = PerturbationLevel::PerPlant;
    StepOptions step_options;  // optimizer settings for the re-estimation
    int workers = 1;
    bool reestimate_sigma_H = true;
};

/// Everything the wild bootstrap needs from the fitted pipeline.
struct FittedSteps {
    GeometricMeans means;
    Step1Result step1;
    Step2Result step2;
    SigmaHEstimate sigma_H;
    SmootherOutput smoother;
};

/// Appendix-style wild bootstrap: per replication the labor-augmenting
/// innovations and the measurement errors are sign-flipped, materials are
/// rebuilt from the inverted H/M condition so the characterization holds on
/// the perturbed panel, observed output is rebuilt from the production
/// function, and steps 1-3 are re-estimated with geometric means held
/// fixed. Boundary sigma solutions trigger the fixed-sigma fallback; still-
/// boundary parameters are filtered from the per-parameter summaries.
BootstrapReport wild_bootstrap(const Panel& panel, const FittedSteps& fitted,
                               const WildBootstrapOptions& opts);

/// Construct one perturbed panel (exposed for the identity-draw tests).
Panel perturb_panel(const Panel& panel, const FittedSteps& fitted,
                    const std::vector<int>& r1_per_row, const std::vector<int>& r2_per_row);

struct PairsBootstrapOptions {
    int reps = 1000;
    std::uint64_t seed = 2;
    int workers = 1;
};

/// Nonparametric plant-level resampling of the bargaining regression;
/// replications with a nonnegative coefficient are filtered as ineffective.
BootstrapReport pairs_bootstrap_theta(const ThetaInputs& inputs,
                                      const PairsBootstrapOptions& opts);

}  // namespace cesmark
