#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cesmark/gmm.hpp"
#include "cesmark/production.hpp"
#include "cesmark/types.hpp"

namespace cesmark {

/// Row bookkeeping shared by the step estimators: panel indices with a
/// previous-year observation of the same plant, and the year-effect layout.
struct PanelIndex {
    std::vector<int> usable;          // rows with a lag
    std::vector<int> lag_of;          // lag row per panel row, -1 if none
    std::vector<int> years;           // distinct years among usable rows, sorted
    std::map<int, int> year_column;   // year -> dummy column

    static PanelIndex build(const Panel& panel);
};

struct StepOptions {
    Weighting weighting = Weighting::TwoStepOptimal;
    OptimOptions optimizer;
    std::vector<std::string> extra_instrument_columns = {"z_h", "z_m", "z_k"};
    bool use_lagged_employment_instruments = true;
    bool use_strike_instrument = true;
    double sigma_lo = 0.01, sigma_hi = 0.99;   // substitutability restriction
    double tau_lo = 1e-3, tau_hi = 20.0;
    // Bootstrap boundary fallback: re-estimate with these held fixed.
    std::optional<double> fix_sigma_O, fix_sigma_M, fix_sigma_I;
    bool compute_rank = false;
};

struct Step1Result {
    CesSigmas sigmas;
    double rho_L = 0, beta_L1 = 0, beta_L2 = 0;
    std::map<int, double> iota_L;
    std::vector<double> omega_L_hat;  // per panel row
    std::vector<double> xi_L_hat;     // per panel row, NaN when no lag
    GmmResult gmm;
};

struct Step2Result {
    double tau = 0;
    double rho_H = 0, beta_H1 = 0, beta_H2 = 0;
    std::map<int, double> iota_H;
    std::vector<double> omega_tilde;  // log Qobs_norm - log f_hat, per panel row
    std::vector<double> log_f_hat;    // per panel row
    bool tau_pinned = false;
    GmmResult gmm;
};

/// Step 1: substitution elasticities and the labor-augmenting productivity
/// series, from moments E[Z_L (x) xi_L] = 0 built on the closed-form
/// characterization of omega_L.
Step1Result step1_estimate(const Panel& panel, const GeometricMeans& means,
                           const StepOptions& opts);

/// Step 2: capital wedge tau and the Hicks-neutral process parameters, from
/// moments E[Z_H (x) chi] = 0 with chi the quasi-differenced output residual.
Step2Result step2_estimate(const Panel& panel, const Step1Result& step1,
                           const GeometricMeans& means, const StepOptions& opts);

/// Moment-system builders exposed for the identification diagnostics.
MomentSystem build_step1_system(const Panel& panel, const GeometricMeans& means,
                                const StepOptions& opts);
MomentSystem build_step2_system(const Panel& panel, const Step1Result& step1,
                                const GeometricMeans& means, const StepOptions& opts);

/// Pack truth-level parameters into the step-1 system layout
/// [sigma_O, sigma_M, sigma_I, rho_L, beta_L1, beta_L2, iota...].
std::vector<double> step1_param_vector(const MomentSystem& system, const CesSigmas& sigmas,
                                       const MarkovProcess& labor);
std::vector<double> step2_param_vector(const MomentSystem& system, double tau,
                                       const MarkovProcess& hicks);

}  // namespace cesmark
