#pragma once

#include <map>
#include <string>
#include <vector>

#include "cesmark/types.hpp"

namespace cesmark {

/// State-space layout for the residual decomposition:
///   measurement  wtilde_t = H pi_t + A Y_t + iota_t,   H = [1, 1, -rho]
///   transition   pi_t = F pi_{t-1} + G u_t,            pi = [xi_t, eps_t, eps_{t-1}]'
/// with A = [rho, beta_1, beta_2], Y_t = [wtilde_{t-1}, IDA_t, Imp_{t-1}]',
/// F the shift matrix, G the selector and Sigma = diag(sigma_H^2, 1).
///
/// Plants are split into maximal consecutive-year segments; each segment's
/// first observation only anchors the lag. Gap years restart the filter.
struct StateSpaceSpec {
    double rho_H = 0, beta_H1 = 0, beta_H2 = 0;

    struct Step {
        double omega_tilde = 0;      // current observation
        double lag_omega_tilde = 0;  // Y entry
        double ida = 0, imp_lag = 0;
        double iota = 0;             // estimated year effect
        int panel_row = -1;
    };
    struct Segment {
        int anchor_row = -1;          // panel row consumed as the first lag
        double anchor_omega_tilde = 0;
        std::vector<Step> steps;
    };
    struct PlantSeq {
        std::string plant_id;
        std::vector<Segment> segments;
    };
    std::vector<PlantSeq> plants;
    std::vector<double> omega_tilde_all;  // per panel row
    int n_panel_rows = 0;

    /// Assemble from a panel and the step-2 residual series (one entry per
    /// panel row) plus the estimated process parameters.
    static StateSpaceSpec build(const Panel& panel, const std::vector<double>& omega_tilde,
                                const std::map<int, double>& iota_H, double rho_H,
                                double beta_H1, double beta_H2);
};

/// Total log-likelihood sum_j sum_t [ -log N_t - nu_t^2 / N_t ] from the
/// filter recursions with pi_{0|0} = 0 and P_{0|0} = G Sigma G'. The additive
/// normal constant is dropped throughout. Returns -inf when an innovation
/// variance is singular.
double kalman_loglik(const StateSpaceSpec& spec, double sigma_H2);

struct SigmaHEstimate {
    double sigma_H = 0;
    double sigma_H2 = 0;
    double se = 0;       // delta-method from the sigma_H^2 curvature
    double loglik = 0;
    bool at_boundary = false;
};

/// Maximum likelihood for sigma_H^2 >= 0 by safeguarded scalar search.
SigmaHEstimate estimate_sigma_H(const StateSpaceSpec& spec);

struct SmootherOutput {
    std::vector<double> xi_H_hat;    // per panel row, NaN where undefined
    std::vector<double> eps_hat;     // per panel row, NaN where undefined
    std::vector<double> omega_H_hat; // per panel row
    double sigma_H2 = 0;
    double loglik = 0;
    bool used_pseudo_inverse = false;
};

/// Backward smoothing pass; xi_hat and eps_hat are elements 1 and 2 of the
/// smoothed state, the anchor row's eps comes from element 3 at the first
/// step, and omega_H accumulates as omega_tilde - eps_hat. Rows that belong
/// to no segment keep omega_H = omega_tilde with eps undefined.
SmootherOutput kalman_smooth(const StateSpaceSpec& spec, double sigma_H2);

}  // namespace cesmark
