#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace cesmark {

// Thrown when an evaluation leaves the admissible domain (non-positive
// quantity, non-finite intermediate, ...). Message names the offending term.
struct DomainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Thrown for invalid parameter values (tau <= 0, sigma == 0, ...).
struct ParameterError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Thrown when a configuration is internally inconsistent (unknown year
// effect, missing instrument column, infeasible bounds, ...).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Thrown when an estimation or generation step cannot proceed.
struct EstimationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// One establishment-year record of the wide-format panel.
///
/// Quantities are mandays (labor), physical units (K, M) and an output
/// quantity index (Q_obs). Wages are daily rates; P and P_M are price
/// indices. All quantities and prices are strictly positive where present.
struct PanelObservation {
    std::string plant_id;
    int year = 0;
    std::string market_id;  // local labor market (state r)

    double Q_obs = 0;  // observed output quantity
    double P = 0;      // output price index
    double K = 0;      // capital
    double M = 0;      // intermediate inputs
    double P_M = 0;    // intermediates price index
    double H = 0;      // white-collar mandays
    double W_H = 0;    // white-collar daily wage
    double C = 0;      // temporary blue-collar mandays
    double W_C = 0;    // temporary daily wage
    double D = 0;      // permanent blue-collar mandays
    double W_D = 0;    // permanent daily wage

    double IDA = 0;               // pro-worker regulation index (state level)
    double Imp_lag = 0;           // imported-intermediates indicator, lagged, in {0,1}
    double strike_intensity = 0;  // mandays lost per eligible worker, state-year

    // Non-participation mandays for the market-year share denominators.
    double outside_mandays_C = 0;
    double outside_mandays_D = 0;

    // Named exogenous shifters usable as instruments.
    std::map<std::string, double> extra_instruments;
};

/// Geometric-mean baselines. B and L are latent aggregates: their baseline
/// levels are fixed at 1 and the matching price indices carry the
/// expenditure adding-up identities
///   W_B * B = W_C * C + W_D * D    and    W_L * L = W_H * H + W_B * B.
struct GeometricMeans {
    double Q = 1, K = 1, M = 1, H = 1, C = 1, D = 1;
    double W_H = 1, W_C = 1, W_D = 1, P_M = 1;
    double W_B = 1, W_L = 1, B = 1, L = 1;

    double blue_expenditure() const { return W_C * C + W_D * D; }
    double labor_expenditure() const { return W_H * H + W_B * B; }
    double materials_expenditure() const { return P_M * M; }

    void validate() const;
};

/// Worker-type CES shares derived from baseline expenditure ratios.
struct WorkerShares {
    double alpha_C = 0, alpha_D = 0;  // temporary/permanent within blue-collar
    double alpha_H = 0, alpha_B = 0;  // white/blue within total labor
};

/// Top-nest CES shares, pinned down by the capital wedge tau.
struct InputShares {
    double alpha_K = 0, alpha_M = 0, alpha_L = 0;
};

/// Full production-side parameter set: CES exponents, capital wedge,
/// shares and the normalization baselines.
struct ProductionParams {
    double sigma_O = 0.5;  // across K/M/L
    double sigma_M = 0.5;  // white vs blue collar
    double sigma_I = 0.5;  // permanent vs temporary
    double tau = 1.0;      // capital deviation from static optimum

    InputShares input;
    WorkerShares worker;
    GeometricMeans means;

    void validate() const;
};

/// AR(1) productivity-process parameters for one component (H or L).
struct MarkovProcess {
    double rho = 0;
    double beta_ida = 0;           // loading on IDA_rt
    double beta_imp = 0;           // loading on Imp_{jt-1}
    std::map<int, double> iota;    // year effects

    double year_effect(int year) const {
        auto it = iota.find(year);
        if (it == iota.end())
            throw ConfigError("unknown year effect for year " + std::to_string(year));
        return it->second;
    }

    /// One step of the controlled AR(1): iota_t + rho*prev + b1*IDA + b2*Imp + xi.
    double step(double prev, double ida, double imp, double xi, int year) const {
        return year_effect(year) + rho * prev + beta_ida * ida + beta_imp * imp + xi;
    }
};

struct ProductivityParams {
    MarkovProcess hicks;   // omega^H process
    MarkovProcess labor;   // omega^L process
    double sigma_H = 0;    // sd of xi^H innovations
    double sigma_L = 0;    // sd of xi^L innovations
    double sigma_eps = 1.0;  // measurement-error sd, fixed at 1

    void validate() const;
};

/// Latent productivity realizations for one establishment-year.
struct ProductivityState {
    double omega_H = 0, omega_L = 0;  // normalized log productivities
    double xi_H = 0, xi_L = 0;        // innovations
    double eps = 0;                   // output measurement error
};

/// Nested-logit labor supply parameters for one worker type.
/// The effective wage coefficient at time interval a is gamma + gamma_t * a.
struct LaborSupplyParams {
    double gamma = 0;      // base wage coefficient
    double gamma_t = 0;    // per-interval shift of the wage coefficient
    double eta = 0;        // nesting parameter, in (0,1)
    double intercept = 0;
    double trend = 0;

    double gamma_at(int interval) const { return gamma + gamma_t * static_cast<double>(interval); }
};

/// Per-observation market power measures (step 4 output plus the step 5
/// decompositions filled in once supply parameters are available).
struct MarketPowerRecord {
    std::string plant_id;
    int year = 0;

    double mu = 0;            // output markup P/MC, intermediates condition
    double mu_labor = 0;      // same markup via the white-collar condition
    double mc = 0;            // marginal cost, price units
    double lerner = 0;        // 1 - 1/mu
    double pi_hat = 0;        // operating profit Q_hat * (P - P/mu)
    double q_hat = 0;         // planned output with smoothed omega_H
    double tfp = 0;

    double nu_tilde_C = 0, nu_tilde_D = 0;  // total frictions (eqs. for FOC ratios)
    double nu_C = 0;                        // monopsony component, temporary
    double nu_D_NB = 0;                     // permanent, Nash-Bertrand conduct
    double nu_D_NN = 0;                     // permanent, Nash-bargaining conduct
    double F_C = 0, F_D = 0;                // wage-normalized marginal coordination costs
    double markdown_C = 0;                  // percent
    double markdown_D_NB = 0;
    double markdown_D_NN = 0;

    bool mu_valid = true;        // false when mu <= 0
    bool lerner_positive = false;
    bool nu_D_NN_in_range = false;  // 1 < nu_D_NN < 1 + wage-slope term
};

using Panel = std::vector<PanelObservation>;

}  // namespace cesmark
