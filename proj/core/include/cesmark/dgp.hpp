#pragma once

#include <cstdint>
#include <vector>

#include "cesmark/production.hpp"
#include "cesmark/types.hpp"

namespace cesmark {

enum class Conduct { NashBertrand, NashBargaining };
enum class MarkupRule { Constant, Isoelastic };

/// Log AR(1) process spec for an exogenous input series.
struct ExoProcess {
    double rho = 0.85;
    double sd = 0.2;
    double shifter_loading = 0.0;  // loading on the per-plant instrument shifter
    double omega_loading = 0.0;    // loading on lagged Hicks productivity
};

struct DgpConfig {
    // Production truths (Table-scale defaults).
    double sigma_O = 0.501, sigma_M = 0.773, sigma_I = 0.222;
    double tau = 0.376;

    ProductivityParams productivity;  // iota maps filled by default_config

    LaborSupplyParams supply_C;  // temporary workers
    LaborSupplyParams supply_D;  // permanent workers

    Conduct conduct = Conduct::NashBargaining;
    double theta = 0.939;  // plant bargaining weight, in (0,1]

    // Isoelastic demand by default: the markup is still constant at
    // mu = e/(e-1), and the price response to productivity keeps the
    // left-tail wage conditions solvable at the published sigma_H.
    MarkupRule markup_rule = MarkupRule::Isoelastic;
    double mu = 1.2;                  // constant markup under MarkupRule::Constant
    double demand_elasticity = 2.0;   // isoelastic rule: mu = e/(e-1)

    // Linear coordination costs Gamma(C,D) = g_C*C + g_D*D.
    double g_C = 0.0, g_D = 0.0;

    int n_plants = 200, n_years = 15, n_markets = 10;
    int first_year = 2001;
    int n_policy_intervals = 4;

    // Baseline scale constants; wage units are deflated daily wages scaled
    // so the supply slopes of the default parameters keep FOC wages positive.
    double base_W_C = 4000.0, base_W_D = 9000.0, base_W_H = 15000.0;
    double base_C = 50000.0;
    double base_P = 1.0, base_P_M = 10.0;
    double base_K = 4.0e9;

    ExoProcess k_process{0.85, 0.40, 0.0, 0.30};
    ExoProcess h_process{0.80, 0.25, 0.50, 0.0};
    ExoProcess m_process{0.80, 0.25, 0.50, 0.0};
    ExoProcess p_process{0.70, 0.10, 0.0, 0.0};

    double ida_mean = 2.0, ida_rho = 0.9, ida_sd = 0.35;
    double imp_p11 = 0.85, imp_p01 = 0.15;  // P(Imp=1 | lag)
    double strike_log_mean = 1.0, strike_log_sd = 0.5;

    double amenity_sd_C = 0.30, amenity_sd_D = 0.30;
    double inside_share_target = 0.30;
    double market_size_sd = 0.10;

    double instrument_sd = 1.0;      // sd of the per-plant shifters z1..z3
    int calibration_passes = 4;      // baseline-constant self-consistency passes
    int fixed_point_max_iter = 500;
    double fixed_point_tol = 1e-13;

    std::uint64_t seed = 20250801;

    /// Policy-interval index (0-based) of a year, split evenly over the panel.
    int interval_of(int year) const;

    void validate() const;
};

/// Config with Table 1-4 truths and year-effect maps filled in.
DgpConfig default_dgp_config();

/// Per-observation latent truth, aligned with the emitted panel rows.
struct ObservationTruth {
    ProductivityState state;
    double mu = 0;            // markup used in generation
    double pi_hat = 0;        // Q*(P - P/mu)
    double mrpl_C = 0, mrpl_D = 0;  // (P/mu) * marginal product, gross of coordination
    double nu_C = 0, nu_D = 0;      // monopsony components MRPL-net / wage
    double F_C = 0, F_D = 0;        // g_X / W_X
    double invel_C = 0, invel_D = 0;  // inverse supply elasticity terms
    double s_C = 0, s0_C = 0, scond_C = 0;
    double s_D = 0, s0_D = 0, scond_D = 0;
    double amenity_C = 0, amenity_D = 0;
    double Q_planned = 0;
};

struct PanelTruth {
    ProductionParams params;          // true technology with calibrated means
    ProductivityParams productivity;
    LaborSupplyParams supply_C, supply_D;
    Conduct conduct = Conduct::NashBertrand;
    double theta = 1.0;
    double g_C = 0, g_D = 0;
    MarkupRule markup_rule = MarkupRule::Constant;
    double mu = 1.0;
    int first_year = 0, n_years = 0, n_policy_intervals = 4;
    std::vector<ObservationTruth> obs;  // same order as the panel rows
};

struct SimulatedPanel {
    Panel panel;
    PanelTruth truth;
};

/// Generate a synthetic establishment panel on which every estimating
/// equation holds exactly: the productivity laws of motion, the observed
/// output equation, the H and M first-order conditions (W_H and P_M backed
/// out), the C and D wage-setting conditions under the configured conduct,
/// and the nested-logit share equations (amenities drawn, shares solved
/// jointly with wages per market-year).
SimulatedPanel simulate_panel(const DgpConfig& config);

// ---------------------------------------------------------------------------
// Stand-alone labor-supply dataset generator (step-5 Monte Carlo harness).

struct LaborMarketConfig {
    LaborSupplyParams supply;  // truth
    int n_markets = 25;
    int n_years = 5;
    int min_plants = 3, max_plants = 6;  // per market
    int first_year = 2001;
    int n_policy_intervals = 4;

    double wage_base = 1000.0;
    double wage_instrument_coef = 120.0;  // on z ~ N(0,1)
    double wage_amenity_coef = -150.0;    // endogeneity channel; <0 mirrors FOC wage setting
    double wage_noise_sd = 40.0;
    double amenity_sd = 0.5;
    double inside_share_target = 0.30;

    std::uint64_t seed = 7;

    int interval_of(int year) const;
};

struct LaborMarketRow {
    std::string market_id, plant_id;
    int year = 0, interval = 0;
    double W = 0;
    double share = 0, outside_share = 0, cond_share = 0;
    double log_odds = 0;       // log(s_j / s_0)
    double z = 0;              // wage cost shifter (instrument)
    double z_rivals = 0;       // leave-out market mean shifter
    double n_establishments = 0;
    double amenity = 0;        // latent truth
};

struct LaborMarketDataset {
    std::vector<LaborMarketRow> rows;
    LaborSupplyParams truth;
    int n_policy_intervals = 4;
};

/// Shares are generated forward from the supply equation given wages and
/// amenities; within-market adding-up holds exactly by the nested-logit
/// closed form.
LaborMarketDataset simulate_labor_market(const LaborMarketConfig& config);

/// Closed-form nested-logit shares for one market: given delta_j (utility
/// net of the nest term) and eta, returns (s_j, s_0, s_cond).
struct MarketShares {
    std::vector<double> s;
    std::vector<double> s_cond;
    double s0 = 0;
};
MarketShares nested_logit_shares(const std::vector<double>& delta, double eta);

}  // namespace cesmark
