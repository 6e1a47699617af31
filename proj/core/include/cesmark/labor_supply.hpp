#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cesmark/tsls.hpp"
#include "cesmark/types.hpp"

namespace cesmark {

/// Estimation rows for one worker type: the supply equation regresses
/// log(s_j/s_0) on wage, wage x interval, log conditional share, a time
/// trend and a constant, instrumenting the first three.
struct LaborSupplyData {
    std::vector<double> log_odds;
    std::vector<double> wage;
    std::vector<double> log_cond_share;
    std::vector<double> share;       // s_jrt, needed for elasticity terms
    std::vector<double> cond_share;
    std::vector<double> trend;       // year index
    std::vector<int> interval;       // policy interval, 0-based
    std::vector<std::string> cluster_ids;
    Eigen::MatrixXd instruments;     // excluded instruments
    std::vector<std::string> instrument_names;

    std::size_t size() const { return log_odds.size(); }
};

struct LaborSupplyEstimate {
    LaborSupplyParams params;
    IvResult iv;
    IvResult ols;
    bool eta_in_range = false;  // eta-hat inside (0,1)
};

LaborSupplyEstimate estimate_labor_supply(const LaborSupplyData& data);

/// Inverse labor supply elasticity term
///   1 + (1 - eta) / (gamma_t W (1 - eta s_cond - (1 - eta) s)).
/// Refuses eta outside (0,1) unless explicitly overridden.
double inverse_supply_elasticity_term(double W, double share, double cond_share,
                                      const LaborSupplyParams& params, int interval,
                                      bool allow_eta_out_of_range = false);

/// Employment shares implied by the panel's quantity and outside-mandays
/// columns: s = X / (inside sum + outside), conditional shares within the
/// market-year.
struct PanelShares {
    std::vector<double> s_C, scond_C, s0_C;
    std::vector<double> s_D, scond_D, s0_D;
};
PanelShares compute_panel_shares(const Panel& panel);

enum class WorkerType { Temporary, Permanent };

/// Assemble the supply-equation dataset for one worker type from a panel,
/// with input-demand shifters (own and rival) as excluded instruments.
LaborSupplyData panel_labor_supply_data(const Panel& panel, WorkerType type,
                                        const std::vector<int>& interval_per_row);

/// Inputs to the bargaining-parameter regression, one entry per usable
/// observation (rows with invalid profits or missing strike data dropped).
struct ThetaInputs {
    std::vector<double> lhs;        // friction gap scaled by the wage-slope term
    std::vector<double> surplus;    // Pi_hat / (D * W_D)
    std::vector<double> ida;
    std::vector<int> year;
    std::vector<double> z_strike;   // strike-exposure interaction instrument
    std::vector<double> p_m;
    std::vector<std::string> cluster_ids;
    std::vector<int> panel_rows;
};

ThetaInputs build_theta_inputs(const Panel& panel,
                               const std::vector<MarketPowerRecord>& records,
                               const LaborSupplyParams& supply_C,
                               const LaborSupplyParams& supply_D, const GeometricMeans& means,
                               double sigma_I, const std::vector<int>& interval_per_row);

struct ThetaEstimate {
    double coef = 0;      // (theta - 1) / theta
    double se_coef = 0;
    double theta = 0;     // 1 / (1 - coef)
    double se_theta = 0;  // delta method, se_coef / |g'(theta)| with g' = 1/theta^2
    bool nonnegative_coef = false;  // theta >= 1 boundary flag
    IvResult iv;
    IvResult ols;
};

ThetaEstimate estimate_theta(const ThetaInputs& inputs);

/// Delta-method transform of a (theta-1)/theta coefficient; pure arithmetic.
ThetaEstimate theta_from_coefficient(double coef, double se_coef);

/// Fill the step-5 decomposition fields of step-4 records in place:
/// monopsony components, coordination costs and markdowns. `theta` enables
/// the Nash-bargaining variant and its theoretical-range flag.
void augment_market_power(std::vector<MarketPowerRecord>& records, const Panel& panel,
                          const LaborSupplyParams& supply_C, const LaborSupplyParams& supply_D,
                          const std::vector<int>& interval_per_row,
                          std::optional<double> theta);

}  // namespace cesmark
