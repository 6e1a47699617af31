#pragma once

#include <vector>

#include "cesmark/production.hpp"
#include "cesmark/types.hpp"

namespace cesmark {

/// Output markup from the intermediates first-order condition:
///   mu = Qhat / kernel * alpha_M Mnorm^sO / M * (P_M / P)^{-1}.
/// Qhat is planned output at the smoothed omega_H, so measurement error
/// never enters the markup.
double markup_from_materials(const PanelObservation& obs, const ProductionParams& params,
                             double omega_L_hat, double omega_H_hat);

/// Same markup via the white-collar condition; identical by construction
/// whenever omega_L comes from the H/M ratio characterization.
double markup_from_labor(const PanelObservation& obs, const ProductionParams& params,
                         double omega_L_hat, double omega_H_hat);

/// Composite labor frictions (MRPL-over-wage ratios gross of coordination
/// costs) for temporary and permanent blue-collar workers.
struct LaborFrictions {
    double nu_tilde_C = 0, nu_tilde_D = 0;
};
LaborFrictions labor_frictions(const PanelObservation& obs, const ProductionParams& params);

/// Operating profit Pi = Qhat * (P - P/mu).
double operating_profit(const PanelObservation& obs, double mu, double Q_hat);

/// Cost-share-weighted TFP: log of the payroll-weighted exp(omega_L) plus
/// materials-weighted exp(omega_H); payroll covers all three worker types.
double tfp(const PanelObservation& obs, double omega_H_hat, double omega_L_hat);

/// Markdown percentage 100 * (nu - 1) / nu.
double markdown_percent(double nu);

/// Step-4 records: markups, marginal cost, Lerner, profit, TFP and the
/// composite frictions. The step-5 decompositions (nu, F, markdowns) are
/// filled in by the labor-supply module.
std::vector<MarketPowerRecord> market_power_step4(const Panel& panel,
                                                  const ProductionParams& params,
                                                  const std::vector<double>& omega_L_hat,
                                                  const std::vector<double>& omega_H_hat);

}  // namespace cesmark
