#pragma once

#include "cesmark/types.hpp"

namespace cesmark {

/// CES exponents bundle passed around the step-1 machinery.
struct CesSigmas {
    double O = 0.5, M = 0.5, I = 0.5;
};

/// Geometric means of the observed columns; the latent aggregates B and L
/// are pinned at 1 with their price indices set by expenditure adding-up.
GeometricMeans geometric_means(const Panel& panel);

/// alpha_C, alpha_D, alpha_H, alpha_B from baseline expenditure ratios.
/// A single zero expenditure is a valid boundary; a zero nest total is not.
WorkerShares worker_shares_from_means(const GeometricMeans& means);

/// alpha_M, alpha_L, alpha_K as functions of the capital wedge tau.
/// Satisfies alpha_K = tau * alpha_M and adding-up to machine precision.
InputShares shares_from_tau(double tau, const GeometricMeans& means);

/// Blue-collar nest B = (a_C C^sI + a_D D^sI)^(1/sI) on normalized inputs.
double blue_collar_nest(double C_norm, double D_norm, const ProductionParams& params);
double blue_collar_nest(double C_norm, double D_norm, double alpha_C, double alpha_D,
                        double sigma_I);

/// Labor nest L = (a_H H^sM + a_B B^sM)^(1/sM) on normalized inputs.
double labor_nest(double H_norm, double B_norm, const ProductionParams& params);
double labor_nest(double H_norm, double B_norm, double alpha_H, double alpha_B, double sigma_M);

/// Planned output Q = Qbar * (a_K K^sO + a_M M^sO + a_L (e^wL L)^sO)^(1/sO) * e^wH
/// on normalized inputs.
double planned_output(double K_norm, double M_norm, double L_norm, double omega_L,
                      double omega_H, const ProductionParams& params);

/// The top-nest CES kernel a_K K^sO + a_M M^sO + a_L (e^wL L)^sO.
double ces_kernel(double K_norm, double M_norm, double L_norm, double omega_L,
                  const ProductionParams& params);

/// Labor-augmenting productivity backed out of the H/M first-order
/// condition ratio, term by term. Throws DomainError with the offending
/// term named if an intermediate is non-finite.
double omega_L_characterization(const PanelObservation& obs, const CesSigmas& sigmas,
                                const WorkerShares& worker, const GeometricMeans& means);

/// log f_jt(tau): the CES component of normalized planned output with the
/// share parameters substituted out, isolating tau.
///   log f = (1/sO) log( PmM / (PmM + WlL + tau PmM) )
///         + (1/sO) log( tau K^sO + M^sO + (WlL/PmM) (e^wL L)^sO )
double log_f_tau(const PanelObservation& obs, double tau, const CesSigmas& sigmas,
                 double omega_L_hat, double L_hat_norm, const GeometricMeans& means);

/// One step of the productivity law of motion (eq. form shared by H and L).
enum class ProductivityKind { Hicks, Labor };
double productivity_step(double prev_omega, const ProductivityParams& params,
                         ProductivityKind which, double ida, double imp_lag, double xi,
                         int year);

/// Normalized inputs of one observation.
struct NormalizedInputs {
    double K = 0, M = 0, H = 0, C = 0, D = 0;
};
NormalizedInputs normalize(const PanelObservation& obs, const GeometricMeans& means);

/// Full production-side evaluation at one observation: nests, kernel and
/// planned output, plus level marginal products of the variable inputs.
struct ProductionEval {
    NormalizedInputs in;
    double B_norm = 0, L_norm = 0;
    double kernel = 0;
    double Q = 0;        // planned output, levels
    double MP_M = 0, MP_H = 0, MP_C = 0, MP_D = 0;  // dQ/dX in levels
};
ProductionEval evaluate_production(const PanelObservation& obs, const ProductionParams& params,
                                   double omega_L, double omega_H);

namespace detail {
/// Guard shared by the evaluators: quantities at or below 1e-300 are data
/// errors, not values to clamp.
void require_positive(double value, const char* name);
}  // namespace detail

}  // namespace cesmark
