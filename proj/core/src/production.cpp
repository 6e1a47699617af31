#include "cesmark/production.hpp"

#include <cmath>
#include <string>

namespace cesmark {

namespace detail {

void require_positive(double value, const char* name) {
    if (!(value > 1e-300) || !std::isfinite(value))
        throw DomainError(std::string(name) + " must be strictly positive, got " +
                          std::to_string(value));
}

}  // namespace detail

void GeometricMeans::validate() const {
    detail::require_positive(Q, "mean Q");
    detail::require_positive(K, "mean K");
    detail::require_positive(M, "mean M");
    detail::require_positive(H, "mean H");
    detail::require_positive(C, "mean C");
    detail::require_positive(D, "mean D");
    detail::require_positive(W_H, "mean W_H");
    detail::require_positive(W_C, "mean W_C");
    detail::require_positive(W_D, "mean W_D");
    detail::require_positive(P_M, "mean P_M");
    const double blue = W_C * C + W_D * D;
    const double labor = W_H * H + W_B * B;
    if (std::abs(W_B * B - blue) > 1e-9 * blue)
        throw ConfigError("means violate W_B*B = W_C*C + W_D*D");
    if (std::abs(W_L * L - labor) > 1e-9 * labor)
        throw ConfigError("means violate W_L*L = W_H*H + W_B*B");
}

void ProductionParams::validate() const {
    if (sigma_O == 0.0 || sigma_M == 0.0 || sigma_I == 0.0)
        throw ParameterError("CES exponents must be nonzero");
    if (sigma_O > 1.0 || sigma_M > 1.0 || sigma_I > 1.0)
        throw ParameterError("CES exponents must not exceed 1");
    if (!(tau > 0.0)) throw ParameterError("tau must be strictly positive");
}

void ProductivityParams::validate() const {
    if (sigma_H < 0.0) throw ParameterError("sigma_H must be nonnegative");
    if (sigma_L < 0.0) throw ParameterError("sigma_L must be nonnegative");
}

GeometricMeans geometric_means(const Panel& panel) {
    if (panel.empty()) throw DomainError("cannot take geometric means of an empty panel");
    double lq = 0, lk = 0, lm = 0, lh = 0, lc = 0, ld = 0;
    double lwh = 0, lwc = 0, lwd = 0, lpm = 0;
    for (const auto& o : panel) {
        detail::require_positive(o.Q_obs, "Q_obs");
        detail::require_positive(o.K, "K");
        detail::require_positive(o.M, "M");
        detail::require_positive(o.H, "H");
        detail::require_positive(o.C, "C");
        detail::require_positive(o.D, "D");
        detail::require_positive(o.W_H, "W_H");
        detail::require_positive(o.W_C, "W_C");
        detail::require_positive(o.W_D, "W_D");
        detail::require_positive(o.P_M, "P_M");
        lq += std::log(o.Q_obs);
        lk += std::log(o.K);
        lm += std::log(o.M);
        lh += std::log(o.H);
        lc += std::log(o.C);
        ld += std::log(o.D);
        lwh += std::log(o.W_H);
        lwc += std::log(o.W_C);
        lwd += std::log(o.W_D);
        lpm += std::log(o.P_M);
    }
    const double n = static_cast<double>(panel.size());
    GeometricMeans g;
    g.Q = std::exp(lq / n);
    g.K = std::exp(lk / n);
    g.M = std::exp(lm / n);
    g.H = std::exp(lh / n);
    g.C = std::exp(lc / n);
    g.D = std::exp(ld / n);
    g.W_H = std::exp(lwh / n);
    g.W_C = std::exp(lwc / n);
    g.W_D = std::exp(lwd / n);
    g.P_M = std::exp(lpm / n);
    // Latent aggregates: baseline level 1, price index carries the expenditure.
    g.B = 1.0;
    g.W_B = g.W_C * g.C + g.W_D * g.D;
    g.L = 1.0;
    g.W_L = g.W_H * g.H + g.W_B * g.B;
    return g;
}

WorkerShares worker_shares_from_means(const GeometricMeans& means) {
    const double exp_C = means.W_C * means.C;
    const double exp_D = means.W_D * means.D;
    const double exp_H = means.W_H * means.H;
    const double exp_B = means.W_B * means.B;
    if (exp_C < 0 || exp_D < 0 || exp_H < 0 || exp_B < 0)
        throw DomainError("negative baseline expenditure");
    if (exp_C + exp_D <= 0) throw DomainError("zero blue-collar baseline expenditure");
    if (exp_H + exp_B <= 0) throw DomainError("zero total labor baseline expenditure");
    WorkerShares w;
    w.alpha_C = exp_C / (exp_C + exp_D);
    w.alpha_D = 1.0 - w.alpha_C;
    w.alpha_H = exp_H / (exp_H + exp_B);
    w.alpha_B = 1.0 - w.alpha_H;
    return w;
}

InputShares shares_from_tau(double tau, const GeometricMeans& means) {
    if (!(tau > 0.0)) throw ParameterError("tau must be strictly positive");
    const double pm = means.materials_expenditure();
    const double wl = means.W_L * means.L;
    detail::require_positive(pm, "baseline materials expenditure");
    detail::require_positive(wl, "baseline labor expenditure");
    const double denom = pm + wl + tau * pm;
    InputShares s;
    s.alpha_M = pm / denom;
    s.alpha_L = wl / denom;
    s.alpha_K = tau * pm / denom;
    return s;
}

double blue_collar_nest(double C_norm, double D_norm, double alpha_C, double alpha_D,
                        double sigma_I) {
    if (sigma_I == 0.0) throw ParameterError("sigma_I must be nonzero");
    detail::require_positive(C_norm, "C_norm");
    detail::require_positive(D_norm, "D_norm");
    return std::pow(alpha_C * std::pow(C_norm, sigma_I) + alpha_D * std::pow(D_norm, sigma_I),
                    1.0 / sigma_I);
}

double blue_collar_nest(double C_norm, double D_norm, const ProductionParams& params) {
    return blue_collar_nest(C_norm, D_norm, params.worker.alpha_C, params.worker.alpha_D,
                            params.sigma_I);
}

double labor_nest(double H_norm, double B_norm, double alpha_H, double alpha_B, double sigma_M) {
    if (sigma_M == 0.0) throw ParameterError("sigma_M must be nonzero");
    detail::require_positive(H_norm, "H_norm");
    detail::require_positive(B_norm, "B_norm");
    return std::pow(alpha_H * std::pow(H_norm, sigma_M) + alpha_B * std::pow(B_norm, sigma_M),
                    1.0 / sigma_M);
}

double labor_nest(double H_norm, double B_norm, const ProductionParams& params) {
    return labor_nest(H_norm, B_norm, params.worker.alpha_H, params.worker.alpha_B,
                      params.sigma_M);
}

double ces_kernel(double K_norm, double M_norm, double L_norm, double omega_L,
                  const ProductionParams& params) {
    detail::require_positive(K_norm, "K_norm");
    detail::require_positive(M_norm, "M_norm");
    detail::require_positive(L_norm, "L_norm");
    const double s = params.sigma_O;
    return params.input.alpha_K * std::pow(K_norm, s) +
           params.input.alpha_M * std::pow(M_norm, s) +
           params.input.alpha_L * std::pow(std::exp(omega_L) * L_norm, s);
}

double planned_output(double K_norm, double M_norm, double L_norm, double omega_L,
                      double omega_H, const ProductionParams& params) {
    if (params.sigma_O == 0.0) throw ParameterError("sigma_O must be nonzero");
    const double kernel = ces_kernel(K_norm, M_norm, L_norm, omega_L, params);
    return params.means.Q * std::pow(kernel, 1.0 / params.sigma_O) * std::exp(omega_H);
}

NormalizedInputs normalize(const PanelObservation& obs, const GeometricMeans& means) {
    detail::require_positive(obs.K, "K");
    detail::require_positive(obs.M, "M");
    detail::require_positive(obs.H, "H");
    detail::require_positive(obs.C, "C");
    detail::require_positive(obs.D, "D");
    NormalizedInputs n;
    n.K = obs.K / means.K;
    n.M = obs.M / means.M;
    n.H = obs.H / means.H;
    n.C = obs.C / means.C;
    n.D = obs.D / means.D;
    return n;
}

namespace {

double checked_term(double value, const char* name) {
    if (!std::isfinite(value))
        throw DomainError(std::string("non-finite term in omega_L characterization: ") + name);
    return value;
}

}  // namespace

double omega_L_characterization(const PanelObservation& obs, const CesSigmas& sigmas,
                                const WorkerShares& worker, const GeometricMeans& means) {
    if (sigmas.O == 0.0) throw ParameterError("sigma_O must be nonzero");
    detail::require_positive(obs.W_H, "W_H");
    detail::require_positive(obs.P_M, "P_M");
    const NormalizedInputs in = normalize(obs, means);

    const double inv_sO = 1.0 / sigmas.O;
    const double t_share = checked_term(-inv_sO * std::log(worker.alpha_H), "log alpha_H");
    const double t_exp_ratio = checked_term(
        inv_sO * std::log((obs.W_H * obs.H) / (obs.P_M * obs.M)), "log W_H H / P_M M");
    const double t_base_ratio = checked_term(
        inv_sO * std::log(means.materials_expenditure() / (means.W_L * means.L)),
        "log baseline PmM / WlL");

    const double B_norm = blue_collar_nest(in.C, in.D, worker.alpha_C, worker.alpha_D, sigmas.I);
    const double L_norm = labor_nest(in.H, B_norm, worker.alpha_H, worker.alpha_B, sigmas.M);
    const double t_nest =
        checked_term((sigmas.M * inv_sO - 1.0) * std::log(L_norm), "log labor nest");

    const double t_m = checked_term(std::log(in.M), "log M_norm");
    const double t_h = checked_term(-(sigmas.M * inv_sO) * std::log(in.H), "log H_norm");

    return t_share + t_exp_ratio + t_base_ratio + t_nest + t_m + t_h;
}

double log_f_tau(const PanelObservation& obs, double tau, const CesSigmas& sigmas,
                 double omega_L_hat, double L_hat_norm, const GeometricMeans& means) {
    if (!(tau > 0.0)) throw ParameterError("tau must be strictly positive");
    if (sigmas.O == 0.0) throw ParameterError("sigma_O must be nonzero");
    const double pm = means.materials_expenditure();
    const double wl = means.W_L * means.L;
    const double K_norm = obs.K / means.K;
    const double M_norm = obs.M / means.M;
    detail::require_positive(K_norm, "K_norm");
    detail::require_positive(M_norm, "M_norm");
    detail::require_positive(L_hat_norm, "L_hat_norm");

    const double inv_sO = 1.0 / sigmas.O;
    const double prefactor = inv_sO * std::log(pm / (pm + wl + tau * pm));
    const double kernel = tau * std::pow(K_norm, sigmas.O) + std::pow(M_norm, sigmas.O) +
                          (wl / pm) * std::pow(std::exp(omega_L_hat) * L_hat_norm, sigmas.O);
    const double body = inv_sO * std::log(kernel);
    const double out = prefactor + body;
    if (!std::isfinite(out)) throw DomainError("non-finite log f_jt(tau)");
    return out;
}

double productivity_step(double prev_omega, const ProductivityParams& params,
                         ProductivityKind which, double ida, double imp_lag, double xi,
                         int year) {
    const MarkovProcess& p = which == ProductivityKind::Hicks ? params.hicks : params.labor;
    return p.step(prev_omega, ida, imp_lag, xi, year);
}

ProductionEval evaluate_production(const PanelObservation& obs, const ProductionParams& params,
                                   double omega_L, double omega_H) {
    ProductionEval ev;
    ev.in = normalize(obs, params.means);
    ev.B_norm = blue_collar_nest(ev.in.C, ev.in.D, params);
    ev.L_norm = labor_nest(ev.in.H, ev.B_norm, params);
    ev.kernel = ces_kernel(ev.in.K, ev.in.M, ev.L_norm, omega_L, params);
    ev.Q = params.means.Q * std::pow(ev.kernel, 1.0 / params.sigma_O) * std::exp(omega_H);

    // Level marginal products via the share decomposition of the nests.
    const double sO = params.sigma_O, sM = params.sigma_M, sI = params.sigma_I;
    const double labor_term =
        params.input.alpha_L * std::pow(std::exp(omega_L) * ev.L_norm, sO) / ev.kernel;
    const double mat_term = params.input.alpha_M * std::pow(ev.in.M, sO) / ev.kernel;
    const double white_term = params.worker.alpha_H * std::pow(ev.in.H, sM) / std::pow(ev.L_norm, sM);
    const double blue_term = params.worker.alpha_B * std::pow(ev.B_norm, sM) / std::pow(ev.L_norm, sM);
    const double temp_term = params.worker.alpha_C * std::pow(ev.in.C, sI) / std::pow(ev.B_norm, sI);
    const double perm_term = params.worker.alpha_D * std::pow(ev.in.D, sI) / std::pow(ev.B_norm, sI);

    ev.MP_M = ev.Q / obs.M * mat_term;
    ev.MP_H = ev.Q / obs.H * labor_term * white_term;
    ev.MP_C = ev.Q / obs.C * labor_term * blue_term * temp_term;
    ev.MP_D = ev.Q / obs.D * labor_term * blue_term * perm_term;
    return ev;
}

}  // namespace cesmark
