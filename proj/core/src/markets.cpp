#include "cesmark/markets.hpp"

#include <cmath>
#include <limits>

namespace cesmark {

namespace {

struct KernelParts {
    double kernel = 0, Q_hat = 0;
    double B_norm = 0, L_norm = 0;
    NormalizedInputs in;
};

KernelParts kernel_parts(const PanelObservation& obs, const ProductionParams& params,
                         double omega_L, double omega_H) {
    KernelParts kp;
    kp.in = normalize(obs, params.means);
    kp.B_norm = blue_collar_nest(kp.in.C, kp.in.D, params);
    kp.L_norm = labor_nest(kp.in.H, kp.B_norm, params);
    kp.kernel = ces_kernel(kp.in.K, kp.in.M, kp.L_norm, omega_L, params);
    kp.Q_hat = params.means.Q * std::pow(kp.kernel, 1.0 / params.sigma_O) * std::exp(omega_H);
    return kp;
}

}  // namespace

double markup_from_materials(const PanelObservation& obs, const ProductionParams& params,
                             double omega_L_hat, double omega_H_hat) {
    detail::require_positive(obs.P, "P");
    detail::require_positive(obs.P_M, "P_M");
    const KernelParts kp = kernel_parts(obs, params, omega_L_hat, omega_H_hat);
    const double mat_term = params.input.alpha_M * std::pow(kp.in.M, params.sigma_O) / kp.kernel;
    return kp.Q_hat / obs.M * mat_term * (obs.P / obs.P_M);
}

double markup_from_labor(const PanelObservation& obs, const ProductionParams& params,
                         double omega_L_hat, double omega_H_hat) {
    detail::require_positive(obs.P, "P");
    detail::require_positive(obs.W_H, "W_H");
    const KernelParts kp = kernel_parts(obs, params, omega_L_hat, omega_H_hat);
    const double sO = params.sigma_O, sM = params.sigma_M;
    const double labor_term =
        params.input.alpha_L * std::pow(std::exp(omega_L_hat) * kp.L_norm, sO) / kp.kernel;
    const double white_term =
        params.worker.alpha_H * std::pow(kp.in.H, sM) / std::pow(kp.L_norm, sM);
    return kp.Q_hat / obs.H * labor_term * white_term * (obs.P / obs.W_H);
}

LaborFrictions labor_frictions(const PanelObservation& obs, const ProductionParams& params) {
    if (!(obs.W_C * obs.C > 0) || !(obs.W_D * obs.D > 0) || !(obs.W_H * obs.H > 0))
        throw DomainError("zero wage bill in labor_frictions");
    const NormalizedInputs in = normalize(obs, params.means);
    const double B_norm = blue_collar_nest(in.C, in.D, params);
    const double sM = params.sigma_M, sI = params.sigma_I;

    const double blue_over_white = params.worker.alpha_B * std::pow(B_norm, sM) /
                                   (params.worker.alpha_H * std::pow(in.H, sM));
    const double wh_bill = obs.W_H * obs.H;

    LaborFrictions f;
    f.nu_tilde_C = blue_over_white *
                   (params.worker.alpha_C * std::pow(in.C, sI) / std::pow(B_norm, sI)) *
                   (wh_bill / (obs.W_C * obs.C));
    f.nu_tilde_D = blue_over_white *
                   (params.worker.alpha_D * std::pow(in.D, sI) / std::pow(B_norm, sI)) *
                   (wh_bill / (obs.W_D * obs.D));
    return f;
}

double operating_profit(const PanelObservation& obs, double mu, double Q_hat) {
    return Q_hat * (obs.P - obs.P / mu);
}

double tfp(const PanelObservation& obs, double omega_H_hat, double omega_L_hat) {
    const double payroll = obs.W_H * obs.H + obs.W_C * obs.C + obs.W_D * obs.D;
    const double materials = obs.P_M * obs.M;
    const double total = payroll + materials;
    if (!(total > 0)) throw DomainError("zero total variable cost in tfp");
    return std::log((payroll / total) * std::exp(omega_L_hat) +
                    (materials / total) * std::exp(omega_H_hat));
}

double markdown_percent(double nu) { return 100.0 * (nu - 1.0) / nu; }

std::vector<MarketPowerRecord> market_power_step4(const Panel& panel,
                                                  const ProductionParams& params,
                                                  const std::vector<double>& omega_L_hat,
                                                  const std::vector<double>& omega_H_hat) {
    if (omega_L_hat.size() != panel.size() || omega_H_hat.size() != panel.size())
        throw ConfigError("productivity series do not match the panel");
    std::vector<MarketPowerRecord> out;
    out.reserve(panel.size());
    for (std::size_t i = 0; i < panel.size(); ++i) {
        const auto& obs = panel[i];
        MarketPowerRecord r;
        r.plant_id = obs.plant_id;
        r.year = obs.year;
        const KernelParts kp = kernel_parts(obs, params, omega_L_hat[i], omega_H_hat[i]);
        r.q_hat = kp.Q_hat;
        r.mu = markup_from_materials(obs, params, omega_L_hat[i], omega_H_hat[i]);
        r.mu_labor = markup_from_labor(obs, params, omega_L_hat[i], omega_H_hat[i]);
        r.mu_valid = r.mu > 0 && std::isfinite(r.mu);
        r.mc = r.mu_valid ? obs.P / r.mu : std::numeric_limits<double>::quiet_NaN();
        r.lerner = r.mu_valid ? 1.0 - 1.0 / r.mu : std::numeric_limits<double>::quiet_NaN();
        r.lerner_positive = r.mu_valid && r.lerner > 0;
        r.pi_hat = r.mu_valid ? operating_profit(obs, r.mu, kp.Q_hat)
                              : std::numeric_limits<double>::quiet_NaN();
        r.tfp = tfp(obs, omega_H_hat[i], omega_L_hat[i]);
        const LaborFrictions f = labor_frictions(obs, params);
        r.nu_tilde_C = f.nu_tilde_C;
        r.nu_tilde_D = f.nu_tilde_D;
        out.push_back(r);
    }
    return out;
}

}  // namespace cesmark
