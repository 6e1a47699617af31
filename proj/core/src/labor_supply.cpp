#include "cesmark/labor_supply.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <set>

#include "cesmark/markets.hpp"
#include "cesmark/steps.hpp"

namespace cesmark {

LaborSupplyEstimate estimate_labor_supply(const LaborSupplyData& data) {
    const int N = static_cast<int>(data.size());
    if (N < 8) throw EstimationError("too few observations for labor supply estimation");

    Eigen::VectorXd y(N);
    Eigen::MatrixXd Xe(N, 3), Xx(N, 2);
    for (int i = 0; i < N; ++i) {
        y[i] = data.log_odds[i];
        Xe(i, 0) = data.wage[i];
        Xe(i, 1) = data.wage[i] * static_cast<double>(data.interval[i]);
        Xe(i, 2) = data.log_cond_share[i];
        Xx(i, 0) = data.trend[i];
        Xx(i, 1) = 1.0;
    }
    const std::vector<std::string> endog = {"wage", "wage_x_interval", "log_cond_share"};
    const std::vector<std::string> exog = {"trend", "const"};

    LaborSupplyEstimate out;
    out.iv = tsls(y, Xe, Xx, data.instruments, data.cluster_ids, endog, exog);
    Eigen::MatrixXd Xall(N, 5);
    Xall << Xe, Xx;
    std::vector<std::string> all = endog;
    all.insert(all.end(), exog.begin(), exog.end());
    out.ols = ols(y, Xall, data.cluster_ids, all);

    out.params.gamma = out.iv.coef_of("wage");
    out.params.gamma_t = out.iv.coef_of("wage_x_interval");
    out.params.eta = out.iv.coef_of("log_cond_share");
    out.params.trend = out.iv.coef_of("trend");
    out.params.intercept = out.iv.coef_of("const");
    out.eta_in_range = out.params.eta > 0.0 && out.params.eta < 1.0;
    return out;
}

double inverse_supply_elasticity_term(double W, double share, double cond_share,
                                      const LaborSupplyParams& params, int interval,
                                      bool allow_eta_out_of_range) {
    if (!allow_eta_out_of_range && !(params.eta > 0.0 && params.eta < 1.0))
        throw ParameterError("eta outside (0,1); override required for elasticity terms");
    const double gamma_eff = params.gamma_at(interval);
    const double denom =
        gamma_eff * W * (1.0 - params.eta * cond_share - (1.0 - params.eta) * share);
    if (!(denom > 0)) return std::numeric_limits<double>::quiet_NaN();
    return 1.0 + (1.0 - params.eta) / denom;
}

PanelShares compute_panel_shares(const Panel& panel) {
    PanelShares out;
    const int n = static_cast<int>(panel.size());
    out.s_C.assign(n, 0);
    out.scond_C.assign(n, 0);
    out.s0_C.assign(n, 0);
    out.s_D.assign(n, 0);
    out.scond_D.assign(n, 0);
    out.s0_D.assign(n, 0);

    std::map<std::pair<std::string, int>, std::pair<double, double>> inside;  // sum C, sum D
    for (const auto& o : panel) {
        auto& [c, d] = inside[{o.market_id, o.year}];
        c += o.C;
        d += o.D;
    }
    for (int i = 0; i < n; ++i) {
        const auto& o = panel[i];
        const auto& [c_sum, d_sum] = inside.at({o.market_id, o.year});
        const double denom_C = c_sum + o.outside_mandays_C;
        const double denom_D = d_sum + o.outside_mandays_D;
        if (!(denom_C > 0) || !(denom_D > 0))
            throw DomainError("nonpositive share denominator in market " + o.market_id);
        out.s_C[i] = o.C / denom_C;
        out.scond_C[i] = o.C / c_sum;
        out.s0_C[i] = o.outside_mandays_C / denom_C;
        out.s_D[i] = o.D / denom_D;
        out.scond_D[i] = o.D / d_sum;
        out.s0_D[i] = o.outside_mandays_D / denom_D;
    }
    return out;
}

LaborSupplyData panel_labor_supply_data(const Panel& panel, WorkerType type,
                                        const std::vector<int>& interval_per_row) {
    if (interval_per_row.size() != panel.size())
        throw ConfigError("interval series does not match the panel");
    const PanelShares sh = compute_panel_shares(panel);
    const int n = static_cast<int>(panel.size());

    // Market-year aggregates for rival shifters and establishment counts.
    std::map<std::pair<std::string, int>, std::pair<double, int>> agg_k;  // sum log K, count
    std::map<std::pair<std::string, int>, double> agg_h;
    for (const auto& o : panel) {
        auto& [sk, cnt] = agg_k[{o.market_id, o.year}];
        sk += std::log(o.K);
        ++cnt;
        agg_h[{o.market_id, o.year}] += std::log(o.H);
    }

    LaborSupplyData d;
    const int n_inst = 9;
    d.instruments.resize(n, n_inst);
    d.instrument_names = {"log_K",        "log_M",   "log_H",       "log_P",
                          "rival_log_K",  "rival_log_H", "n_establishments",
                          "log_K_x_interval", "n_est_x_interval"};
    for (int i = 0; i < n; ++i) {
        const auto& o = panel[i];
        const bool temp = type == WorkerType::Temporary;
        const double s = temp ? sh.s_C[i] : sh.s_D[i];
        const double s0 = temp ? sh.s0_C[i] : sh.s0_D[i];
        const double scond = temp ? sh.scond_C[i] : sh.scond_D[i];
        d.log_odds.push_back(std::log(s / s0));
        d.wage.push_back(temp ? o.W_C : o.W_D);
        d.share.push_back(s);
        d.cond_share.push_back(scond);
        d.log_cond_share.push_back(std::log(scond));
        d.trend.push_back(static_cast<double>(o.year));
        d.interval.push_back(interval_per_row[i]);
        d.cluster_ids.push_back(o.plant_id);

        const auto& [sk, cnt] = agg_k.at({o.market_id, o.year});
        const double sh_all = agg_h.at({o.market_id, o.year});
        const double lk = std::log(o.K);
        const double lh = std::log(o.H);
        const double rival_k = cnt > 1 ? (sk - lk) / (cnt - 1) : 0.0;
        const double rival_h = cnt > 1 ? (sh_all - lh) / (cnt - 1) : 0.0;
        const double a = static_cast<double>(interval_per_row[i]);
        d.instruments(i, 0) = lk;
        d.instruments(i, 1) = std::log(o.M);
        d.instruments(i, 2) = lh;
        d.instruments(i, 3) = std::log(o.P);
        d.instruments(i, 4) = rival_k;
        d.instruments(i, 5) = rival_h;
        d.instruments(i, 6) = static_cast<double>(cnt);
        d.instruments(i, 7) = lk * a;
        d.instruments(i, 8) = static_cast<double>(cnt) * a;
    }
    return d;
}

ThetaInputs build_theta_inputs(const Panel& panel,
                               const std::vector<MarketPowerRecord>& records,
                               const LaborSupplyParams& supply_C,
                               const LaborSupplyParams& supply_D, const GeometricMeans& means,
                               double sigma_I, const std::vector<int>& interval_per_row) {
    if (records.size() != panel.size() || interval_per_row.size() != panel.size())
        throw ConfigError("theta inputs: series do not match the panel");
    const PanelShares sh = compute_panel_shares(panel);
    const PanelIndex idx = PanelIndex::build(panel);

    ThetaInputs in;
    for (int row : idx.usable) {
        const auto& obs = panel[static_cast<std::size_t>(row)];
        const auto& rec = records[static_cast<std::size_t>(row)];
        const int lag = idx.lag_of[row];
        if (!rec.mu_valid || !std::isfinite(rec.pi_hat)) continue;
        if (!(obs.strike_intensity > 0)) continue;

        const int a = interval_per_row[row];
        const double nu_C_hat = inverse_supply_elasticity_term(obs.W_C, sh.s_C[row],
                                                               sh.scond_C[row], supply_C, a);
        const double nu_D_nb = inverse_supply_elasticity_term(obs.W_D, sh.s_D[row],
                                                              sh.scond_D[row], supply_D, a);
        if (!std::isfinite(nu_C_hat) || !std::isfinite(nu_D_nb)) continue;
        const double invel_D = nu_D_nb - 1.0;
        if (!(invel_D > 0)) continue;

        const double F_C = rec.nu_tilde_C - nu_C_hat;
        const double wage_ratio = (obs.W_C / means.W_C) / (obs.W_D / means.W_D);
        const double dc_ratio =
            std::pow((obs.D / means.D) / (obs.C / means.C), sigma_I - 1.0);
        const double lhs =
            (rec.nu_tilde_D - (invel_D + 1.0) - F_C * wage_ratio * dc_ratio) / invel_D;

        const auto& lag_obs = panel[static_cast<std::size_t>(lag)];
        const double lag_size =
            std::log(lag_obs.D / means.D + lag_obs.H / means.H);

        in.lhs.push_back(lhs);
        in.surplus.push_back(rec.pi_hat / (obs.D * obs.W_D));
        in.ida.push_back(obs.IDA);
        in.year.push_back(obs.year);
        in.z_strike.push_back(std::log(obs.strike_intensity) * lag_size);
        in.p_m.push_back(obs.P_M);
        in.cluster_ids.push_back(obs.plant_id);
        in.panel_rows.push_back(row);
    }
    return in;
}

ThetaEstimate theta_from_coefficient(double coef, double se_coef) {
    ThetaEstimate out;
    out.coef = coef;
    out.se_coef = se_coef;
    out.nonnegative_coef = coef >= 0;
    out.theta = 1.0 / (1.0 - coef);
    const double gprime = 1.0 / (out.theta * out.theta);
    out.se_theta = se_coef / std::abs(gprime);
    return out;
}

ThetaEstimate estimate_theta(const ThetaInputs& in) {
    const int N = static_cast<int>(in.lhs.size());
    if (N < 12) throw EstimationError("too few usable observations for theta estimation");

    std::set<int> years(in.year.begin(), in.year.end());
    const int ny = static_cast<int>(years.size());
    std::map<int, int> year_col;
    int c = 0;
    for (int y : years) year_col[y] = c++;

    // Constant plus IDA plus year dummies (first year absorbed by the constant).
    const int kx = 2 + std::max(0, ny - 1);
    Eigen::VectorXd y(N);
    Eigen::MatrixXd Xe(N, 1), Xx = Eigen::MatrixXd::Zero(N, kx), Z(N, 2);
    std::vector<std::string> exog_names = {"const", "IDA"};
    for (int k = 1; k < ny; ++k) exog_names.push_back("year_dummy_" + std::to_string(k));
    for (int i = 0; i < N; ++i) {
        y[i] = in.lhs[i];
        Xe(i, 0) = in.surplus[i];
        Xx(i, 0) = 1.0;
        Xx(i, 1) = in.ida[i];
        const int col = year_col.at(in.year[i]);
        if (col > 0) Xx(i, 2 + col - 1) = 1.0;
        Z(i, 0) = in.z_strike[i];
        Z(i, 1) = in.p_m[i];
    }

    const IvResult iv = tsls(y, Xe, Xx, Z, in.cluster_ids, {"surplus_ratio"}, exog_names);
    Eigen::MatrixXd Xall(N, 1 + kx);
    Xall << Xe, Xx;
    std::vector<std::string> all = {"surplus_ratio"};
    all.insert(all.end(), exog_names.begin(), exog_names.end());
    const IvResult ols_fit = ols(y, Xall, in.cluster_ids, all);

    ThetaEstimate out = theta_from_coefficient(iv.coef_of("surplus_ratio"),
                                               iv.se_of("surplus_ratio"));
    out.iv = iv;
    out.ols = ols_fit;
    return out;
}

void augment_market_power(std::vector<MarketPowerRecord>& records, const Panel& panel,
                          const LaborSupplyParams& supply_C, const LaborSupplyParams& supply_D,
                          const std::vector<int>& interval_per_row,
                          std::optional<double> theta) {
    if (records.size() != panel.size() || interval_per_row.size() != panel.size())
        throw ConfigError("augment_market_power: series do not match the panel");
    const PanelShares sh = compute_panel_shares(panel);
    for (std::size_t i = 0; i < panel.size(); ++i) {
        const auto& obs = panel[i];
        auto& rec = records[i];
        const int a = interval_per_row[i];
        rec.nu_C = inverse_supply_elasticity_term(obs.W_C, sh.s_C[i], sh.scond_C[i], supply_C, a);
        rec.nu_D_NB =
            inverse_supply_elasticity_term(obs.W_D, sh.s_D[i], sh.scond_D[i], supply_D, a);
        rec.F_C = rec.nu_tilde_C - rec.nu_C;
        rec.markdown_C = markdown_percent(rec.nu_C);
        rec.markdown_D_NB = markdown_percent(rec.nu_D_NB);
        if (theta && rec.mu_valid && std::isfinite(rec.pi_hat) && obs.D * obs.W_D > 0) {
            const double invel_D = rec.nu_D_NB - 1.0;
            const double surplus = rec.pi_hat / (obs.D * obs.W_D);
            rec.nu_D_NN = 1.0 + invel_D * (1.0 + ((*theta - 1.0) / *theta) * surplus);
            rec.nu_D_NN_in_range = rec.nu_D_NN > 1.0 && rec.nu_D_NN < 1.0 + invel_D;
            rec.markdown_D_NN = markdown_percent(rec.nu_D_NN);
            rec.F_D = rec.nu_tilde_D - rec.nu_D_NN;
        } else {
            rec.nu_D_NN = std::numeric_limits<double>::quiet_NaN();
            rec.nu_D_NN_in_range = false;
            rec.markdown_D_NN = std::numeric_limits<double>::quiet_NaN();
            rec.F_D = rec.nu_tilde_D - rec.nu_D_NB;
        }
    }
}

}  // namespace cesmark
