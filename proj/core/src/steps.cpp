#include "cesmark/steps.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>

namespace cesmark {

PanelIndex PanelIndex::build(const Panel& panel) {
    PanelIndex idx;
    const int n = static_cast<int>(panel.size());
    idx.lag_of.assign(n, -1);
    std::map<std::pair<std::string, int>, int> row_of;
    for (int i = 0; i < n; ++i) {
        auto key = std::make_pair(panel[i].plant_id, panel[i].year);
        if (!row_of.emplace(key, i).second)
            throw ConfigError("duplicate (plant, year): " + panel[i].plant_id + ", " +
                              std::to_string(panel[i].year));
    }
    for (int i = 0; i < n; ++i) {
        auto it = row_of.find({panel[i].plant_id, panel[i].year - 1});
        if (it != row_of.end()) {
            idx.lag_of[i] = it->second;
            idx.usable.push_back(i);
        }
    }
    std::map<int, int> years;
    for (int i : idx.usable) years.emplace(panel[i].year, 0);
    int col = 0;
    for (auto& [year, column] : years) {
        column = col++;
        idx.years.push_back(year);
    }
    idx.year_column = years;
    return idx;
}

namespace {

double instrument_column(const PanelObservation& obs, const std::string& name) {
    auto it = obs.extra_instruments.find(name);
    if (it == obs.extra_instruments.end())
        throw ConfigError("missing instrument column " + name + " at plant " + obs.plant_id);
    return it->second;
}

// ---------------------------------------------------------------------------
// Step 1 workspace: per-row logs plus an omega(sigma) cache.

struct S1Work {
    const Panel* panel = nullptr;
    GeometricMeans means;
    WorkerShares worker;
    PanelIndex idx;
    StepOptions opts;

    std::vector<double> lC, lD, lH, lM;      // normalized logs per row
    std::vector<double> log_exp_ratio;        // log(W_H H / (P_M M))
    double log_base_ratio = 0;                // log(PmM / WlL)

    std::vector<double> cached_nl;
    std::vector<double> omega;                // per row at cached sigmas
    std::vector<double> log_labor_nest;       // per row at cached sigmas

    CesSigmas sigmas_from_nl(const std::vector<double>& nl) const {
        CesSigmas s;
        std::size_t k = 0;
        s.O = opts.fix_sigma_O ? *opts.fix_sigma_O : nl[k++];
        s.M = opts.fix_sigma_M ? *opts.fix_sigma_M : nl[k++];
        s.I = opts.fix_sigma_I ? *opts.fix_sigma_I : nl[k++];
        return s;
    }

    void ensure(const std::vector<double>& nl) {
        if (nl == cached_nl && !omega.empty()) return;
        const CesSigmas s = sigmas_from_nl(nl);
        const int n = static_cast<int>(panel->size());
        omega.resize(n);
        log_labor_nest.resize(n);
        const double aH = worker.alpha_H, aB = worker.alpha_B;
        const double aC = worker.alpha_C, aD = worker.alpha_D;
        for (int i = 0; i < n; ++i) {
            const double B = std::pow(aC * std::exp(s.I * lC[i]) + aD * std::exp(s.I * lD[i]),
                                      1.0 / s.I);
            const double lL =
                std::log(aH * std::exp(s.M * lH[i]) + aB * std::pow(B, s.M)) / s.M;
            log_labor_nest[i] = lL;
            omega[i] = -std::log(aH) / s.O + (log_exp_ratio[i] + log_base_ratio) / s.O +
                       (s.M / s.O - 1.0) * lL + lM[i] - (s.M / s.O) * lH[i];
        }
        cached_nl = nl;
    }
};

std::shared_ptr<S1Work> make_s1_work(const Panel& panel, const GeometricMeans& means,
                                     const StepOptions& opts) {
    auto w = std::make_shared<S1Work>();
    w->panel = &panel;
    w->means = means;
    w->worker = worker_shares_from_means(means);
    w->idx = PanelIndex::build(panel);
    w->opts = opts;
    const int n = static_cast<int>(panel.size());
    w->lC.resize(n);
    w->lD.resize(n);
    w->lH.resize(n);
    w->lM.resize(n);
    w->log_exp_ratio.resize(n);
    for (int i = 0; i < n; ++i) {
        const auto& o = panel[i];
        w->lC[i] = std::log(o.C / means.C);
        w->lD[i] = std::log(o.D / means.D);
        w->lH[i] = std::log(o.H / means.H);
        w->lM[i] = std::log(o.M / means.M);
        w->log_exp_ratio[i] = std::log((o.W_H * o.H) / (o.P_M * o.M));
    }
    w->log_base_ratio = std::log(means.materials_expenditure() / (means.W_L * means.L));
    return w;
}

int step1_n_nonlinear(const StepOptions& o) {
    return (o.fix_sigma_O ? 0 : 1) + (o.fix_sigma_M ? 0 : 1) + (o.fix_sigma_I ? 0 : 1);
}

}  // namespace

MomentSystem build_step1_system(const Panel& panel, const GeometricMeans& means,
                                const StepOptions& opts) {
    auto w = make_s1_work(panel, means, opts);
    const int n_years = static_cast<int>(w->idx.years.size());
    const int nz_extra = static_cast<int>(opts.extra_instrument_columns.size());
    const int n_lagged = opts.use_lagged_employment_instruments ? 3 : 0;
    const int n_strike = opts.use_strike_instrument ? 1 : 0;

    MomentSystem sys;
    sys.n_obs = static_cast<int>(w->idx.usable.size());
    sys.n_nonlinear = step1_n_nonlinear(opts);
    sys.n_linear = 3 + n_years;  // rho_L, beta_L1, beta_L2, iota_t
    sys.n_instruments = n_years + nz_extra + n_lagged + n_strike + 3;

    if (!opts.fix_sigma_O) {
        sys.param_names.push_back("sigma_O");
        sys.nonlinear_bounds.push_back({opts.sigma_lo, opts.sigma_hi});
    }
    if (!opts.fix_sigma_M) {
        sys.param_names.push_back("sigma_M");
        sys.nonlinear_bounds.push_back({opts.sigma_lo, opts.sigma_hi});
    }
    if (!opts.fix_sigma_I) {
        sys.param_names.push_back("sigma_I");
        sys.nonlinear_bounds.push_back({opts.sigma_lo, opts.sigma_hi});
    }
    sys.param_names.push_back("rho_L");
    sys.param_names.push_back("beta_L1");
    sys.param_names.push_back("beta_L2");
    for (int y : w->idx.years) sys.param_names.push_back("iota_L_" + std::to_string(y));

    for (int y : w->idx.years) sys.instrument_names.push_back("year_" + std::to_string(y));
    for (const auto& c : opts.extra_instrument_columns) sys.instrument_names.push_back(c);
    if (opts.use_lagged_employment_instruments) {
        sys.instrument_names.push_back("lag_log_C");
        sys.instrument_names.push_back("lag_log_D");
        sys.instrument_names.push_back("lag_log_H");
    }
    if (opts.use_strike_instrument) sys.instrument_names.push_back("strike_intensity");
    sys.instrument_names.push_back("lag_omega_L");
    sys.instrument_names.push_back("IDA");
    sys.instrument_names.push_back("Imp_lag");

    sys.base = [w](const std::vector<double>& nl, int k) {
        w->ensure(nl);
        return w->omega[w->idx.usable[k]];
    };
    const int ny = n_years;
    sys.regressors = [w, ny](const std::vector<double>& nl, int k, Eigen::VectorXd& x) {
        w->ensure(nl);
        const int row = w->idx.usable[k];
        const int lag = w->idx.lag_of[row];
        const auto& obs = (*w->panel)[row];
        x.setZero(3 + ny);
        x[0] = w->omega[lag];
        x[1] = obs.IDA;
        x[2] = obs.Imp_lag;
        x[3 + w->idx.year_column.at(obs.year)] = 1.0;
    };
    const auto zcols = opts.extra_instrument_columns;
    const bool use_lag_emp = opts.use_lagged_employment_instruments;
    const bool use_strike = opts.use_strike_instrument;
    sys.instruments = [w, ny, zcols, use_lag_emp, use_strike](const std::vector<double>& nl,
                                                              int k, Eigen::VectorXd& z) {
        w->ensure(nl);
        const int row = w->idx.usable[k];
        const int lag = w->idx.lag_of[row];
        const auto& obs = (*w->panel)[row];
        z.setZero(static_cast<int>(z.size()));
        int c = 0;
        z[w->idx.year_column.at(obs.year)] = 1.0;
        c = ny;
        for (const auto& name : zcols) z[c++] = instrument_column(obs, name);
        if (use_lag_emp) {
            z[c++] = w->lC[lag];
            z[c++] = w->lD[lag];
            z[c++] = w->lH[lag];
        }
        if (use_strike) z[c++] = obs.strike_intensity;
        z[c++] = w->omega[lag];
        z[c++] = obs.IDA;
        z[c++] = obs.Imp_lag;
    };
    return sys;
}

std::vector<double> step1_param_vector(const MomentSystem& sys, const CesSigmas& sigmas,
                                       const MarkovProcess& labor) {
    std::vector<double> p;
    for (const auto& name : sys.param_names) {
        if (name == "sigma_O")
            p.push_back(sigmas.O);
        else if (name == "sigma_M")
            p.push_back(sigmas.M);
        else if (name == "sigma_I")
            p.push_back(sigmas.I);
        else if (name == "rho_L")
            p.push_back(labor.rho);
        else if (name == "beta_L1")
            p.push_back(labor.beta_ida);
        else if (name == "beta_L2")
            p.push_back(labor.beta_imp);
        else if (name.rfind("iota_L_", 0) == 0)
            p.push_back(labor.year_effect(std::stoi(name.substr(7))));
        else
            throw ConfigError("unexpected step-1 parameter " + name);
    }
    return p;
}

Step1Result step1_estimate(const Panel& panel, const GeometricMeans& means,
                           const StepOptions& opts) {
    MomentSystem sys = build_step1_system(panel, means, opts);
    GmmOptions gopts;
    gopts.optimizer = opts.optimizer;
    gopts.compute_rank = opts.compute_rank;
    GmmResult gmm = gmm_estimate(sys, opts.weighting, gopts);

    Step1Result out;
    out.gmm = gmm;
    out.sigmas.O = opts.fix_sigma_O ? *opts.fix_sigma_O : gmm.estimate("sigma_O");
    out.sigmas.M = opts.fix_sigma_M ? *opts.fix_sigma_M : gmm.estimate("sigma_M");
    out.sigmas.I = opts.fix_sigma_I ? *opts.fix_sigma_I : gmm.estimate("sigma_I");
    out.rho_L = gmm.estimate("rho_L");
    out.beta_L1 = gmm.estimate("beta_L1");
    out.beta_L2 = gmm.estimate("beta_L2");

    const PanelIndex idx = PanelIndex::build(panel);
    for (int y : idx.years) out.iota_L[y] = gmm.estimate("iota_L_" + std::to_string(y));

    const WorkerShares worker = worker_shares_from_means(means);
    out.omega_L_hat.resize(panel.size());
    for (std::size_t i = 0; i < panel.size(); ++i)
        out.omega_L_hat[i] = omega_L_characterization(panel[i], out.sigmas, worker, means);

    out.xi_L_hat.assign(panel.size(), std::numeric_limits<double>::quiet_NaN());
    for (int row : idx.usable) {
        const int lag = idx.lag_of[row];
        out.xi_L_hat[row] = out.omega_L_hat[row] - out.iota_L.at(panel[row].year) -
                            out.rho_L * out.omega_L_hat[lag] - out.beta_L1 * panel[row].IDA -
                            out.beta_L2 * panel[row].Imp_lag;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Step 2

namespace {

struct S2Work {
    const Panel* panel = nullptr;
    PanelIndex idx;
    double inv_sigma_O = 0;
    double pm = 0, wl = 0;  // baseline expenditures
    std::vector<double> a;           // K_norm^sigma_O per row
    std::vector<double> b;           // M_norm^sigma_O + (wl/pm)(e^wL Lhat)^sigma_O per row
    std::vector<double> log_q_norm;  // log(Q_obs / Qbar) per row
    std::vector<double> lag_log_K;   // instrument per row
    std::vector<double> omega_L_hat;

    double log_f(double tau, int row) const {
        return inv_sigma_O *
               (std::log(pm / (pm + wl + tau * pm)) + std::log(tau * a[row] + b[row]));
    }
};

std::shared_ptr<S2Work> make_s2_work(const Panel& panel, const Step1Result& step1,
                                     const GeometricMeans& means) {
    auto w = std::make_shared<S2Work>();
    w->panel = &panel;
    w->idx = PanelIndex::build(panel);
    w->inv_sigma_O = 1.0 / step1.sigmas.O;
    w->pm = means.materials_expenditure();
    w->wl = means.W_L * means.L;
    w->omega_L_hat = step1.omega_L_hat;
    const WorkerShares worker = worker_shares_from_means(means);
    const int n = static_cast<int>(panel.size());
    w->a.resize(n);
    w->b.resize(n);
    w->log_q_norm.resize(n);
    w->lag_log_K.resize(n);
    for (int i = 0; i < n; ++i) {
        const auto& o = panel[i];
        const double Kn = o.K / means.K, Mn = o.M / means.M;
        const double Bn = blue_collar_nest(o.C / means.C, o.D / means.D, worker.alpha_C,
                                           worker.alpha_D, step1.sigmas.I);
        const double Ln = labor_nest(o.H / means.H, Bn, worker.alpha_H, worker.alpha_B,
                                     step1.sigmas.M);
        w->a[i] = std::pow(Kn, step1.sigmas.O);
        w->b[i] = std::pow(Mn, step1.sigmas.O) +
                  (w->wl / w->pm) *
                      std::pow(std::exp(step1.omega_L_hat[i]) * Ln, step1.sigmas.O);
        w->log_q_norm[i] = std::log(o.Q_obs / means.Q);
        w->lag_log_K[i] = std::log(Kn);
    }
    return w;
}

}  // namespace

MomentSystem build_step2_system(const Panel& panel, const Step1Result& step1,
                                const GeometricMeans& means, const StepOptions& opts) {
    auto w = make_s2_work(panel, step1, means);
    const int n_years = static_cast<int>(w->idx.years.size());

    MomentSystem sys;
    sys.n_obs = static_cast<int>(w->idx.usable.size());
    sys.n_nonlinear = 1;
    sys.n_linear = 3 + n_years;  // rho_H, beta_H1, beta_H2, iota_t
    sys.n_instruments = n_years + 4;
    sys.nonlinear_bounds.push_back({opts.tau_lo, opts.tau_hi});
    sys.param_names = {"tau", "rho_H", "beta_H1", "beta_H2"};
    for (int y : w->idx.years) sys.param_names.push_back("iota_H_" + std::to_string(y));
    for (int y : w->idx.years) sys.instrument_names.push_back("year_" + std::to_string(y));
    sys.instrument_names.push_back("lag_log_K");
    sys.instrument_names.push_back("lag_omega_L");
    sys.instrument_names.push_back("IDA");
    sys.instrument_names.push_back("Imp_lag");

    sys.base = [w](const std::vector<double>& nl, int k) {
        const int row = w->idx.usable[k];
        return w->log_q_norm[row] - w->log_f(nl[0], row);
    };
    const int ny = n_years;
    sys.regressors = [w, ny](const std::vector<double>& nl, int k, Eigen::VectorXd& x) {
        const int row = w->idx.usable[k];
        const int lag = w->idx.lag_of[row];
        const auto& obs = (*w->panel)[row];
        x.setZero(3 + ny);
        x[0] = w->log_q_norm[lag] - w->log_f(nl[0], lag);
        x[1] = obs.IDA;
        x[2] = obs.Imp_lag;
        x[3 + w->idx.year_column.at(obs.year)] = 1.0;
    };
    sys.instruments = [w, ny](const std::vector<double>&, int k, Eigen::VectorXd& z) {
        const int row = w->idx.usable[k];
        const int lag = w->idx.lag_of[row];
        const auto& obs = (*w->panel)[row];
        z.setZero(static_cast<int>(z.size()));
        z[w->idx.year_column.at(obs.year)] = 1.0;
        int c = ny;
        z[c++] = w->lag_log_K[lag];
        z[c++] = w->omega_L_hat[lag];
        z[c++] = obs.IDA;
        z[c++] = obs.Imp_lag;
    };
    return sys;
}

std::vector<double> step2_param_vector(const MomentSystem& sys, double tau,
                                       const MarkovProcess& hicks) {
    std::vector<double> p;
    for (const auto& name : sys.param_names) {
        if (name == "tau")
            p.push_back(tau);
        else if (name == "rho_H")
            p.push_back(hicks.rho);
        else if (name == "beta_H1")
            p.push_back(hicks.beta_ida);
        else if (name == "beta_H2")
            p.push_back(hicks.beta_imp);
        else if (name.rfind("iota_H_", 0) == 0)
            p.push_back(hicks.year_effect(std::stoi(name.substr(7))));
        else
            throw ConfigError("unexpected step-2 parameter " + name);
    }
    return p;
}

Step2Result step2_estimate(const Panel& panel, const Step1Result& step1,
                           const GeometricMeans& means, const StepOptions& opts) {
    MomentSystem sys = build_step2_system(panel, step1, means, opts);
    GmmOptions gopts;
    gopts.optimizer = opts.optimizer;
    gopts.compute_rank = opts.compute_rank;
    GmmResult gmm = gmm_estimate(sys, opts.weighting, gopts);

    Step2Result out;
    out.gmm = gmm;
    out.tau = gmm.estimate("tau");
    out.rho_H = gmm.estimate("rho_H");
    out.beta_H1 = gmm.estimate("beta_H1");
    out.beta_H2 = gmm.estimate("beta_H2");
    out.tau_pinned = !gmm.pinned_at_bound.empty();

    const PanelIndex idx = PanelIndex::build(panel);
    for (int y : idx.years) out.iota_H[y] = gmm.estimate("iota_H_" + std::to_string(y));

    auto w = make_s2_work(panel, step1, means);
    out.omega_tilde.resize(panel.size());
    out.log_f_hat.resize(panel.size());
    for (std::size_t i = 0; i < panel.size(); ++i) {
        out.log_f_hat[i] = w->log_f(out.tau, static_cast<int>(i));
        out.omega_tilde[i] = w->log_q_norm[i] - out.log_f_hat[i];
    }
    return out;
}

}  // namespace cesmark
