#include "cesmark/dgp.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <string>

#include "cesmark/rng.hpp"
#include "cesmark/stats.hpp"

namespace cesmark {

namespace {

std::string plant_name(int j) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "p%04d", j);
    return buf;
}

std::string market_name(int r) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "m%02d", r);
    return buf;
}

int interval_index(int year, int first_year, int n_years, int n_intervals) {
    const int t = std::clamp(year - first_year, 0, n_years - 1);
    return std::min(n_intervals - 1, (t * n_intervals) / n_years);
}

}  // namespace

int DgpConfig::interval_of(int year) const {
    return interval_index(year, first_year, n_years, n_policy_intervals);
}

int LaborMarketConfig::interval_of(int year) const {
    return interval_index(year, first_year, n_years, n_policy_intervals);
}

void DgpConfig::validate() const {
    if (!(mu > 1.0) && markup_rule == MarkupRule::Constant)
        throw ConfigError("markup mu must exceed 1");
    if (markup_rule == MarkupRule::Isoelastic && !(demand_elasticity > 1.0))
        throw ConfigError("isoelastic demand elasticity must exceed 1");
    if (!(theta > 0.0) || theta > 1.0) throw ConfigError("theta must lie in (0,1]");
    if (n_years < 3) throw ConfigError("n_years must be at least 3 (lags required)");
    if (n_plants < n_markets) throw ConfigError("need at least one plant per market");
    if (g_C < 0 || g_D < 0) throw ConfigError("coordination cost slopes must be nonnegative");
    for (int t = 0; t < n_years; ++t) {
        const int a = interval_of(first_year + t);
        if (!(supply_C.gamma_at(a) > 0) || !(supply_D.gamma_at(a) > 0))
            throw ConfigError("effective wage coefficient must stay positive in every interval");
    }
}

DgpConfig default_dgp_config() {
    DgpConfig cfg;
    cfg.productivity.hicks.rho = 0.880;
    cfg.productivity.hicks.beta_ida = -0.031;
    cfg.productivity.hicks.beta_imp = -0.071;
    cfg.productivity.labor.rho = 0.885;
    cfg.productivity.labor.beta_ida = 0.010;
    cfg.productivity.labor.beta_imp = -0.044;
    cfg.productivity.sigma_H = 0.725;
    cfg.productivity.sigma_L = 0.20;
    cfg.productivity.sigma_eps = 1.0;
    for (int t = 0; t < cfg.n_years; ++t) {
        const int year = cfg.first_year + t;
        const double centered = t - 0.5 * (cfg.n_years - 1);
        cfg.productivity.hicks.iota[year] = -0.015 * centered;
        cfg.productivity.labor.iota[year] = 0.010 * centered;
    }
    cfg.supply_C = LaborSupplyParams{0.009, -0.002, 0.245, 0.0, 0.002};
    cfg.supply_D = LaborSupplyParams{0.005, -0.001, 0.402, 0.0, -0.001};
    return cfg;
}

namespace {

// Baseline constants that close the expenditure identities; recalibrated so
// the sample geometric means of the generated panel match them.
struct Baselines {
    double W_C, W_D, W_H, P_M, P;
    double C, D, H, M, K, Q;
};

Baselines initial_baselines(const DgpConfig& cfg) {
    Baselines b{};
    b.W_C = cfg.base_W_C;
    b.W_D = cfg.base_W_D;
    b.W_H = cfg.base_W_H;
    b.P_M = cfg.base_P_M;
    b.P = cfg.base_P;
    b.K = cfg.base_K;
    b.C = cfg.base_C;
    // Expenditure targets at the published share table: alpha_C = 0.307,
    // alpha_H = 0.449, alpha_M/alpha_L = 0.680/0.064.
    b.D = (0.693 / 0.307) * (b.W_C * b.C) / b.W_D;
    const double blue_exp = b.W_C * b.C + b.W_D * b.D;
    b.H = (0.449 / 0.551) * blue_exp / b.W_H;
    return b;
}

GeometricMeans means_from_baselines(const Baselines& b, double mat_labor_ratio, double mu) {
    GeometricMeans g;
    g.K = b.K;
    g.H = b.H;
    g.C = b.C;
    g.D = b.D;
    g.W_H = b.W_H;
    g.W_C = b.W_C;
    g.W_D = b.W_D;
    g.P_M = b.P_M;
    g.B = 1.0;
    g.W_B = g.W_C * g.C + g.W_D * g.D;
    g.L = 1.0;
    g.W_L = g.W_H * g.H + g.W_B * g.B;
    g.M = mat_labor_ratio * (g.W_L * g.L) / g.P_M;
    g.Q = 1.0;  // set by the caller from the baseline M-FOC once tau is known
    (void)mu;
    return g;
}

struct PlantSeries {
    int market = 0;
    std::vector<double> log_Kn, log_Hn, log_Mn, log_Pn;  // normalized logs
    std::vector<double> z1, z2, z3;
    std::vector<double> omega_H, omega_L, xi_H, xi_L, eps;
    std::vector<double> imp_lag;  // Imp_{j,t-1}
    std::vector<double> amenity_C, amenity_D;
};

struct MarketSeries {
    std::vector<double> ida, strike, denom_C, denom_D;
};

// One fully solved market-year block.
struct SolvedPlantYear {
    double C = 0, D = 0, W_C = 0, W_D = 0, W_H = 0, P_M = 0, P = 0;
    double Q = 0, pi_hat = 0, mu = 0;
    double mrpl_C = 0, mrpl_D = 0, invel_C = 0, invel_D = 0;
    double s_C = 0, scond_C = 0, s_D = 0, scond_D = 0;
    double s0_C = 0, s0_D = 0;
};

double wage_slope_constant(double gamma_eff, double eta, double share, double cond_share) {
    const double denom = gamma_eff * (1.0 - eta * cond_share - (1.0 - eta) * share);
    if (!(denom > 0)) throw EstimationError("nonpositive wage-slope denominator");
    return (1.0 - eta) / denom;
}

}  // namespace

MarketShares nested_logit_shares(const std::vector<double>& delta, double eta) {
    MarketShares out;
    const std::size_t n = delta.size();
    out.s.resize(n);
    out.s_cond.resize(n);
    std::vector<double> y(n);
    double ymax = -1e300;
    for (std::size_t j = 0; j < n; ++j) {
        y[j] = delta[j] / (1.0 - eta);
        ymax = std::max(ymax, y[j]);
    }
    double acc = 0;
    for (std::size_t j = 0; j < n; ++j) acc += std::exp(y[j] - ymax);
    const double lse = ymax + std::log(acc);
    const double log_T = (1.0 - eta) * lse;  // log of sum_j s_j/s_0
    // log(1 + T) without overflow.
    const double softplus = log_T > 40.0 ? log_T : std::log1p(std::exp(log_T));
    out.s0 = std::exp(-softplus);
    for (std::size_t j = 0; j < n; ++j) {
        out.s_cond[j] = std::exp(y[j] - lse);
        out.s[j] = std::exp(y[j] - lse + log_T - softplus);
    }
    return out;
}

SimulatedPanel simulate_panel(const DgpConfig& cfg) {
    cfg.validate();
    const int J = cfg.n_plants, T = cfg.n_years, R = cfg.n_markets;
    const double mat_labor_ratio = 0.680 / 0.064;

    // --- exogenous draws, independent of the calibration pass ---
    std::vector<PlantSeries> plants(J);
    std::vector<MarketSeries> markets(R);
    std::vector<int> plants_in_market(R, 0);
    for (int j = 0; j < J; ++j) {
        plants[j].market = j % R;
        ++plants_in_market[j % R];
    }

    for (int r = 0; r < R; ++r) {
        Rng rng(substream_seed(cfg.seed, 1000000 + static_cast<std::uint64_t>(r)));
        auto& m = markets[r];
        m.ida.resize(T);
        m.strike.resize(T);
        m.denom_C.resize(T);
        m.denom_D.resize(T);
        double ida = cfg.ida_mean;
        for (int t = 0; t < T; ++t) {
            ida = cfg.ida_mean + cfg.ida_rho * (ida - cfg.ida_mean) + cfg.ida_sd * rng.normal();
            m.ida[t] = std::max(0.0, ida);
            m.strike[t] = rng.lognormal(cfg.strike_log_mean, cfg.strike_log_sd);
            m.denom_C[t] = rng.lognormal(0.0, cfg.market_size_sd);
            m.denom_D[t] = rng.lognormal(0.0, cfg.market_size_sd);
        }
    }

    for (int j = 0; j < J; ++j) {
        Rng rng(substream_seed(cfg.seed, static_cast<std::uint64_t>(j)));
        auto& p = plants[j];
        p.log_Kn.assign(T, 0.0);
        p.log_Hn.assign(T, 0.0);
        p.log_Mn.assign(T, 0.0);
        p.log_Pn.assign(T, 0.0);
        p.z1.assign(T, 0.0);
        p.z2.assign(T, 0.0);
        p.z3.assign(T, 0.0);
        p.omega_H.assign(T, 0.0);
        p.omega_L.assign(T, 0.0);
        p.xi_H.assign(T, 0.0);
        p.xi_L.assign(T, 0.0);
        p.eps.assign(T, 0.0);
        p.imp_lag.assign(T, 0.0);
        p.amenity_C.assign(T, 0.0);
        p.amenity_D.assign(T, 0.0);

        const double p11 = cfg.imp_p11, p01 = cfg.imp_p01;
        double imp_prev = rng.bernoulli(p01 / (1.0 - p11 + p01)) ? 1.0 : 0.0;
        double zh = 0, zm = 0, zk = 0, h = 0, mm = 0, k = 0, pp = 0;
        const auto& mser = markets[p.market];
        for (int t = 0; t < T; ++t) {
            p.imp_lag[t] = imp_prev;
            imp_prev = rng.bernoulli(imp_prev > 0.5 ? p11 : p01) ? 1.0 : 0.0;

            zh = 0.5 * zh + cfg.instrument_sd * rng.normal();
            zm = 0.5 * zm + cfg.instrument_sd * rng.normal();
            zk = 0.5 * zk + cfg.instrument_sd * rng.normal();
            p.z1[t] = zh;
            p.z2[t] = zm;
            p.z3[t] = zk;

            // Productivity first: capital may respond to its lag.
            const int year = cfg.first_year + t;
            p.xi_H[t] = cfg.productivity.sigma_H * rng.normal();
            p.xi_L[t] = cfg.productivity.sigma_L * rng.normal();
            const double prev_H = t > 0 ? p.omega_H[t - 1] : 0.0;
            const double prev_L = t > 0 ? p.omega_L[t - 1] : 0.0;
            p.omega_H[t] =
                cfg.productivity.hicks.step(prev_H, mser.ida[t], p.imp_lag[t], p.xi_H[t], year);
            p.omega_L[t] =
                cfg.productivity.labor.step(prev_L, mser.ida[t], p.imp_lag[t], p.xi_L[t], year);

            h = cfg.h_process.rho * h + cfg.h_process.shifter_loading * zh +
                cfg.h_process.sd * rng.normal();
            mm = cfg.m_process.rho * mm + cfg.m_process.shifter_loading * zm +
                 cfg.m_process.sd * rng.normal();
            k = cfg.k_process.rho * k + cfg.k_process.shifter_loading * zk +
                cfg.k_process.omega_loading * prev_H + cfg.k_process.sd * rng.normal();
            pp = cfg.p_process.rho * pp + cfg.p_process.sd * rng.normal();
            p.log_Hn[t] = h;
            p.log_Mn[t] = mm;
            p.log_Kn[t] = k;
            p.log_Pn[t] = pp;

            p.eps[t] = cfg.productivity.sigma_eps * rng.normal();
            p.amenity_C[t] = cfg.amenity_sd_C * rng.normal();
            p.amenity_D[t] = cfg.amenity_sd_D * rng.normal();
        }
    }

    // Demean the normalized log draws so sample geometric means equal the
    // baseline constants exactly for the drawn inputs.
    auto demean = [&](std::vector<double> PlantSeries::* member) {
        KahanSum s;
        for (const auto& p : plants)
            for (double v : p.*member) s.add(v);
        const double m = s.value() / static_cast<double>(J * T);
        for (auto& p : plants)
            for (double& v : p.*member) v -= m;
    };
    demean(&PlantSeries::log_Kn);
    demean(&PlantSeries::log_Hn);
    demean(&PlantSeries::log_Mn);
    demean(&PlantSeries::log_Pn);

    // --- calibration passes: regenerate until baselines match the sample ---
    Baselines base = initial_baselines(cfg);
    const double denom_scale_C = base.C * (1.0 / cfg.inside_share_target);
    const double denom_scale_D = base.D * (1.0 / cfg.inside_share_target);

    ProductionParams params;
    LaborSupplyParams sup_C = cfg.supply_C, sup_D = cfg.supply_D;
    std::vector<std::vector<SolvedPlantYear>> solved(J, std::vector<SolvedPlantYear>(T));

    const int passes = std::max(1, cfg.calibration_passes);
    for (int pass = 0; pass < passes; ++pass) {
        GeometricMeans means = means_from_baselines(base, mat_labor_ratio, cfg.mu);
        const double base_mu =
            cfg.markup_rule == MarkupRule::Constant
                ? cfg.mu
                : cfg.demand_elasticity / (cfg.demand_elasticity - 1.0);
        means.Q = base_mu * means.materials_expenditure() /
                  (shares_from_tau(cfg.tau, means).alpha_M * base.P);
        params = ProductionParams{};
        params.sigma_O = cfg.sigma_O;
        params.sigma_M = cfg.sigma_M;
        params.sigma_I = cfg.sigma_I;
        params.tau = cfg.tau;
        params.means = means;
        params.worker = worker_shares_from_means(means);
        params.input = shares_from_tau(cfg.tau, means);
        params.validate();

        // Supply intercepts anchored at the baseline point.
        const double n_avg = static_cast<double>(J) / static_cast<double>(R);
        const double s_bar = cfg.inside_share_target / n_avg;
        const double s0_bar = 1.0 - cfg.inside_share_target;
        const int mid_interval = cfg.interval_of(cfg.first_year + T / 2);
        const double t_mid = 0.5 * (T - 1);
        sup_C.intercept = std::log(s_bar / s0_bar) - sup_C.trend * t_mid -
                          sup_C.gamma_at(mid_interval) * base.W_C -
                          sup_C.eta * std::log(1.0 / n_avg);
        sup_D.intercept = std::log(s_bar / s0_bar) - sup_D.trend * t_mid -
                          sup_D.gamma_at(mid_interval) * base.W_D -
                          sup_D.eta * std::log(1.0 / n_avg);

        // Solve each market-year block.
        for (int r = 0; r < R; ++r) {
            std::vector<int> members;
            for (int j = 0; j < J; ++j)
                if (plants[j].market == r) members.push_back(j);
            const auto& mser = markets[r];

            for (int t = 0; t < T; ++t) {
                const int year = cfg.first_year + t;
                const int interval = cfg.interval_of(year);
                const double gC = sup_C.gamma_at(interval);
                const double gD = sup_D.gamma_at(interval);
                const double denom_C = denom_scale_C * plants_in_market[r] * mser.denom_C[t];
                const double denom_D = denom_scale_D * plants_in_market[r] * mser.denom_D[t];

                const std::size_t n = members.size();
                std::vector<double> C(n, base.C), D(n, base.D);
                std::vector<double> W_C(n, base.W_C), W_D(n, base.W_D);
                std::vector<double> y_C(n), y_D(n);  // delta / (1 - eta)

                auto production = [&](std::size_t a, double Cv, double Dv) {
                    const auto& p = plants[members[a]];
                    PanelObservation obs;
                    obs.K = std::exp(p.log_Kn[t]) * base.K;
                    obs.M = std::exp(p.log_Mn[t]) * means.M;
                    obs.H = std::exp(p.log_Hn[t]) * base.H;
                    obs.C = Cv;
                    obs.D = Dv;
                    return evaluate_production(obs, params, p.omega_L[t], p.omega_H[t]);
                };
                auto price_and_markup = [&](std::size_t a, double Q) {
                    const auto& p = plants[members[a]];
                    double price = std::exp(p.log_Pn[t]) * base.P;
                    double mu = cfg.mu;
                    if (cfg.markup_rule == MarkupRule::Isoelastic) {
                        mu = cfg.demand_elasticity / (cfg.demand_elasticity - 1.0);
                        price *= std::pow(Q / means.Q, -1.0 / cfg.demand_elasticity);
                    }
                    return std::make_pair(price, mu);
                };

                for (std::size_t a = 0; a < n; ++a) {
                    const auto& p = plants[members[a]];
                    y_C[a] = (sup_C.intercept + sup_C.trend * t + gC * W_C[a] +
                              p.amenity_C[t]) /
                             (1.0 - sup_C.eta);
                    y_D[a] = (sup_D.intercept + sup_D.trend * t + gD * W_D[a] +
                              p.amenity_D[t]) /
                             (1.0 - sup_D.eta);
                }

                // Own-wage/employment best response for plant `a`, rivals'
                // inclusive values frozen. The excess supply gap is strictly
                // decreasing in own log employment, so bisection is exact.
                auto solve_plant_type = [&](std::size_t a, bool temporary) {
                    const LaborSupplyParams& sup = temporary ? sup_C : sup_D;
                    const double gamma_eff = temporary ? gC : gD;
                    const double denom = temporary ? denom_C : denom_D;
                    const double g_cost = temporary ? cfg.g_C : cfg.g_D;
                    const double floor = 1e-9 * (temporary ? base.W_C : base.W_D);
                    const double amen = temporary
                                            ? plants[members[a]].amenity_C[t]
                                            : plants[members[a]].amenity_D[t];
                    std::vector<double>& y = temporary ? y_C : y_D;
                    std::vector<double>& X = temporary ? C : D;
                    std::vector<double>& W = temporary ? W_C : W_D;

                    double rival_inside = 0, rival_max = -1e300;
                    for (std::size_t b = 0; b < n; ++b) {
                        if (b == a) continue;
                        rival_inside += X[b];
                        rival_max = std::max(rival_max, y[b]);
                    }
                    double rival_expsum = 0;
                    if (n > 1)
                        for (std::size_t b = 0; b < n; ++b)
                            if (b != a) rival_expsum += std::exp(y[b] - rival_max);

                    struct Eval {
                        double gap, wage, y_own;
                    };
                    auto evaluate = [&](double logX) -> Eval {
                        const double Xv = std::exp(logX);
                        const auto ev = production(a, temporary ? Xv : C[a],
                                                   temporary ? D[a] : Xv);
                        const auto [price, mu] = price_and_markup(a, ev.Q);
                        const double shadow = price / mu;
                        const double R = shadow * (temporary ? ev.MP_C : ev.MP_D);
                        const double s_cand = std::min(Xv / denom, 1.0 - 1e-12);
                        const double scond_cand = Xv / (Xv + rival_inside);
                        const double kappa =
                            wage_slope_constant(gamma_eff, sup.eta, s_cand, scond_cand);
                        double wage;
                        if (temporary || cfg.conduct == Conduct::NashBertrand ||
                            cfg.theta >= 1.0) {
                            wage = R - kappa - g_cost;
                        } else {
                            const double pi = ev.Q * (price - price / mu);
                            const double b = kappa + g_cost - R;
                            const double c0 =
                                kappa * ((cfg.theta - 1.0) / cfg.theta) * pi / Xv;
                            wage = 0.5 * (-b + std::sqrt(b * b - 4.0 * c0));
                        }
                        wage = std::max(wage, floor);
                        const double y_own =
                            (sup.intercept + sup.trend * t + gamma_eff * wage + amen) /
                            (1.0 - sup.eta);
                        double lse, log_implied;
                        if (n > 1) {
                            const double m = std::max(y_own, rival_max);
                            lse = m + std::log(std::exp(y_own - m) +
                                               rival_expsum * std::exp(rival_max - m));
                        } else {
                            lse = y_own;
                        }
                        const double log_T = (1.0 - sup.eta) * lse;
                        const double softplus =
                            log_T > 40.0 ? log_T : std::log1p(std::exp(log_T));
                        log_implied = y_own - lse + log_T - softplus + std::log(denom);
                        return {log_implied - logX, wage, y_own};
                    };

                    double lo = std::log(denom) - 80.0;
                    double hi = std::log(denom) - 1e-10;
                    Eval elo = evaluate(lo);
                    for (int widen = 0; widen < 4 && elo.gap < 0; ++widen) {
                        lo -= 100.0;
                        elo = evaluate(lo);
                    }
                    const Eval ehi = evaluate(hi);
                    double sol;
                    if (elo.gap <= 0) {
                        sol = lo;  // pinned at the tiny-employment floor
                    } else if (ehi.gap >= 0) {
                        sol = hi;
                    } else {
                        for (int it2 = 0; it2 < 90 && hi - lo > 1e-14; ++it2) {
                            const double mid = 0.5 * (lo + hi);
                            if (evaluate(mid).gap > 0)
                                lo = mid;
                            else
                                hi = mid;
                        }
                        sol = 0.5 * (lo + hi);
                    }
                    const double change = std::abs(sol - std::log(X[a]));
                    // Damped rival-feedback update.
                    X[a] = std::exp(0.5 * std::log(X[a]) + 0.5 * sol);
                    const Eval efinal = evaluate(std::log(X[a]));
                    W[a] = efinal.wage;
                    y[a] = efinal.y_own;
                    return change;
                };

                bool converged = false;
                std::vector<double> prev_state, prev_diff;
                for (int it = 0; it < cfg.fixed_point_max_iter && !converged; ++it) {
                    double max_change = 0;
                    for (std::size_t a = 0; a < n; ++a) {
                        max_change = std::max(max_change, solve_plant_type(a, true));
                        max_change = std::max(max_change, solve_plant_type(a, false));
                    }
                    converged = max_change < cfg.fixed_point_tol;

                    // Aitken extrapolation of the dominant contraction mode
                    // (the common outside-share channel is slow otherwise).
                    std::vector<double> state(2 * n);
                    for (std::size_t a = 0; a < n; ++a) {
                        state[a] = std::log(C[a]);
                        state[n + a] = std::log(D[a]);
                    }
                    if (!prev_state.empty()) {
                        std::vector<double> diff(2 * n);
                        for (std::size_t k = 0; k < 2 * n; ++k)
                            diff[k] = state[k] - prev_state[k];
                        if (!prev_diff.empty() && !converged && it % 10 == 9) {
                            double num = 0, den = 0;
                            for (std::size_t k = 0; k < 2 * n; ++k) {
                                num += diff[k] * prev_diff[k];
                                den += prev_diff[k] * prev_diff[k];
                            }
                            const double lambda = den > 0 ? num / den : 0.0;
                            if (lambda > 0.2 && lambda < 0.995) {
                                const double factor = lambda / (1.0 - lambda);
                                for (std::size_t a = 0; a < n; ++a) {
                                    const double sc =
                                        std::clamp(diff[a] * factor, -2.0, 2.0);
                                    const double sd =
                                        std::clamp(diff[n + a] * factor, -2.0, 2.0);
                                    C[a] = std::exp(state[a] + sc);
                                    D[a] = std::exp(state[n + a] + sd);
                                }
                                prev_state.clear();
                                prev_diff.clear();
                                continue;
                            }
                        }
                        prev_diff = std::move(diff);
                    }
                    prev_state = std::move(state);
                }
                if (!converged)
                    throw EstimationError("fixed point failed to converge in market " +
                                          market_name(r) + " year " + std::to_string(year));

                // Land exactly on the supply-consistent quantities at the
                // converged wages.
                std::vector<double> deltas_C(n), deltas_D(n);
                for (std::size_t a = 0; a < n; ++a) {
                    deltas_C[a] = y_C[a] * (1.0 - sup_C.eta);
                    deltas_D[a] = y_D[a] * (1.0 - sup_D.eta);
                }
                const MarketShares sh_C = nested_logit_shares(deltas_C, sup_C.eta);
                const MarketShares sh_D = nested_logit_shares(deltas_D, sup_D.eta);
                for (std::size_t a = 0; a < n; ++a) {
                    C[a] = sh_C.s[a] * denom_C;
                    D[a] = sh_D.s[a] * denom_D;
                }

                // Final evaluation and backed-out competitive prices.
                for (std::size_t a = 0; a < n; ++a) {
                    const int j = members[a];
                    const auto& p = plants[j];
                    auto& out = solved[j][t];
                    PanelObservation obs;
                    obs.K = std::exp(p.log_Kn[t]) * base.K;
                    obs.M = std::exp(p.log_Mn[t]) * means.M;
                    obs.H = std::exp(p.log_Hn[t]) * base.H;
                    obs.C = C[a];
                    obs.D = D[a];
                    const auto ev = evaluate_production(obs, params, p.omega_L[t], p.omega_H[t]);

                    double price = std::exp(p.log_Pn[t]) * base.P;
                    double mu = cfg.mu;
                    if (cfg.markup_rule == MarkupRule::Isoelastic) {
                        mu = cfg.demand_elasticity / (cfg.demand_elasticity - 1.0);
                        price = base.P * std::exp(p.log_Pn[t]) *
                                std::pow(ev.Q / means.Q, -1.0 / cfg.demand_elasticity);
                    }
                    const double shadow = price / mu;

                    out.C = C[a];
                    out.D = D[a];
                    out.W_C = W_C[a];
                    out.W_D = W_D[a];
                    out.P = price;
                    out.mu = mu;
                    out.Q = ev.Q;
                    out.W_H = shadow * ev.MP_H;
                    out.P_M = shadow * ev.MP_M;
                    out.pi_hat = ev.Q * (price - price / mu);
                    out.mrpl_C = shadow * ev.MP_C;
                    out.mrpl_D = shadow * ev.MP_D;
                    out.s_C = sh_C.s[a];
                    out.scond_C = sh_C.s_cond[a];
                    out.s0_C = sh_C.s0;
                    out.s_D = sh_D.s[a];
                    out.scond_D = sh_D.s_cond[a];
                    out.s0_D = sh_D.s0;
                    const double kappa_C = wage_slope_constant(gC, sup_C.eta, out.s_C, out.scond_C);
                    const double kappa_D = wage_slope_constant(gD, sup_D.eta, out.s_D, out.scond_D);
                    out.invel_C = kappa_C / out.W_C;
                    out.invel_D = kappa_D / out.W_D;

                    // The converged state must satisfy both wage conditions.
                    const double res_C =
                        std::abs(out.W_C + kappa_C + cfg.g_C - out.mrpl_C) / out.mrpl_C;
                    const double nu_D_conduct =
                        1.0 + out.invel_D *
                                  (1.0 + ((cfg.theta - 1.0) / cfg.theta) *
                                             (cfg.conduct == Conduct::NashBargaining
                                                  ? out.pi_hat / (out.D * out.W_D)
                                                  : 0.0));
                    const double res_D =
                        std::abs(out.W_D * nu_D_conduct + cfg.g_D - out.mrpl_D) / out.mrpl_D;
                    if (res_C > 1e-8 || res_D > 1e-8)
                        throw EstimationError(
                            "plant " + plant_name(j) + " year " + std::to_string(year) +
                            ": wage condition has no positive solution at convergence");
                }
            }
        }

        if (pass + 1 < passes) {
            // Recalibrate the solved-variable baselines to the realized sample.
            KahanSum lwc, lwd, lwh, lpm, lc, ld;
            for (int j = 0; j < J; ++j)
                for (int t = 0; t < T; ++t) {
                    lwc.add(std::log(solved[j][t].W_C));
                    lwd.add(std::log(solved[j][t].W_D));
                    lwh.add(std::log(solved[j][t].W_H));
                    lpm.add(std::log(solved[j][t].P_M));
                    lc.add(std::log(solved[j][t].C));
                    ld.add(std::log(solved[j][t].D));
                }
            const double nobs = static_cast<double>(J * T);
            base.W_C = std::exp(lwc.value() / nobs);
            base.W_D = std::exp(lwd.value() / nobs);
            base.W_H = std::exp(lwh.value() / nobs);
            base.P_M = std::exp(lpm.value() / nobs);
            base.C = std::exp(lc.value() / nobs);
            base.D = std::exp(ld.value() / nobs);
        }
    }

    // --- assemble panel + truth ---
    SimulatedPanel out;
    out.truth.params = params;
    out.truth.productivity = cfg.productivity;
    out.truth.supply_C = sup_C;
    out.truth.supply_D = sup_D;
    out.truth.conduct = cfg.conduct;
    out.truth.theta = cfg.theta;
    out.truth.g_C = cfg.g_C;
    out.truth.g_D = cfg.g_D;
    out.truth.markup_rule = cfg.markup_rule;
    out.truth.mu = cfg.markup_rule == MarkupRule::Constant
                       ? cfg.mu
                       : cfg.demand_elasticity / (cfg.demand_elasticity - 1.0);
    out.truth.first_year = cfg.first_year;
    out.truth.n_years = T;
    out.truth.n_policy_intervals = cfg.n_policy_intervals;

    for (int j = 0; j < J; ++j) {
        const auto& p = plants[j];
        for (int t = 0; t < T; ++t) {
            const auto& s = solved[j][t];
            const auto& mser = markets[p.market];
            PanelObservation obs;
            obs.plant_id = plant_name(j);
            obs.year = cfg.first_year + t;
            obs.market_id = market_name(p.market);
            obs.Q_obs = s.Q * std::exp(p.eps[t]);
            obs.P = s.P;
            obs.K = std::exp(p.log_Kn[t]) * base.K;
            obs.M = std::exp(p.log_Mn[t]) * params.means.M;
            obs.P_M = s.P_M;
            obs.H = std::exp(p.log_Hn[t]) * base.H;
            obs.W_H = s.W_H;
            obs.C = s.C;
            obs.W_C = s.W_C;
            obs.D = s.D;
            obs.W_D = s.W_D;
            obs.IDA = mser.ida[t];
            obs.Imp_lag = p.imp_lag[t];
            obs.strike_intensity = mser.strike[t];
            obs.outside_mandays_C = s.s0_C * (s.C / s.s_C);
            obs.outside_mandays_D = s.s0_D * (s.D / s.s_D);
            obs.extra_instruments["z_h"] = p.z1[t];
            obs.extra_instruments["z_m"] = p.z2[t];
            obs.extra_instruments["z_k"] = p.z3[t];
            out.panel.push_back(std::move(obs));

            ObservationTruth tr;
            tr.state.omega_H = p.omega_H[t];
            tr.state.omega_L = p.omega_L[t];
            tr.state.xi_H = p.xi_H[t];
            tr.state.xi_L = p.xi_L[t];
            tr.state.eps = p.eps[t];
            tr.mu = s.mu;
            tr.pi_hat = s.pi_hat;
            tr.mrpl_C = s.mrpl_C;
            tr.mrpl_D = s.mrpl_D;
            tr.invel_C = s.invel_C;
            tr.invel_D = s.invel_D;
            tr.nu_C = (s.mrpl_C - cfg.g_C) / s.W_C;
            tr.nu_D = (s.mrpl_D - cfg.g_D) / s.W_D;
            tr.F_C = cfg.g_C / s.W_C;
            tr.F_D = cfg.g_D / s.W_D;
            tr.s_C = s.s_C;
            tr.s0_C = s.s0_C;
            tr.scond_C = s.scond_C;
            tr.s_D = s.s_D;
            tr.s0_D = s.s0_D;
            tr.scond_D = s.scond_D;
            tr.amenity_C = p.amenity_C[t];
            tr.amenity_D = p.amenity_D[t];
            tr.Q_planned = s.Q;
            out.truth.obs.push_back(tr);
        }
    }
    return out;
}

LaborMarketDataset simulate_labor_market(const LaborMarketConfig& cfg) {
    LaborMarketDataset out;
    out.n_policy_intervals = cfg.n_policy_intervals;
    Rng rng(cfg.seed);

    // Intercept pinned so baseline shares hit the inside-share target.
    const double n_avg = 0.5 * (cfg.min_plants + cfg.max_plants);
    const double s_bar = cfg.inside_share_target / n_avg;
    const int mid_interval = cfg.interval_of(cfg.first_year + cfg.n_years / 2);
    LaborSupplyParams truth = cfg.supply;
    truth.intercept = std::log(s_bar / (1.0 - cfg.inside_share_target)) -
                      truth.trend * 0.5 * (cfg.n_years - 1) -
                      truth.gamma_at(mid_interval) * cfg.wage_base -
                      truth.eta * std::log(1.0 / n_avg);
    out.truth = truth;

    for (int r = 0; r < cfg.n_markets; ++r) {
        const int n = cfg.min_plants +
                      static_cast<int>(rng.integer(static_cast<std::uint64_t>(
                          cfg.max_plants - cfg.min_plants + 1)));
        std::vector<double> z(n), amen(n), wage(n), delta(n);
        for (int t = 0; t < cfg.n_years; ++t) {
            const int year = cfg.first_year + t;
            const int interval = cfg.interval_of(year);
            const double gamma_eff = truth.gamma_at(interval);
            double zsum = 0;
            for (int a = 0; a < n; ++a) {
                z[a] = rng.normal();
                amen[a] = cfg.amenity_sd * rng.normal();
                wage[a] = cfg.wage_base + cfg.wage_instrument_coef * z[a] +
                          cfg.wage_amenity_coef * amen[a] + cfg.wage_noise_sd * rng.normal();
                if (!(wage[a] > 0)) wage[a] = 1.0;
                zsum += z[a];
            }
            for (int a = 0; a < n; ++a)
                delta[a] = truth.intercept + truth.trend * t + gamma_eff * wage[a] + amen[a];
            const MarketShares sh = nested_logit_shares(delta, truth.eta);

            for (int a = 0; a < n; ++a) {
                LaborMarketRow row;
                row.market_id = market_name(r);
                row.plant_id = plant_name(r * 100 + a);
                row.year = year;
                row.interval = interval;
                row.W = wage[a];
                row.share = sh.s[a];
                row.outside_share = sh.s0;
                row.cond_share = sh.s_cond[a];
                row.log_odds = std::log(sh.s[a] / sh.s0);
                row.z = z[a];
                row.z_rivals = n > 1 ? (zsum - z[a]) / (n - 1) : 0.0;
                row.n_establishments = n;
                row.amenity = amen[a];
                out.rows.push_back(std::move(row));
            }
        }
    }
    return out;
}

}  // namespace cesmark
