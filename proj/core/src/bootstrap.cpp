#include "cesmark/bootstrap.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <thread>

#include "cesmark/rng.hpp"
#include "cesmark/stats.hpp"

namespace cesmark {

void BootstrapReport::finalize() {
    summaries.clear();
    for (std::size_t k = 0; k < param_names.size(); ++k) {
        std::vector<double> vals;
        for (std::size_t r = 0; r < draws.size(); ++r)
            if (effective[r][k] && std::isfinite(draws[r][k])) vals.push_back(draws[r][k]);
        ParameterSummary s;
        s.name = param_names[k];
        s.effective = static_cast<int>(vals.size());
        if (!vals.empty()) {
            const SummaryStats st = summarize(vals);
            s.mean = st.mean;
            s.median = st.median;
            s.sd = st.sd;
            s.max = st.max;
            s.min = st.min;
        }
        summaries.push_back(s);
    }
}

namespace {

// Deterministic static-partition parallel for: results land in preallocated
// slots, so worker count never changes the output.
void parallel_for(int n, int workers, const std::function<void(int)>& body) {
    if (workers <= 1 || n <= 1) {
        for (int i = 0; i < n; ++i) body(i);
        return;
    }
    std::vector<std::thread> pool;
    const int w = std::min(workers, n);
    for (int t = 0; t < w; ++t)
        pool.emplace_back([&, t] {
            for (int i = t; i < n; i += w) body(i);
        });
    for (auto& th : pool) th.join();
}

}  // namespace

Panel perturb_panel(const Panel& panel, const FittedSteps& fitted,
                    const std::vector<int>& r1_per_row, const std::vector<int>& r2_per_row) {
    if (r1_per_row.size() != panel.size() || r2_per_row.size() != panel.size())
        throw ConfigError("perturbation draws do not match the panel");
    const PanelIndex idx = PanelIndex::build(panel);
    const GeometricMeans& means = fitted.means;
    const WorkerShares worker = worker_shares_from_means(means);
    const InputShares input = shares_from_tau(fitted.step2.tau, means);
    const CesSigmas s = fitted.step1.sigmas;
    const double sO_t = 1.0 / (1.0 - s.O);  // tilde transforms
    const double sM_t = 1.0 / (1.0 - s.M);

    // Rebuild omega_L^b recursively; segment starts stay anchored at the fit.
    std::vector<double> omega_b(panel.size());
    for (std::size_t i = 0; i < panel.size(); ++i) {
        const int lag = idx.lag_of[static_cast<int>(i)];
        if (lag < 0) {
            omega_b[i] = fitted.step1.omega_L_hat[i];
        } else {
            const auto& obs = panel[i];
            omega_b[i] = fitted.step1.iota_L.at(obs.year) + fitted.step1.rho_L * omega_b[lag] +
                         fitted.step1.beta_L1 * obs.IDA + fitted.step1.beta_L2 * obs.Imp_lag +
                         fitted.step1.xi_L_hat[i] * r1_per_row[i];
        }
    }

    Panel out = panel;
    for (std::size_t i = 0; i < panel.size(); ++i) {
        const auto& obs = panel[i];
        const double Bn = blue_collar_nest(obs.C / means.C, obs.D / means.D, worker.alpha_C,
                                           worker.alpha_D, s.I);
        const double Ln =
            labor_nest(obs.H / means.H, Bn, worker.alpha_H, worker.alpha_B, s.M);
        const double log_Hn = std::log(obs.H / means.H);

        const double log_Mb =
            -(sO_t - 1.0) * omega_b[i] - sO_t * std::log(worker.alpha_H) +
            sO_t * std::log(obs.W_H * obs.H * input.alpha_M / (obs.P_M * input.alpha_L)) -
            (sO_t - 1.0) * std::log(means.M) +
            (1.0 - sO_t + sO_t * (sM_t - 1.0) / sM_t) * std::log(Ln) -
            sO_t * ((sM_t - 1.0) / sM_t) * log_Hn;
        out[i].M = std::exp(log_Mb);

        const double eps_hat =
            std::isfinite(fitted.smoother.eps_hat[i]) ? fitted.smoother.eps_hat[i] : 0.0;
        const double kernel = input.alpha_K * std::pow(obs.K / means.K, s.O) +
                              input.alpha_M * std::pow(out[i].M / means.M, s.O) +
                              input.alpha_L * std::pow(std::exp(omega_b[i]) * Ln, s.O);
        const double log_q = std::log(means.Q) + std::log(kernel) / s.O +
                             fitted.smoother.omega_H_hat[i] + eps_hat * r2_per_row[i];
        out[i].Q_obs = std::exp(log_q);
    }
    return out;
}

namespace {

struct WildParamLayout {
    std::vector<std::string> names;
    int n = 0;
};

WildParamLayout wild_layout(bool with_sigma_H) {
    WildParamLayout l;
    l.names = {"sigma_O", "sigma_M", "sigma_I", "rho_L",   "beta_L1", "beta_L2",
               "tau",     "alpha_K", "alpha_L", "alpha_M", "rho_H",   "beta_H1",
               "beta_H2"};
    if (with_sigma_H) l.names.push_back("sigma_H");
    l.n = static_cast<int>(l.names.size());
    return l;
}

bool near_bound(double x, double lo, double hi, double tol_frac = 1e-3) {
    return std::min(x - lo, hi - x) < tol_frac * (hi - lo);
}

}  // namespace

BootstrapReport wild_bootstrap(const Panel& panel, const FittedSteps& fitted,
                               const WildBootstrapOptions& opts) {
    const WildParamLayout layout = wild_layout(opts.reestimate_sigma_H);
    BootstrapReport report;
    report.requested = opts.reps;
    report.param_names = layout.names;
    report.draws.assign(opts.reps, std::vector<double>(layout.n,
                        std::numeric_limits<double>::quiet_NaN()));
    report.effective.assign(opts.reps, std::vector<char>(layout.n, 0));
    if (opts.reps == 0) {
        report.finalize();
        return report;
    }

    // Plant index per row for plant-level draws.
    std::map<std::string, int> plant_ix;
    for (const auto& o : panel) plant_ix.emplace(o.plant_id, static_cast<int>(plant_ix.size()));

    auto run_rep = [&](int rep) {
        Rng rng(substream_seed(opts.seed, static_cast<std::uint64_t>(rep)));
        std::vector<int> plant_r1(plant_ix.size()), plant_r2(plant_ix.size());
        for (auto& v : plant_r1) v = rng.rademacher();
        for (auto& v : plant_r2) v = rng.rademacher();
        std::vector<int> r1(panel.size()), r2(panel.size());
        for (std::size_t i = 0; i < panel.size(); ++i) {
            if (opts.level == PerturbationLevel::PerPlant) {
                const int p = plant_ix.at(panel[i].plant_id);
                r1[i] = plant_r1[p];
                r2[i] = plant_r2[p];
            } else {
                r1[i] = rng.rademacher();
                r2[i] = rng.rademacher();
            }
        }

        try {
            const Panel pan_b = perturb_panel(panel, fitted, r1, r2);

            // The perturbed panel must satisfy the characterization exactly.
            const WorkerShares worker = worker_shares_from_means(fitted.means);
            {
                const double w_check = omega_L_characterization(
                    pan_b.front(), fitted.step1.sigmas, worker, fitted.means);
                const double target = fitted.step1.omega_L_hat.front();
                if (std::abs(w_check - target) > 1e-6 * std::max(1.0, std::abs(target)))
                    throw EstimationError("perturbed panel violates the H/M ratio");
            }

            StepOptions sopts = opts.step_options;
            sopts.optimizer.multistarts = 1;
            sopts.optimizer.seed = substream_seed(opts.seed, 900000 + rep);

            Step1Result s1;
            {
                // Warm-start the replication at the point estimates.
                StepOptions first = sopts;
                first.optimizer.extra_starts = {
                    {fitted.step1.sigmas.O, fitted.step1.sigmas.M, fitted.step1.sigmas.I}};
                s1 = step1_estimate(pan_b, fitted.means, first);
                const bool pinned_M = near_bound(s1.sigmas.M, sopts.sigma_lo, sopts.sigma_hi);
                const bool pinned_I = near_bound(s1.sigmas.I, sopts.sigma_lo, sopts.sigma_hi);
                if (pinned_M || pinned_I) {
                    // Fallback: hold sigma_O at the baseline fit and any interior
                    // solution at its replication value, re-estimate the rest.
                    StepOptions fb = sopts;
                    fb.fix_sigma_O = fitted.step1.sigmas.O;
                    if (!pinned_M) fb.fix_sigma_M = s1.sigmas.M;
                    if (!pinned_I) fb.fix_sigma_I = s1.sigmas.I;
                    std::vector<double> start;
                    if (pinned_M) start.push_back(fitted.step1.sigmas.M);
                    if (pinned_I) start.push_back(fitted.step1.sigmas.I);
                    fb.optimizer.extra_starts = {start};
                    s1 = step1_estimate(pan_b, fitted.means, fb);
                }
            }
            StepOptions s2opts = sopts;
            s2opts.optimizer.extra_starts = {{fitted.step2.tau}};
            const Step2Result s2 = step2_estimate(pan_b, s1, fitted.means, s2opts);
            double sigma_H_b = std::numeric_limits<double>::quiet_NaN();
            if (opts.reestimate_sigma_H) {
                const StateSpaceSpec spec = StateSpaceSpec::build(
                    pan_b, s2.omega_tilde, s2.iota_H, s2.rho_H, s2.beta_H1, s2.beta_H2);
                sigma_H_b = estimate_sigma_H(spec).sigma_H;
            }

            const InputShares shares_b = shares_from_tau(s2.tau, fitted.means);
            auto& d = report.draws[rep];
            auto& e = report.effective[rep];
            d[0] = s1.sigmas.O;
            d[1] = s1.sigmas.M;
            d[2] = s1.sigmas.I;
            d[3] = s1.rho_L;
            d[4] = s1.beta_L1;
            d[5] = s1.beta_L2;
            d[6] = s2.tau;
            d[7] = shares_b.alpha_K;
            d[8] = shares_b.alpha_L;
            d[9] = shares_b.alpha_M;
            d[10] = s2.rho_H;
            d[11] = s2.beta_H1;
            d[12] = s2.beta_H2;
            if (opts.reestimate_sigma_H) d[13] = sigma_H_b;

            const bool okO = !near_bound(s1.sigmas.O, sopts.sigma_lo, sopts.sigma_hi);
            const bool okM = !near_bound(s1.sigmas.M, sopts.sigma_lo, sopts.sigma_hi);
            const bool okI = !near_bound(s1.sigmas.I, sopts.sigma_lo, sopts.sigma_hi);
            const bool okTau = !s2.tau_pinned && okO;
            e[0] = okO;
            e[1] = okM;
            e[2] = okI;
            e[3] = e[4] = e[5] = 1;  // linear labor-process parameters
            e[6] = e[7] = e[8] = e[9] = okTau;
            e[10] = e[11] = e[12] = 1;
            if (opts.reestimate_sigma_H) e[13] = 1;
        } catch (const std::exception&) {
            // Replication recorded as ineffective; the run continues.
            std::fill(report.effective[rep].begin(), report.effective[rep].end(), 0);
        }
    };

    parallel_for(opts.reps, opts.workers, run_rep);
    report.finalize();
    return report;
}

BootstrapReport pairs_bootstrap_theta(const ThetaInputs& inputs,
                                      const PairsBootstrapOptions& opts) {
    BootstrapReport report;
    report.requested = opts.reps;
    report.param_names = {"theta_coef", "theta"};
    report.draws.assign(opts.reps,
                        std::vector<double>(2, std::numeric_limits<double>::quiet_NaN()));
    report.effective.assign(opts.reps, std::vector<char>(2, 0));
    if (opts.reps == 0) {
        report.finalize();
        return report;
    }

    // Rows per plant.
    std::map<std::string, std::vector<int>> rows_of;
    for (std::size_t i = 0; i < inputs.cluster_ids.size(); ++i)
        rows_of[inputs.cluster_ids[i]].push_back(static_cast<int>(i));
    std::vector<const std::vector<int>*> plants;
    for (const auto& [id, rows] : rows_of) plants.push_back(&rows);

    auto run_rep = [&](int rep) {
        Rng rng(substream_seed(opts.seed, static_cast<std::uint64_t>(rep)));
        ThetaInputs sample;
        for (std::size_t k = 0; k < plants.size(); ++k) {
            const auto& rows = *plants[rng.integer(plants.size())];
            // Re-labeled cluster id per draw so repeated plants count twice.
            const std::string cid = "resample_" + std::to_string(k);
            for (int r : rows) {
                sample.lhs.push_back(inputs.lhs[r]);
                sample.surplus.push_back(inputs.surplus[r]);
                sample.ida.push_back(inputs.ida[r]);
                sample.year.push_back(inputs.year[r]);
                sample.z_strike.push_back(inputs.z_strike[r]);
                sample.p_m.push_back(inputs.p_m[r]);
                sample.cluster_ids.push_back(cid);
                sample.panel_rows.push_back(inputs.panel_rows[r]);
            }
        }
        try {
            const ThetaEstimate est = estimate_theta(sample);
            report.draws[rep][0] = est.coef;
            report.draws[rep][1] = est.theta;
            const bool ok = est.coef < 0;
            report.effective[rep][0] = ok;
            report.effective[rep][1] = ok;
        } catch (const std::exception&) {
            // degenerate resample: flagged ineffective
        }
    };
    parallel_for(opts.reps, opts.workers, run_rep);
    report.finalize();
    return report;
}

}  // namespace cesmark
