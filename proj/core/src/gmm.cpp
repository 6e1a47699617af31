#include "cesmark/gmm.hpp"

#include <cmath>

#include "cesmark/stats.hpp"

namespace cesmark {

double MomentSystem::residual(const std::vector<double>& params, int i) const {
    std::vector<double> nl(params.begin(), params.begin() + n_nonlinear);
    double r = base(nl, i);
    if (n_linear > 0) {
        Eigen::VectorXd x(n_linear);
        regressors(nl, i, x);
        for (int k = 0; k < n_linear; ++k) r -= params[n_nonlinear + k] * x[k];
    }
    return r;
}

Eigen::VectorXd MomentSystem::instrument_vector(const std::vector<double>& params, int i) const {
    std::vector<double> nl(params.begin(), params.begin() + n_nonlinear);
    Eigen::VectorXd z(n_instruments);
    instruments(nl, i, z);
    return z;
}

double GmmResult::estimate(const std::string& name) const {
    for (std::size_t i = 0; i < param_names.size(); ++i)
        if (param_names[i] == name) return estimates[i];
    throw ConfigError("no GMM parameter named " + name);
}

namespace {

// Per-evaluation workspace: moments of the concentrated system.
struct ConcentratedFit {
    Eigen::VectorXd lambda;  // linear tail
    Eigen::VectorXd gbar;    // moment vector at the optimum tail
    double objective = 0;
};

ConcentratedFit concentrated_fit(const MomentSystem& sys, const std::vector<double>& nl,
                                 const Eigen::MatrixXd& W) {
    const int nz = sys.n_instruments, nx = sys.n_linear, N = sys.n_obs;
    Eigen::VectorXd mb = Eigen::VectorXd::Zero(nz);
    Eigen::MatrixXd Mzx = Eigen::MatrixXd::Zero(nz, std::max(nx, 1));
    Eigen::VectorXd z(nz), x(std::max(nx, 1));
    for (int i = 0; i < N; ++i) {
        sys.instruments(nl, i, z);
        const double b = sys.base(nl, i);
        mb += z * b;
        if (nx > 0) {
            sys.regressors(nl, i, x);
            Mzx += z * x.transpose();
        }
    }
    mb /= static_cast<double>(N);
    Mzx /= static_cast<double>(N);

    ConcentratedFit fit;
    if (nx > 0) {
        const Eigen::MatrixXd MtW = Mzx.transpose() * W;
        fit.lambda = (MtW * Mzx).ldlt().solve(MtW * mb);
        fit.gbar = mb - Mzx * fit.lambda;
    } else {
        fit.lambda.resize(0);
        fit.gbar = mb;
    }
    fit.objective = fit.gbar.dot(W * fit.gbar);
    return fit;
}

Eigen::MatrixXd moment_covariance(const MomentSystem& sys, const std::vector<double>& params,
                                  bool* ridged) {
    const int nz = sys.n_instruments, N = sys.n_obs;
    Eigen::VectorXd gbar = Eigen::VectorXd::Zero(nz);
    Eigen::MatrixXd S = Eigen::MatrixXd::Zero(nz, nz);
    for (int i = 0; i < N; ++i) {
        const Eigen::VectorXd g = sys.instrument_vector(params, i) * sys.residual(params, i);
        gbar += g;
        S += g * g.transpose();
    }
    gbar /= static_cast<double>(N);
    S /= static_cast<double>(N);
    S -= gbar * gbar.transpose();

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(S);
    const auto& sv = svd.singularValues();
    if (sv(sv.size() - 1) <= 1e-12 * sv(0) || !(sv(0) > 0)) {
        const double scale = std::max(S.diagonal().mean(), 1e-30);
        S += 1e-10 * scale * Eigen::MatrixXd::Identity(nz, nz);
        if (ridged) *ridged = true;
    }
    return S;
}

std::vector<double> full_params(const std::vector<double>& nl, const Eigen::VectorXd& lambda) {
    std::vector<double> p = nl;
    for (int k = 0; k < lambda.size(); ++k) p.push_back(lambda[k]);
    return p;
}

}  // namespace

Eigen::VectorXd sample_moments(const MomentSystem& sys, const std::vector<double>& params) {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(sys.n_instruments);
    for (int i = 0; i < sys.n_obs; ++i)
        g += sys.instrument_vector(params, i) * sys.residual(params, i);
    return g / static_cast<double>(sys.n_obs);
}

GmmResult gmm_estimate(const MomentSystem& sys, Weighting weighting, const GmmOptions& opts) {
    if (sys.n_instruments < sys.n_params())
        throw ConfigError("GMM system has fewer instruments than parameters");

    GmmResult res;
    res.param_names = sys.param_names;

    Eigen::MatrixXd W = Eigen::MatrixXd::Identity(sys.n_instruments, sys.n_instruments);

    auto solve_given_W = [&](const Eigen::MatrixXd& Wmat, OptimResult* opt_out) {
        if (sys.n_nonlinear == 0) {
            ConcentratedFit fit = concentrated_fit(sys, {}, Wmat);
            if (opt_out) {
                opt_out->converged = true;
                opt_out->f = fit.objective;
            }
            return std::make_pair(std::vector<double>{}, fit);
        }
        auto objective = [&](const std::vector<double>& nl) {
            return concentrated_fit(sys, nl, Wmat).objective;
        };
        OptimResult opt = minimize_multistart(objective, sys.nonlinear_bounds, opts.optimizer,
                                              opts.optimizer.extra_starts);
        if (opt_out) *opt_out = opt;
        ConcentratedFit fit = concentrated_fit(sys, opt.x, Wmat);
        return std::make_pair(opt.x, fit);
    };

    OptimResult opt1;
    auto [nl, fit] = solve_given_W(W, &opt1);
    res.converged = opt1.converged;

    if (weighting == Weighting::TwoStepOptimal) {
        const Eigen::MatrixXd S = moment_covariance(sys, full_params(nl, fit.lambda),
                                                    &res.weighting_ridged);
        W = S.ldlt().solve(Eigen::MatrixXd::Identity(sys.n_instruments, sys.n_instruments));
        // Symmetrize against ldlt round-off.
        W = 0.5 * (W + W.transpose());
        OptimResult opt2;
        // Warm-start the second step at the first-step solution.
        GmmOptions step2 = opts;
        auto objective = [&](const std::vector<double>& p) {
            return concentrated_fit(sys, p, W).objective;
        };
        if (sys.n_nonlinear == 0) {
            fit = concentrated_fit(sys, {}, W);
        } else {
            opt2 = minimize_multistart(objective, sys.nonlinear_bounds, step2.optimizer, {nl});
            nl = opt2.x;
            fit = concentrated_fit(sys, nl, W);
            res.converged = res.converged && (opt2.converged || opt2.f <= opt1.f);
        }
    }

    res.estimates = full_params(nl, fit.lambda);
    res.objective = fit.objective;
    res.J = static_cast<double>(sys.n_obs) * fit.objective;
    res.J_df = sys.n_instruments - sys.n_params();
    res.J_pvalue = res.J_df > 0 ? chi2_sf(res.J, res.J_df)
                                : std::numeric_limits<double>::quiet_NaN();

    for (int k = 0; k < sys.n_nonlinear; ++k) {
        const auto& [lo, hi] = sys.nonlinear_bounds[k];
        if (std::min(nl[k] - lo, hi - nl[k]) < opts.bound_pin_tol * (hi - lo))
            res.pinned_at_bound.push_back(sys.param_names[k]);
    }

    // Instrument-residual correlations at the solution.
    {
        std::vector<std::vector<double>> zcols(sys.n_instruments,
                                               std::vector<double>(sys.n_obs));
        std::vector<double> resid(sys.n_obs);
        for (int i = 0; i < sys.n_obs; ++i) {
            const Eigen::VectorXd z = sys.instrument_vector(res.estimates, i);
            for (int k = 0; k < sys.n_instruments; ++k) zcols[k][i] = z[k];
            resid[i] = sys.residual(res.estimates, i);
        }
        res.instrument_residual_corr.resize(sys.n_instruments);
        for (int k = 0; k < sys.n_instruments; ++k) {
            const double c = correlation(zcols[k], resid);
            res.instrument_residual_corr[k] = std::isfinite(c) ? c : 0.0;
        }
    }

    if (opts.compute_rank) {
        const RankCheck rc = identification_rank_check(sys, res.estimates);
        res.jacobian_condition = rc.condition;
        res.jacobian_rank = rc.rank;
    }
    return res;
}

RankCheck identification_rank_check(const MomentSystem& sys,
                                    const std::vector<double>& params_at) {
    const int np = sys.n_params();
    RankCheck out;
    out.jacobian.resize(sys.n_instruments, np);
    std::vector<double> p = params_at;
    for (int k = 0; k < np; ++k) {
        const double h = 1e-5 * std::max(1.0, std::abs(params_at[k]));
        p[k] = params_at[k] + h;
        const Eigen::VectorXd gp = sample_moments(sys, p);
        p[k] = params_at[k] - h;
        const Eigen::VectorXd gm = sample_moments(sys, p);
        p[k] = params_at[k];
        out.jacobian.col(k) = (gp - gm) / (2.0 * h);
    }
    if (!out.jacobian.allFinite()) throw EstimationError("non-finite moment Jacobian entries");

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(out.jacobian);
    const auto& sv = svd.singularValues();
    const double smax = sv.size() > 0 ? sv(0) : 0.0;
    out.condition = sv(sv.size() - 1) > 0 ? smax / sv(sv.size() - 1)
                                          : std::numeric_limits<double>::infinity();
    out.rank = 0;
    for (int i = 0; i < sv.size(); ++i)
        if (sv(i) > 1e-7 * smax) ++out.rank;
    return out;
}

}  // namespace cesmark
