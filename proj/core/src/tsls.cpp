#include "cesmark/tsls.hpp"

#include <cmath>
#include <limits>
#include <map>

#include "cesmark/stats.hpp"

namespace cesmark {

double IvResult::coef_of(const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
        if (names[i] == name) return coef[static_cast<int>(i)];
    throw ConfigError("no regressor named " + name);
}

double IvResult::se_of(const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
        if (names[i] == name) return se_cluster[static_cast<int>(i)];
    throw ConfigError("no regressor named " + name);
}

namespace {

void check_full_rank(const Eigen::MatrixXd& A, const std::vector<std::string>& names,
                     const char* stage) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
    qr.setThreshold(1e-10);
    if (qr.rank() < A.cols()) {
        std::string msg = std::string(stage) + " rank deficient; suspect columns:";
        const auto& perm = qr.colsPermutation().indices();
        for (int k = qr.rank(); k < A.cols(); ++k) {
            const int col = perm[k];
            msg += " " + (col < static_cast<int>(names.size()) ? names[col]
                                                               : std::to_string(col));
        }
        throw EstimationError(msg);
    }
}

}  // namespace

IvResult tsls(const Eigen::VectorXd& y, const Eigen::MatrixXd& X_endog,
              const Eigen::MatrixXd& X_exog, const Eigen::MatrixXd& Z,
              const std::vector<std::string>& cluster_ids,
              const std::vector<std::string>& endog_names,
              const std::vector<std::string>& exog_names) {
    const int N = static_cast<int>(y.size());
    const int ke = static_cast<int>(X_endog.cols());
    const int kx = static_cast<int>(X_exog.cols());
    const int q = static_cast<int>(Z.cols());
    const int K = ke + kx;
    if (N <= K) throw EstimationError("fewer observations than parameters");
    if (q < ke) throw EstimationError("fewer excluded instruments than endogenous regressors");

    Eigen::MatrixXd X(N, K);
    X << X_endog, X_exog;
    Eigen::MatrixXd Zf(N, q + kx);
    Zf << Z, X_exog;

    std::vector<std::string> znames;
    for (int k = 0; k < q; ++k) znames.push_back("z" + std::to_string(k));
    znames.insert(znames.end(), exog_names.begin(), exog_names.end());
    check_full_rank(Zf, znames, "instrument matrix");

    std::vector<std::string> names = endog_names;
    names.insert(names.end(), exog_names.begin(), exog_names.end());

    const Eigen::MatrixXd ZtZ = Zf.transpose() * Zf;
    const Eigen::LDLT<Eigen::MatrixXd> ZtZ_solver(ZtZ);
    const Eigen::MatrixXd Xhat = Zf * ZtZ_solver.solve(Zf.transpose() * X);
    check_full_rank(Xhat, names, "first-stage projection");

    const Eigen::MatrixXd XtX = Xhat.transpose() * Xhat;
    const Eigen::LDLT<Eigen::MatrixXd> XtX_solver(XtX);
    IvResult res;
    res.names = names;
    res.n_obs = N;
    res.coef = XtX_solver.solve(Xhat.transpose() * y);

    const Eigen::VectorXd u = y - X * res.coef;
    const Eigen::MatrixXd bread = XtX_solver.solve(Eigen::MatrixXd::Identity(K, K));

    // HC1 sandwich on the projected regressors.
    Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(K, K);
    for (int i = 0; i < N; ++i) {
        const Eigen::VectorXd xi = Xhat.row(i).transpose();
        meat += xi * xi.transpose() * (u[i] * u[i]);
    }
    const double hc1 = static_cast<double>(N) / static_cast<double>(N - K);
    Eigen::MatrixXd V = bread * meat * bread * hc1;
    res.se_robust = V.diagonal().cwiseMax(0.0).cwiseSqrt();

    if (!cluster_ids.empty()) {
        if (static_cast<int>(cluster_ids.size()) != N)
            throw ConfigError("cluster id length mismatch");
        std::map<std::string, Eigen::VectorXd> sums;
        for (int i = 0; i < N; ++i) {
            auto [it, inserted] = sums.try_emplace(cluster_ids[i], Eigen::VectorXd::Zero(K));
            it->second += Xhat.row(i).transpose() * u[i];
        }
        Eigen::MatrixXd cmeat = Eigen::MatrixXd::Zero(K, K);
        for (const auto& [id, g] : sums) cmeat += g * g.transpose();
        const double G = static_cast<double>(sums.size());
        res.n_clusters = static_cast<int>(sums.size());
        const double corr = G / (G - 1.0) * static_cast<double>(N - 1) /
                            static_cast<double>(N - K);
        const Eigen::MatrixXd Vc = bread * cmeat * bread * corr;
        res.se_cluster = Vc.diagonal().cwiseMax(0.0).cwiseSqrt();
    } else {
        res.se_cluster = res.se_robust;
        res.n_clusters = N;
    }

    // Plain first-stage F per endogenous regressor: excluded instruments
    // jointly, homoskedastic form.
    const Eigen::MatrixXd exog_only = X_exog;
    for (int e = 0; e < ke; ++e) {
        const Eigen::VectorXd target = X_endog.col(e);
        const Eigen::VectorXd bu = (Zf.transpose() * Zf)
                                       .ldlt()
                                       .solve(Zf.transpose() * target);
        const double rss_u = (target - Zf * bu).squaredNorm();
        double rss_r;
        if (kx > 0) {
            const Eigen::VectorXd br =
                (exog_only.transpose() * exog_only).ldlt().solve(exog_only.transpose() * target);
            rss_r = (target - exog_only * br).squaredNorm();
        } else {
            rss_r = target.squaredNorm();
        }
        const int df_u = N - (q + kx);
        res.first_stage_F.push_back(((rss_r - rss_u) / q) / (rss_u / df_u));
    }

    // Hansen J at the 2SLS point when over-identified.
    res.hansen_df = q - ke;
    if (res.hansen_df > 0) {
        const int nz = q + kx;
        Eigen::VectorXd gbar = Eigen::VectorXd::Zero(nz);
        Eigen::MatrixXd S = Eigen::MatrixXd::Zero(nz, nz);
        for (int i = 0; i < N; ++i) {
            const Eigen::VectorXd g = Zf.row(i).transpose() * u[i];
            gbar += g;
            S += g * g.transpose();
        }
        gbar /= static_cast<double>(N);
        S /= static_cast<double>(N);
        const Eigen::VectorXd Sg = S.ldlt().solve(gbar);
        res.hansen_J = static_cast<double>(N) * gbar.dot(Sg);
        res.hansen_p = chi2_sf(res.hansen_J, res.hansen_df);
    } else {
        res.hansen_J = 0;
        res.hansen_p = std::numeric_limits<double>::quiet_NaN();
    }
    return res;
}

IvResult ols(const Eigen::VectorXd& y, const Eigen::MatrixXd& X,
             const std::vector<std::string>& cluster_ids,
             const std::vector<std::string>& names) {
    const Eigen::MatrixXd empty(X.rows(), 0);
    return tsls(y, X, empty, X, cluster_ids, names, {});
}

}  // namespace cesmark
