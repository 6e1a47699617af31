#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "cesmark/types.hpp"

namespace cesmark {

struct IvResult {
    std::vector<std::string> names;  // endogenous first, then exogenous
    Eigen::VectorXd coef;
    Eigen::VectorXd se_robust;   // HC1
    Eigen::VectorXd se_cluster;  // by cluster id; equals se_robust when no ids given
    std::vector<double> first_stage_F;  // per endogenous regressor
    double hansen_J = 0;
    double hansen_p = 1;
    int hansen_df = 0;
    int n_obs = 0;
    int n_clusters = 0;

    double coef_of(const std::string& name) const;
    double se_of(const std::string& name) const;  // cluster se
};

/// Two-stage least squares with heteroskedasticity-robust and
/// cluster-robust covariance. Z holds the excluded instruments only; the
/// exogenous regressors instrument themselves. Throws EstimationError
/// naming the collinear columns when the first stage is rank deficient.
IvResult tsls(const Eigen::VectorXd& y, const Eigen::MatrixXd& X_endog,
              const Eigen::MatrixXd& X_exog, const Eigen::MatrixXd& Z,
              const std::vector<std::string>& cluster_ids,
              const std::vector<std::string>& endog_names,
              const std::vector<std::string>& exog_names);

/// OLS as the Z = X_endog special case.
IvResult ols(const Eigen::VectorXd& y, const Eigen::MatrixXd& X,
             const std::vector<std::string>& cluster_ids,
             const std::vector<std::string>& names);

}  // namespace cesmark
