#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

#include "cesmark/optim.hpp"
#include "cesmark/types.hpp"

namespace cesmark {

/// Moment system E[z_i * resid_i(theta)] = 0 over a fixed dataset.
///
/// Parameters split into a nonlinear head and a linear tail:
///   resid_i(theta) = base_i(nl) - regressors_i(nl)' * lambda
/// The linear tail (lambda) is concentrated out in closed form during
/// optimization; year effects are ordinary linear parameters with their own
/// dummy instruments. Systems with no linear tail set n_linear = 0 and put
/// the full residual in `base`.
struct MomentSystem {
    int n_obs = 0;
    int n_nonlinear = 0;
    int n_linear = 0;
    int n_instruments = 0;

    std::vector<std::string> param_names;       // nonlinear then linear
    std::vector<std::string> instrument_names;  // size n_instruments
    Bounds nonlinear_bounds;                    // size n_nonlinear

    std::function<double(const std::vector<double>& nl, int i)> base;
    std::function<void(const std::vector<double>& nl, int i, Eigen::VectorXd&)> regressors;
    std::function<void(const std::vector<double>& nl, int i, Eigen::VectorXd&)> instruments;

    int n_params() const { return n_nonlinear + n_linear; }

    /// Residual at a full parameter vector [nl..., lambda...].
    double residual(const std::vector<double>& params, int i) const;

    /// Instrument vector at a full parameter vector.
    Eigen::VectorXd instrument_vector(const std::vector<double>& params, int i) const;
};

enum class Weighting { Identity, TwoStepOptimal };

struct GmmResult {
    std::vector<double> estimates;      // nonlinear then linear
    std::vector<std::string> param_names;
    double objective = 0;               // gbar' W gbar at the solution
    double J = 0;                       // N * objective under the final weighting
    double J_pvalue = 1;                // chi-squared survival, df = n_inst - n_par
    int J_df = 0;
    std::vector<double> instrument_residual_corr;
    bool converged = false;
    bool weighting_ridged = false;      // singular second-step weighting regularized
    std::vector<std::string> pinned_at_bound;  // nonlinear parameters at a bound
    double jacobian_condition = 0;
    int jacobian_rank = 0;

    double estimate(const std::string& name) const;
};

struct GmmOptions {
    OptimOptions optimizer;
    double bound_pin_tol = 1e-4;  // relative to the bound range
    bool compute_rank = true;
};

GmmResult gmm_estimate(const MomentSystem& system, Weighting weighting, const GmmOptions& opts);

struct RankCheck {
    int rank = 0;
    double condition = 0;
    Eigen::MatrixXd jacobian;
};

/// Central-difference Jacobian of the stacked sample moments with respect to
/// the full parameter vector, with the rank read off at 1e-7 * sigma_max.
RankCheck identification_rank_check(const MomentSystem& system,
                                    const std::vector<double>& params_at);

/// Sample moment vector gbar(theta) = mean_i z_i * resid_i.
Eigen::VectorXd sample_moments(const MomentSystem& system, const std::vector<double>& params);

}  // namespace cesmark
