#include "cesmark/kalman.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

#include "cesmark/optim.hpp"
#include "cesmark/stats.hpp"

namespace cesmark {

namespace {

using Eigen::Matrix3d;
using Eigen::Vector3d;

Matrix3d shift_matrix() {
    Matrix3d F = Matrix3d::Zero();
    F(2, 1) = 1.0;
    return F;
}

Matrix3d state_noise(double sigma_H2) {
    Matrix3d Q = Matrix3d::Zero();
    Q(0, 0) = sigma_H2;  // G Sigma G'
    Q(1, 1) = 1.0;
    return Q;
}

struct FilterStore {
    std::vector<Vector3d> pi_pred, pi_filt;
    std::vector<Matrix3d> P_pred, P_filt;
    double loglik = 0;
    bool singular = false;
};

FilterStore run_filter(const StateSpaceSpec& spec, const StateSpaceSpec::Segment& seg,
                       double sigma_H2, bool keep_states) {
    const Matrix3d F = shift_matrix();
    const Matrix3d Q = state_noise(sigma_H2);
    const Vector3d Hrow(1.0, 1.0, -spec.rho_H);

    FilterStore st;
    Vector3d pi = Vector3d::Zero();
    Matrix3d P = Q;  // P_{0|0} = G Sigma G'
    KahanSum ll;
    for (const auto& step : seg.steps) {
        const Vector3d pi_pred = F * pi;
        Matrix3d P_pred = F * P * F.transpose() + Q;
        const double systematic = spec.rho_H * step.lag_omega_tilde +
                                  spec.beta_H1 * step.ida + spec.beta_H2 * step.imp_lag +
                                  step.iota;
        const double nu = step.omega_tilde - Hrow.dot(pi_pred) - systematic;
        const double N = Hrow.dot(P_pred * Hrow);
        if (!(N > 0) || !std::isfinite(N)) {
            st.singular = true;
            break;
        }
        const Vector3d gain = (P_pred * Hrow) / N;
        pi = pi_pred + gain * nu;
        P = (Matrix3d::Identity() - gain * Hrow.transpose()) * P_pred;
        P = 0.5 * (P + P.transpose());
        ll.add(-std::log(N) - nu * nu / N);
        if (keep_states) {
            st.pi_pred.push_back(pi_pred);
            st.P_pred.push_back(P_pred);
            st.pi_filt.push_back(pi);
            st.P_filt.push_back(P);
        }
    }
    st.loglik = ll.value();
    return st;
}

}  // namespace

StateSpaceSpec StateSpaceSpec::build(const Panel& panel, const std::vector<double>& omega_tilde,
                                     const std::map<int, double>& iota_H, double rho_H,
                                     double beta_H1, double beta_H2) {
    if (omega_tilde.size() != panel.size())
        throw ConfigError("omega_tilde series does not match the panel");
    StateSpaceSpec spec;
    spec.rho_H = rho_H;
    spec.beta_H1 = beta_H1;
    spec.beta_H2 = beta_H2;
    spec.n_panel_rows = static_cast<int>(panel.size());
    spec.omega_tilde_all = omega_tilde;

    std::map<std::string, std::vector<std::pair<int, int>>> by_plant;  // (year, row)
    for (int i = 0; i < static_cast<int>(panel.size()); ++i)
        by_plant[panel[i].plant_id].push_back({panel[i].year, i});

    for (auto& [plant, rows] : by_plant) {
        std::sort(rows.begin(), rows.end());
        PlantSeq seq;
        seq.plant_id = plant;
        Segment seg;
        int prev_year = std::numeric_limits<int>::min();
        int prev_row = -1;
        for (const auto& [year, row] : rows) {
            if (year != prev_year + 1) {
                if (!seg.steps.empty()) seq.segments.push_back(seg);
                seg = Segment{};
                seg.anchor_row = row;
                seg.anchor_omega_tilde = omega_tilde[row];
            } else {
                Step s;
                s.omega_tilde = omega_tilde[row];
                s.lag_omega_tilde = omega_tilde[prev_row];
                s.ida = panel[row].IDA;
                s.imp_lag = panel[row].Imp_lag;
                auto it = iota_H.find(year);
                if (it == iota_H.end())
                    throw ConfigError("missing iota_H year effect for year " +
                                      std::to_string(year));
                s.iota = it->second;
                s.panel_row = row;
                seg.steps.push_back(s);
            }
            prev_year = year;
            prev_row = row;
        }
        if (!seg.steps.empty()) seq.segments.push_back(seg);
        if (!seq.segments.empty()) spec.plants.push_back(std::move(seq));
    }
    return spec;
}

double kalman_loglik(const StateSpaceSpec& spec, double sigma_H2) {
    if (sigma_H2 < 0) throw ParameterError("sigma_H^2 must be nonnegative");
    KahanSum total;
    for (const auto& plant : spec.plants) {
        for (const auto& seg : plant.segments) {
            const FilterStore st = run_filter(spec, seg, sigma_H2, false);
            if (st.singular) return -std::numeric_limits<double>::infinity();
            total.add(st.loglik);
        }
    }
    return total.value();
}

SigmaHEstimate estimate_sigma_H(const StateSpaceSpec& spec) {
    // Scale the search window from the dispersion of the residual series.
    std::vector<double> resid;
    for (const auto& plant : spec.plants)
        for (const auto& seg : plant.segments)
            for (const auto& s : seg.steps)
                resid.push_back(s.omega_tilde - spec.rho_H * s.lag_omega_tilde);
    const double spread = sample_sd(resid);
    const double hi = std::max(1.0, 10.0 * spread * spread);

    auto neg = [&](double s2) { return -kalman_loglik(spec, std::max(0.0, s2)); };
    double s2 = minimize_scalar(neg, 0.0, hi, 1e-12);

    SigmaHEstimate est;
    est.sigma_H2 = std::max(0.0, s2);
    est.sigma_H = std::sqrt(est.sigma_H2);
    est.loglik = kalman_loglik(spec, est.sigma_H2);
    est.at_boundary = est.sigma_H2 < 1e-6 * hi;

    // Observed information: the printed likelihood is twice the normal one.
    const double h = std::max(1e-5, 1e-3 * est.sigma_H2);
    if (est.sigma_H2 - h >= 0) {
        const double d2 = (kalman_loglik(spec, est.sigma_H2 + h) - 2.0 * est.loglik +
                           kalman_loglik(spec, est.sigma_H2 - h)) /
                          (h * h);
        const double info = -0.5 * d2;
        if (info > 0) {
            const double se_s2 = std::sqrt(1.0 / info);
            est.se = est.sigma_H > 0 ? se_s2 / (2.0 * est.sigma_H) : se_s2;
        }
    }
    return est;
}

SmootherOutput kalman_smooth(const StateSpaceSpec& spec, double sigma_H2) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    SmootherOutput out;
    out.sigma_H2 = sigma_H2;
    out.xi_H_hat.assign(spec.n_panel_rows, nan);
    out.eps_hat.assign(spec.n_panel_rows, nan);
    out.omega_H_hat.assign(spec.n_panel_rows, nan);

    const Matrix3d F = shift_matrix();
    KahanSum total;
    for (const auto& plant : spec.plants) {
        for (const auto& seg : plant.segments) {
            FilterStore st = run_filter(spec, seg, sigma_H2, true);
            if (st.singular) throw EstimationError("singular innovation variance in smoother");
            total.add(st.loglik);
            const int n = static_cast<int>(seg.steps.size());
            std::vector<Vector3d> smooth(n);
            smooth[n - 1] = st.pi_filt[n - 1];
            for (int k = n - 2; k >= 0; --k) {
                const Matrix3d& Pp = st.P_pred[k + 1];
                Matrix3d Pp_inv;
                const double det = Pp.determinant();
                if (std::abs(det) < 1e-300) {
                    Pp_inv = Pp.completeOrthogonalDecomposition().pseudoInverse();
                    out.used_pseudo_inverse = true;
                } else {
                    Pp_inv = Pp.inverse();
                }
                const Matrix3d C = st.P_filt[k] * F.transpose() * Pp_inv;
                smooth[k] = st.pi_filt[k] + C * (smooth[k + 1] - st.pi_pred[k + 1]);
            }
            for (int k = 0; k < n; ++k) {
                const int row = seg.steps[k].panel_row;
                out.xi_H_hat[row] = smooth[k][0];
                out.eps_hat[row] = smooth[k][1];
                out.omega_H_hat[row] = seg.steps[k].omega_tilde - smooth[k][1];
            }
            // The anchor's measurement error is the third smoothed element of
            // the first step.
            out.eps_hat[seg.anchor_row] = smooth[0][2];
            out.omega_H_hat[seg.anchor_row] = seg.anchor_omega_tilde - smooth[0][2];
        }
    }
    out.loglik = total.value();

    // Rows outside any segment carry no information to split the residual.
    for (int i = 0; i < spec.n_panel_rows; ++i)
        if (std::isnan(out.omega_H_hat[i])) out.omega_H_hat[i] = spec.omega_tilde_all[i];
    return out;
}

}  // namespace cesmark
