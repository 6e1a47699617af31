#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <utility>
#include <vector>

#include "cesmark/rng.hpp"

namespace cesmark {

using Bounds = std::vector<std::pair<double, double>>;

struct OptimOptions {
    int multistarts = 8;
    int nm_max_iter = 2000;
    double nm_ftol = 1e-13;
    double nm_xtol = 1e-11;
    int bfgs_max_iter = 300;
    double bfgs_gtol = 1e-10;
    std::uint64_t seed = 12345;
    // Caller-provided start points (warm starts), tried in addition to the
    // latin-hypercube draws; counted against `multistarts`.
    std::vector<std::vector<double>> extra_starts;
};

struct OptimResult {
    std::vector<double> x;
    double f = std::numeric_limits<double>::infinity();
    bool converged = false;
    int evaluations = 0;
};

namespace optdetail {

// Bounded search runs in an unconstrained space via x = mid + half*tanh(u).
inline double to_bounded(double u, double lo, double hi) {
    return 0.5 * (lo + hi) + 0.5 * (hi - lo) * std::tanh(u);
}
inline double to_unbounded(double x, double lo, double hi) {
    double z = (2.0 * x - lo - hi) / (hi - lo);
    z = std::clamp(z, -1.0 + 1e-12, 1.0 - 1e-12);
    return std::atanh(z);
}

template <typename F>
class TransformedObjective {
  public:
    TransformedObjective(F& f, const Bounds& b) : f_(f), b_(b) {}

    double operator()(const std::vector<double>& u) {
        std::vector<double> x(u.size());
        for (std::size_t i = 0; i < u.size(); ++i)
            x[i] = to_bounded(u[i], b_[i].first, b_[i].second);
        ++evals_;
        const double v = f_(x);
        return std::isfinite(v) ? v : 1e100;
    }
    int evaluations() const { return evals_; }

  private:
    F& f_;
    const Bounds& b_;
    int evals_ = 0;
};

}  // namespace optdetail

/// Nelder-Mead simplex with adaptive coefficients, minimizing f over R^n.
template <typename F>
OptimResult nelder_mead(F&& f, std::vector<double> x0, double scale, int max_iter, double ftol,
                        double xtol) {
    const std::size_t n = x0.size();
    const double alpha = 1.0, gamma = 1.0 + 2.0 / static_cast<double>(n);
    const double rho = 0.75 - 0.5 / static_cast<double>(n);
    const double sigma = 1.0 - 1.0 / static_cast<double>(n);

    std::vector<std::vector<double>> pts(n + 1, x0);
    std::vector<double> fv(n + 1);
    for (std::size_t i = 0; i < n; ++i) pts[i + 1][i] += scale * std::max(1.0, std::abs(x0[i]));
    int evals = 0;
    for (std::size_t i = 0; i <= n; ++i) {
        fv[i] = f(pts[i]);
        ++evals;
    }

    OptimResult res;
    std::vector<std::size_t> order(n + 1);
    for (int it = 0; it < max_iter; ++it) {
        for (std::size_t i = 0; i <= n; ++i) order[i] = i;
        std::sort(order.begin(), order.end(),
                  [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
        const std::size_t best = order[0], worst = order[n], second = order[n - 1];

        double fspread = std::abs(fv[worst] - fv[best]);
        double xspread = 0;
        for (std::size_t i = 0; i < n; ++i)
            xspread = std::max(xspread, std::abs(pts[worst][i] - pts[best][i]));
        if (fspread < ftol * (std::abs(fv[best]) + ftol) && xspread < xtol) {
            res.converged = true;
            break;
        }

        std::vector<double> centroid(n, 0.0);
        for (std::size_t i = 0; i <= n; ++i) {
            if (i == worst) continue;
            for (std::size_t k = 0; k < n; ++k) centroid[k] += pts[i][k];
        }
        for (std::size_t k = 0; k < n; ++k) centroid[k] /= static_cast<double>(n);

        auto blend = [&](double t) {
            std::vector<double> p(n);
            for (std::size_t k = 0; k < n; ++k)
                p[k] = centroid[k] + t * (centroid[k] - pts[worst][k]);
            return p;
        };

        std::vector<double> xr = blend(alpha);
        const double fr = f(xr);
        ++evals;
        if (fr < fv[order[0]]) {
            std::vector<double> xe = blend(gamma);
            const double fe = f(xe);
            ++evals;
            if (fe < fr) {
                pts[worst] = std::move(xe);
                fv[worst] = fe;
            } else {
                pts[worst] = std::move(xr);
                fv[worst] = fr;
            }
        } else if (fr < fv[second]) {
            pts[worst] = std::move(xr);
            fv[worst] = fr;
        } else {
            const bool outside = fr < fv[worst];
            std::vector<double> xc = blend(outside ? rho : -rho);
            const double fc = f(xc);
            ++evals;
            if (fc < std::min(fr, fv[worst])) {
                pts[worst] = std::move(xc);
                fv[worst] = fc;
            } else {
                for (std::size_t i = 0; i <= n; ++i) {
                    if (i == best) continue;
                    for (std::size_t k = 0; k < n; ++k)
                        pts[i][k] = pts[best][k] + sigma * (pts[i][k] - pts[best][k]);
                    fv[i] = f(pts[i]);
                    ++evals;
                }
            }
        }
    }
    std::size_t ibest = 0;
    for (std::size_t i = 1; i <= n; ++i)
        if (fv[i] < fv[ibest]) ibest = i;
    res.x = pts[ibest];
    res.f = fv[ibest];
    res.evaluations = evals;
    return res;
}

/// BFGS with central-difference gradients and backtracking line search.
template <typename F>
OptimResult bfgs(F&& f, std::vector<double> x0, int max_iter, double gtol) {
    const std::size_t n = x0.size();
    OptimResult res;
    res.x = x0;
    res.f = f(x0);
    ++res.evaluations;

    auto grad = [&](const std::vector<double>& x) {
        std::vector<double> g(n);
        std::vector<double> xp = x;
        for (std::size_t i = 0; i < n; ++i) {
            const double h = 1e-6 * std::max(1.0, std::abs(x[i]));
            xp[i] = x[i] + h;
            const double fp = f(xp);
            xp[i] = x[i] - h;
            const double fm = f(xp);
            xp[i] = x[i];
            g[i] = (fp - fm) / (2.0 * h);
            res.evaluations += 2;
        }
        return g;
    };

    std::vector<std::vector<double>> Hinv(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) Hinv[i][i] = 1.0;
    std::vector<double> g = grad(res.x);

    for (int it = 0; it < max_iter; ++it) {
        double gn = 0;
        for (double v : g) gn = std::max(gn, std::abs(v));
        if (gn < gtol) {
            res.converged = true;
            break;
        }
        std::vector<double> d(n, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t k = 0; k < n; ++k) d[i] -= Hinv[i][k] * g[k];

        double slope = 0;
        for (std::size_t i = 0; i < n; ++i) slope += d[i] * g[i];
        if (slope >= 0) {  // reset to steepest descent
            for (std::size_t i = 0; i < n; ++i) {
                std::fill(Hinv[i].begin(), Hinv[i].end(), 0.0);
                Hinv[i][i] = 1.0;
                d[i] = -g[i];
            }
            slope = 0;
            for (std::size_t i = 0; i < n; ++i) slope += d[i] * g[i];
            if (slope >= 0) break;
        }

        double step = 1.0;
        std::vector<double> xn(n);
        double fn = res.f;
        bool accepted = false;
        for (int ls = 0; ls < 40; ++ls) {
            for (std::size_t i = 0; i < n; ++i) xn[i] = res.x[i] + step * d[i];
            fn = f(xn);
            ++res.evaluations;
            if (fn <= res.f + 1e-4 * step * slope) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;

        std::vector<double> gn_vec = grad(xn);
        std::vector<double> s(n), y(n);
        double sy = 0;
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = xn[i] - res.x[i];
            y[i] = gn_vec[i] - g[i];
            sy += s[i] * y[i];
        }
        if (sy > 1e-14) {
            // BFGS inverse update.
            std::vector<double> Hy(n, 0.0);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t k = 0; k < n; ++k) Hy[i] += Hinv[i][k] * y[k];
            double yHy = 0;
            for (std::size_t i = 0; i < n; ++i) yHy += y[i] * Hy[i];
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t k = 0; k < n; ++k)
                    Hinv[i][k] += ((sy + yHy) * s[i] * s[k]) / (sy * sy) -
                                  (Hy[i] * s[k] + s[i] * Hy[k]) / sy;
        }
        res.x = xn;
        res.f = fn;
        g = std::move(gn_vec);
    }
    return res;
}

/// Latin hypercube start points over the given box.
inline std::vector<std::vector<double>> latin_hypercube(const Bounds& bounds, int n_points,
                                                        Rng& rng) {
    const std::size_t dim = bounds.size();
    std::vector<std::vector<double>> pts(n_points, std::vector<double>(dim));
    for (std::size_t d = 0; d < dim; ++d) {
        std::vector<int> perm(n_points);
        for (int i = 0; i < n_points; ++i) perm[i] = i;
        for (int i = n_points - 1; i > 0; --i)
            std::swap(perm[i], perm[static_cast<int>(rng.integer(static_cast<std::uint64_t>(i + 1)))]);
        for (int i = 0; i < n_points; ++i) {
            const double u = (perm[i] + rng.uniform()) / static_cast<double>(n_points);
            pts[i][d] = bounds[d].first + u * (bounds[d].second - bounds[d].first);
        }
    }
    return pts;
}

/// Multi-start bounded minimization: Nelder-Mead then BFGS polish from each
/// latin-hypercube start (plus any caller-provided starts), best kept.
template <typename F>
OptimResult minimize_multistart(F&& f, const Bounds& bounds, const OptimOptions& opts,
                                const std::vector<std::vector<double>>& extra_starts = {}) {
    Rng rng(opts.seed);
    std::vector<std::vector<double>> starts = extra_starts;
    if (opts.multistarts > static_cast<int>(extra_starts.size())) {
        auto lhs = latin_hypercube(bounds, opts.multistarts - static_cast<int>(extra_starts.size()),
                                   rng);
        starts.insert(starts.end(), lhs.begin(), lhs.end());
    }

    optdetail::TransformedObjective<F> obj(f, bounds);
    OptimResult best;
    for (const auto& s : starts) {
        std::vector<double> u0(s.size());
        for (std::size_t i = 0; i < s.size(); ++i)
            u0[i] = optdetail::to_unbounded(s[i], bounds[i].first, bounds[i].second);
        OptimResult nm =
            nelder_mead(obj, u0, 0.25, opts.nm_max_iter, opts.nm_ftol, opts.nm_xtol);
        OptimResult pol = bfgs(obj, nm.x, opts.bfgs_max_iter, opts.bfgs_gtol);
        const OptimResult& cand = pol.f <= nm.f ? pol : nm;
        if (cand.f < best.f) {
            best = cand;
            best.converged = nm.converged || pol.converged;
        }
    }
    best.evaluations = obj.evaluations();
    std::vector<double> x(best.x.size());
    for (std::size_t i = 0; i < x.size(); ++i)
        x[i] = optdetail::to_bounded(best.x[i], bounds[i].first, bounds[i].second);
    best.x = x;
    return best;
}

/// Safeguarded golden-section minimization on [lo, hi] for scalar problems.
template <typename F>
double minimize_scalar(F&& f, double lo, double hi, double tol = 1e-10, int max_iter = 200) {
    const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo, b = hi;
    double c = b - invphi * (b - a);
    double d = a + invphi * (b - a);
    double fc = f(c), fd = f(d);
    for (int i = 0; i < max_iter && (b - a) > tol * (1.0 + std::abs(a) + std::abs(b)); ++i) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - invphi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + invphi * (b - a);
            fd = f(d);
        }
    }
    return 0.5 * (a + b);
}

}  // namespace cesmark
