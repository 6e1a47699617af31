#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

namespace cesmark {

/// Compensated (Kahan) accumulator for order-stable reductions.
class KahanSum {
  public:
    void add(double x) {
        const double y = x - c_;
        const double t = s_ + y;
        c_ = (t - s_) - y;
        s_ = t;
    }
    double value() const { return s_; }

  private:
    double s_ = 0, c_ = 0;
};

namespace detail {

/// Regularized lower incomplete gamma P(a, x), series + continued fraction.
inline double gamma_p(double a, double x) {
    if (x < 0 || a <= 0) return std::numeric_limits<double>::quiet_NaN();
    if (x == 0) return 0.0;
    const double gln = std::lgamma(a);
    if (x < a + 1.0) {
        double ap = a, sum = 1.0 / a, del = sum;
        for (int i = 0; i < 500; ++i) {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if (std::abs(del) < std::abs(sum) * 1e-16) break;
        }
        return sum * std::exp(-x + a * std::log(x) - gln);
    }
    // Lentz continued fraction for Q(a,x).
    double b = x + 1.0 - a, c = 1e308, d = 1.0 / b, h = d;
    for (int i = 1; i <= 500; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < 1e-300) d = 1e-300;
        c = b + an / c;
        if (std::abs(c) < 1e-300) c = 1e-300;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < 1e-16) break;
    }
    const double q = std::exp(-x + a * std::log(x) - gln) * h;
    return 1.0 - q;
}

}  // namespace detail

/// Survival function of the chi-squared distribution with df degrees of freedom.
inline double chi2_sf(double x, double df) {
    if (df <= 0) return std::numeric_limits<double>::quiet_NaN();
    if (x <= 0) return 1.0;
    return 1.0 - detail::gamma_p(0.5 * df, 0.5 * x);
}

inline double mean(const std::vector<double>& v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    KahanSum s;
    for (double x : v) s.add(x);
    return s.value() / static_cast<double>(v.size());
}

inline double sample_sd(const std::vector<double>& v) {
    if (v.size() < 2) return std::numeric_limits<double>::quiet_NaN();
    const double m = mean(v);
    KahanSum s;
    for (double x : v) s.add((x - m) * (x - m));
    return std::sqrt(s.value() / static_cast<double>(v.size() - 1));
}

inline double quantile(std::vector<double> v, double p) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    const double idx = p * static_cast<double>(v.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(idx));
    const std::size_t hi = static_cast<std::size_t>(std::ceil(idx));
    const double w = idx - static_cast<double>(lo);
    return v[lo] * (1.0 - w) + v[hi] * w;
}

inline double median(const std::vector<double>& v) { return quantile(v, 0.5); }

struct SummaryStats {
    double median = 0, mean = 0, sd = 0, iqr = 0, max = 0, min = 0;
    std::size_t n = 0;
};

inline SummaryStats summarize(const std::vector<double>& v) {
    SummaryStats s;
    s.n = v.size();
    if (v.empty()) return s;
    s.mean = mean(v);
    s.sd = sample_sd(v);
    s.median = median(v);
    s.iqr = quantile(v, 0.75) - quantile(v, 0.25);
    s.max = *std::max_element(v.begin(), v.end());
    s.min = *std::min_element(v.begin(), v.end());
    return s;
}

/// Weighted mean and its standard error, weights as given (not normalized).
struct WeightedMean {
    double mean = 0, se = 0;
    std::size_t n = 0;
};

inline WeightedMean weighted_mean(const std::vector<double>& x, const std::vector<double>& w) {
    if (x.size() != w.size()) throw std::invalid_argument("weighted_mean: size mismatch");
    WeightedMean out;
    out.n = x.size();
    if (x.empty()) return out;
    KahanSum sw, swx;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sw.add(w[i]);
        swx.add(w[i] * x[i]);
    }
    out.mean = swx.value() / sw.value();
    KahanSum dev;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = x[i] - out.mean;
        dev.add(w[i] * w[i] * d * d);
    }
    out.se = std::sqrt(dev.value()) / sw.value();
    return out;
}

inline double correlation(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size() || a.size() < 2) return std::numeric_limits<double>::quiet_NaN();
    const double ma = mean(a), mb = mean(b);
    KahanSum sab, saa, sbb;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab.add((a[i] - ma) * (b[i] - mb));
        saa.add((a[i] - ma) * (a[i] - ma));
        sbb.add((b[i] - mb) * (b[i] - mb));
    }
    return sab.value() / std::sqrt(saa.value() * sbb.value());
}

/// OLS slope of y on x with intercept; used for trend summaries in reports.
inline double ols_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const double mx = mean(x), my = mean(y);
    KahanSum sxy, sxx;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy.add((x[i] - mx) * (y[i] - my));
        sxx.add((x[i] - mx) * (x[i] - mx));
    }
    return sxy.value() / sxx.value();
}

}  // namespace cesmark
