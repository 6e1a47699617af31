#include <doctest.h>

#include <cmath>
#include <random>

#include "cesmark/production.hpp"
#include "cesmark/rng.hpp"

using namespace cesmark;

namespace {

GeometricMeans fixture_means() {
    GeometricMeans g;
    g.Q = 3.0;
    g.K = 50.0;
    g.M = 40.0;
    g.H = 20.0;
    g.C = 30.0;
    g.D = 25.0;
    g.W_H = 5.0;
    g.W_C = 1.0;
    g.W_D = 3.0;
    g.P_M = 2.0;
    g.B = 1.0;
    g.W_B = g.W_C * g.C + g.W_D * g.D;  // 105
    g.L = 1.0;
    g.W_L = g.W_H * g.H + g.W_B * g.B;  // 205
    return g;
}

ProductionParams fixture_params(double tau = 0.376) {
    ProductionParams p;
    p.sigma_O = 0.501;
    p.sigma_M = 0.773;
    p.sigma_I = 0.222;
    p.tau = tau;
    p.means = fixture_means();
    p.worker = worker_shares_from_means(p.means);
    p.input = shares_from_tau(tau, p.means);
    return p;
}

// Observation sitting exactly at the normalization baseline.
PanelObservation baseline_obs(const GeometricMeans& g) {
    PanelObservation o;
    o.plant_id = "p";
    o.year = 2001;
    o.K = g.K;
    o.M = g.M;
    o.H = g.H;
    o.C = g.C;
    o.D = g.D;
    o.W_H = g.W_H;
    o.W_C = g.W_C;
    o.W_D = g.W_D;
    o.P_M = g.P_M;
    o.P = 1.0;
    o.Q_obs = g.Q;
    return o;
}

}  // namespace

TEST_CASE("blue-collar nest") {
    ProductionParams p = fixture_params();

    SUBCASE("baseline point is 1 for any admissible shares") {
        CHECK(blue_collar_nest(1.0, 1.0, p) == doctest::Approx(1.0).epsilon(1e-14));
    }
    SUBCASE("sigma -> 1 is linear aggregation") {
        CHECK(blue_collar_nest(2.0, 4.0, 0.5, 0.5, 1.0) == doctest::Approx(3.0));
        // continuity at the limit
        CHECK(blue_collar_nest(2.0, 4.0, 0.5, 0.5, 1.0 - 1e-8) ==
              doctest::Approx(3.0).epsilon(1e-6));
    }
    SUBCASE("frozen high-precision value") {
        const double v = blue_collar_nest(2.0, 0.5, 0.307, 0.693, 0.222);
        CHECK(v == doctest::Approx(0.80212925815219547).epsilon(1e-12));
    }
    SUBCASE("nonpositive input rejected") {
        CHECK_THROWS_AS(blue_collar_nest(0.0, 1.0, p), DomainError);
        CHECK_THROWS_AS(blue_collar_nest(1.0, -2.0, p), DomainError);
    }
}

TEST_CASE("labor nest") {
    ProductionParams p = fixture_params();
    CHECK(labor_nest(1.0, 1.0, p) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(labor_nest(1.0, 3.0, 0.5, 0.5, 1.0) == doctest::Approx(2.0));
    CHECK(labor_nest(1.5, 0.8, 0.449, 0.551, 0.773) ==
          doctest::Approx(1.1020157516716804).epsilon(1e-12));
}

TEST_CASE("planned output") {
    ProductionParams p = fixture_params();

    SUBCASE("baseline point returns Qbar") {
        CHECK(planned_output(1, 1, 1, 0, 0, p) == doctest::Approx(p.means.Q).epsilon(1e-13));
    }
    SUBCASE("Hicks-neutral scaling") {
        CHECK(planned_output(1, 1, 1, 0, std::log(2.0), p) ==
              doctest::Approx(2.0 * p.means.Q).epsilon(1e-13));
    }
    SUBCASE("frozen high-precision value with published shares") {
        ProductionParams q = p;
        q.means.Q = 1.0;
        q.input = InputShares{0.256, 0.680, 0.064};
        CHECK(planned_output(1.2, 0.9, 1.1, 0.1, -0.05, q) ==
              doctest::Approx(0.9438405767629506).epsilon(1e-12));
    }
    SUBCASE("degree-1 homogeneity of the kernel in (K, M, effective L)") {
        Rng rng(7);
        for (int i = 0; i < 20; ++i) {
            const double K = rng.lognormal(0, 0.5), M = rng.lognormal(0, 0.5);
            const double L = rng.lognormal(0, 0.5), wl = rng.normal(0, 0.3);
            const double lam = rng.lognormal(0, 0.7);
            const double q1 = planned_output(K, M, L, wl, 0.0, p);
            const double q2 = planned_output(lam * K, lam * M, lam * L, wl, 0.0, p);
            CHECK(q2 == doctest::Approx(lam * q1).epsilon(1e-11));
        }
    }
}

TEST_CASE("top-nest shares from tau") {
    SUBCASE("symmetric expenditures at tau = 1") {
        GeometricMeans g = fixture_means();
        g.P_M = 1.0;
        g.M = 205.0;  // PmM = WlL = 205
        const InputShares s = shares_from_tau(1.0, g);
        CHECK(s.alpha_K == doctest::Approx(1.0 / 3).epsilon(1e-14));
        CHECK(s.alpha_M == doctest::Approx(1.0 / 3).epsilon(1e-14));
        CHECK(s.alpha_L == doctest::Approx(1.0 / 3).epsilon(1e-14));
    }
    SUBCASE("published share table at tau = 0.376") {
        GeometricMeans g = fixture_means();
        g.P_M = 1.0;
        g.M = 1.0;
        g.W_L = 0.064 / 0.680;  // labor-to-materials expenditure ratio of the table
        g.L = 1.0;
        const InputShares s = shares_from_tau(0.376, g);
        CHECK(s.alpha_M == doctest::Approx(0.680).epsilon(5e-4));
        CHECK(s.alpha_K == doctest::Approx(0.256).epsilon(2e-3));
        CHECK(s.alpha_L == doctest::Approx(0.064).epsilon(2e-3));
        CHECK(s.alpha_K == doctest::Approx(0.376 * s.alpha_M).epsilon(1e-14));
    }
    SUBCASE("tau -> 0 removes the capital share") {
        const InputShares s = shares_from_tau(1e-12, fixture_means());
        CHECK(s.alpha_K < 1e-11);
    }
    SUBCASE("adding-up and alpha_K = tau alpha_M hold to machine precision") {
        Rng rng(3);
        const GeometricMeans g = fixture_means();
        for (int i = 0; i < 50; ++i) {
            const double tau = rng.lognormal(0, 1.0);
            const InputShares s = shares_from_tau(tau, g);
            CHECK(std::abs(s.alpha_K + s.alpha_M + s.alpha_L - 1.0) < 4e-16);
            CHECK(std::abs(s.alpha_K - tau * s.alpha_M) <= 4e-16 * (1.0 + tau));
        }
    }
    SUBCASE("tau <= 0 rejected") {
        CHECK_THROWS_AS(shares_from_tau(0.0, fixture_means()), ParameterError);
        CHECK_THROWS_AS(shares_from_tau(-1.0, fixture_means()), ParameterError);
    }
}

TEST_CASE("worker shares from expenditure ratios") {
    SUBCASE("equal expenditures") {
        GeometricMeans g;
        g.W_C = g.W_D = g.W_H = 1.0;
        g.C = g.D = 10.0;
        g.H = 20.0;
        g.B = 1.0;
        g.W_B = 20.0;
        const WorkerShares w = worker_shares_from_means(g);
        CHECK(w.alpha_C == doctest::Approx(0.5));
        CHECK(w.alpha_D == doctest::Approx(0.5));
        CHECK(w.alpha_H == doctest::Approx(0.5));
        CHECK(w.alpha_B == doctest::Approx(0.5));
    }
    SUBCASE("published blue-collar split") {
        GeometricMeans g = fixture_means();
        g.W_C = 0.307;
        g.C = 1.0;
        g.W_D = 0.693;
        g.D = 1.0;
        const WorkerShares w = worker_shares_from_means(g);
        CHECK(w.alpha_C == doctest::Approx(0.307).epsilon(1e-12));
        CHECK(w.alpha_D == doctest::Approx(0.693).epsilon(1e-12));
    }
    SUBCASE("zero temporary expenditure boundary") {
        GeometricMeans g = fixture_means();
        g.W_C = 0.0;
        const WorkerShares w = worker_shares_from_means(g);
        CHECK(w.alpha_C == 0.0);
        CHECK(w.alpha_D == 1.0);
    }
}

TEST_CASE("omega_L characterization") {
    const ProductionParams p = fixture_params();
    const CesSigmas s{p.sigma_O, p.sigma_M, p.sigma_I};
    const PanelObservation base = baseline_obs(p.means);

    SUBCASE("zero at the normalization center") {
        CHECK(omega_L_characterization(base, s, p.worker, p.means) ==
              doctest::Approx(0.0).epsilon(1e-12));
    }
    SUBCASE("doubling W_H adds ln2 / sigma_O") {
        PanelObservation o = base;
        o.W_H *= 2.0;
        const double w0 = omega_L_characterization(base, s, p.worker, p.means);
        const double w1 = omega_L_characterization(o, s, p.worker, p.means);
        CHECK(w1 - w0 == doctest::Approx(std::log(2.0) / s.O).epsilon(1e-12));
    }
    SUBCASE("errors name the offending term") {
        PanelObservation o = base;
        o.W_H = -1.0;
        CHECK_THROWS_AS(omega_L_characterization(o, s, p.worker, p.means), DomainError);
    }
}

TEST_CASE("log f(tau)") {
    const ProductionParams p = fixture_params();
    const CesSigmas s{p.sigma_O, p.sigma_M, p.sigma_I};
    const PanelObservation base = baseline_obs(p.means);

    SUBCASE("baseline point gives log f = 0 for any tau") {
        for (double tau : {0.1, 0.376, 2.0})
            CHECK(log_f_tau(base, tau, s, 0.0, 1.0, p.means) ==
                  doctest::Approx(0.0).epsilon(1e-13));
    }
    SUBCASE("identity with planned output away from the baseline") {
        PanelObservation o = base;
        o.K *= 1.7;
        o.M *= 0.6;
        o.H *= 1.1;
        o.C *= 0.9;
        o.D *= 1.3;
        const double wl = 0.23, wh = -0.41;
        const NormalizedInputs in = normalize(o, p.means);
        const double Bn = blue_collar_nest(in.C, in.D, p);
        const double Ln = labor_nest(in.H, Bn, p);
        const double lf = log_f_tau(o, p.tau, s, wl, Ln, p.means);
        const double q = planned_output(in.K, in.M, Ln, wl, wh, p);
        CHECK(lf == doctest::Approx(std::log(q) - wh - std::log(p.means.Q)).epsilon(1e-12));
    }
    SUBCASE("tau derivative matches finite differences") {
        PanelObservation o = base;
        o.K *= 2.2;
        o.M *= 0.8;
        const NormalizedInputs in = normalize(o, p.means);
        const double Bn = blue_collar_nest(in.C, in.D, p);
        const double Ln = labor_nest(in.H, Bn, p);
        const double tau = 0.376, h = 1e-6;
        const double fd = (log_f_tau(o, tau + h, s, 0.1, Ln, p.means) -
                           log_f_tau(o, tau - h, s, 0.1, Ln, p.means)) /
                          (2 * h);
        // analytic: (1/sO) [ -PmM/(PmM+WlL+tau PmM) + K^sO/(tau K^sO + rest) ]
        const double pm = p.means.materials_expenditure();
        const double wl_exp = p.means.W_L * p.means.L;
        const double Ks = std::pow(in.K, s.O);
        const double rest = std::pow(in.M, s.O) +
                            (wl_exp / pm) * std::pow(std::exp(0.1) * Ln, s.O);
        const double analytic =
            (1.0 / s.O) * (-pm / (pm + wl_exp + tau * pm) + Ks / (tau * Ks + rest));
        CHECK(fd == doctest::Approx(analytic).epsilon(1e-6));
    }
    SUBCASE("tau <= 0 rejected") {
        CHECK_THROWS_AS(log_f_tau(base, -0.5, s, 0.0, 1.0, p.means), ParameterError);
    }
}

TEST_CASE("productivity law of motion") {
    ProductivityParams pp;
    pp.hicks.rho = 0.880;
    pp.hicks.beta_ida = -0.031;
    pp.hicks.beta_imp = -0.071;
    pp.hicks.iota[2005] = 0.0;
    pp.labor.iota[2005] = 0.0;

    SUBCASE("all zero") {
        CHECK(productivity_step(0, pp, ProductivityKind::Labor, 0, 0, 0, 2005) == 0.0);
    }
    SUBCASE("published coefficients arithmetic") {
        CHECK(productivity_step(1.0, pp, ProductivityKind::Hicks, 2.0, 1.0, 0.0, 2005) ==
              doctest::Approx(0.747).epsilon(1e-12));
    }
    SUBCASE("unknown year effect") {
        CHECK_THROWS_AS(productivity_step(0, pp, ProductivityKind::Hicks, 0, 0, 0, 1900),
                        ConfigError);
    }
    SUBCASE("innovation variance of drawn shocks") {
        Rng rng(11);
        const double sd = 0.725;
        double acc = 0, acc2 = 0;
        const int n = 100000;
        for (int i = 0; i < n; ++i) {
            const double x = rng.normal(0.0, sd);
            acc += x;
            acc2 += x * x;
        }
        const double var = acc2 / n - (acc / n) * (acc / n);
        CHECK(var == doctest::Approx(0.525625).epsilon(0.02));
    }
}

TEST_CASE("baseline normalization holds for random admissible parameters") {
    Rng rng(99);
    for (int i = 0; i < 25; ++i) {
        ProductionParams p = fixture_params(rng.lognormal(0, 0.8));
        p.sigma_O = rng.uniform(0.05, 0.95);
        p.sigma_M = rng.uniform(0.05, 0.95);
        p.sigma_I = rng.uniform(0.05, 0.95);
        CHECK(planned_output(1, 1, 1, 0, 0, p) == doctest::Approx(p.means.Q).epsilon(1e-12));
    }
}
