#include <doctest.h>

#include <cmath>
#include <map>

#include "cesmark/dgp.hpp"
#include "cesmark/labor_supply.hpp"
#include "cesmark/markets.hpp"
#include "cesmark/production.hpp"

using namespace cesmark;

namespace {

DgpConfig small_config(std::uint64_t seed = 42) {
    DgpConfig cfg = default_dgp_config();
    cfg.n_plants = 40;
    cfg.n_years = 6;
    cfg.n_markets = 4;
    cfg.seed = seed;
    // Year-effect maps must cover the panel span.
    cfg.productivity.hicks.iota.clear();
    cfg.productivity.labor.iota.clear();
    for (int t = 0; t < cfg.n_years; ++t) {
        const int year = cfg.first_year + t;
        cfg.productivity.hicks.iota[year] = -0.01 * (t - 2.5);
        cfg.productivity.labor.iota[year] = 0.008 * (t - 2.5);
    }
    return cfg;
}

}  // namespace

TEST_CASE("panel generation satisfies every estimating identity") {
    const DgpConfig cfg = small_config();
    const SimulatedPanel sim = simulate_panel(cfg);
    const Panel& panel = sim.panel;
    const PanelTruth& truth = sim.truth;
    REQUIRE(panel.size() == static_cast<std::size_t>(cfg.n_plants * cfg.n_years));

    const ProductionParams& P = truth.params;
    const CesSigmas sig{P.sigma_O, P.sigma_M, P.sigma_I};

    SUBCASE("observed output carries the stored measurement error") {
        for (std::size_t i = 0; i < panel.size(); ++i) {
            const double q = truth.obs[i].Q_planned * std::exp(truth.obs[i].state.eps);
            CHECK(panel[i].Q_obs == doctest::Approx(q).epsilon(1e-12));
        }
    }

    SUBCASE("productivity follows its law of motion with stored innovations") {
        for (std::size_t i = 0; i < panel.size(); ++i) {
            if (panel[i].year == cfg.first_year) continue;
            const auto& prev = truth.obs[i - 1];  // rows are plant-major, year-ordered
            const auto& cur = truth.obs[i];
            const double wl = truth.productivity.labor.step(
                prev.state.omega_L, panel[i].IDA, panel[i].Imp_lag, cur.state.xi_L,
                panel[i].year);
            const double wh = truth.productivity.hicks.step(
                prev.state.omega_H, panel[i].IDA, panel[i].Imp_lag, cur.state.xi_H,
                panel[i].year);
            CHECK(cur.state.omega_L == doctest::Approx(wl).epsilon(1e-12));
            CHECK(cur.state.omega_H == doctest::Approx(wh).epsilon(1e-12));
        }
    }

    SUBCASE("closed-form characterization round-trips omega_L") {
        for (std::size_t i = 0; i < panel.size(); ++i) {
            const double w = omega_L_characterization(panel[i], sig, P.worker, P.means);
            CHECK(w == doctest::Approx(truth.obs[i].state.omega_L).epsilon(1e-10));
        }
    }

    SUBCASE("all four first-order conditions hold") {
        for (std::size_t i = 0; i < panel.size(); ++i) {
            const auto& o = panel[i];
            const auto& tr = truth.obs[i];
            const auto ev = evaluate_production(o, P, tr.state.omega_L, tr.state.omega_H);
            const double shadow = o.P / tr.mu;
            // H and M conditions: prices backed out from marginal products.
            CHECK(o.W_H == doctest::Approx(shadow * ev.MP_H).epsilon(1e-10));
            CHECK(o.P_M == doctest::Approx(shadow * ev.MP_M).epsilon(1e-10));
            // C condition under Nash-Bertrand.
            const double lhs_C = o.W_C * (1.0 + tr.invel_C) + truth.g_C;
            CHECK(lhs_C == doctest::Approx(shadow * ev.MP_C).epsilon(1e-8));
            // D condition under the configured conduct.
            const double surplus = tr.pi_hat / (o.D * o.W_D);
            const double nu_D =
                1.0 + tr.invel_D * (1.0 + ((truth.theta - 1.0) / truth.theta) * surplus);
            const double lhs_D = o.W_D * nu_D + truth.g_D;
            CHECK(lhs_D == doctest::Approx(shadow * ev.MP_D).epsilon(1e-8));
        }
    }

    SUBCASE("supply equation holds exactly with the stored amenities") {
        for (std::size_t i = 0; i < panel.size(); ++i) {
            const auto& o = panel[i];
            const auto& tr = truth.obs[i];
            const int t = o.year - cfg.first_year;
            const int a = cfg.interval_of(o.year);
            const double rhs_C = truth.supply_C.intercept + truth.supply_C.trend * t +
                                 truth.supply_C.gamma_at(a) * o.W_C +
                                 truth.supply_C.eta * std::log(tr.scond_C) + tr.amenity_C;
            CHECK(std::log(tr.s_C / tr.s0_C) == doctest::Approx(rhs_C).epsilon(1e-10));
            const double rhs_D = truth.supply_D.intercept + truth.supply_D.trend * t +
                                 truth.supply_D.gamma_at(a) * o.W_D +
                                 truth.supply_D.eta * std::log(tr.scond_D) + tr.amenity_D;
            CHECK(std::log(tr.s_D / tr.s0_D) == doctest::Approx(rhs_D).epsilon(1e-10));
        }
    }

    SUBCASE("share columns add up within market-years") {
        const PanelShares sh = compute_panel_shares(panel);
        std::map<std::pair<std::string, int>, double> cond_sum, inside_sum;
        for (std::size_t i = 0; i < panel.size(); ++i) {
            cond_sum[{panel[i].market_id, panel[i].year}] += sh.scond_C[i];
            inside_sum[{panel[i].market_id, panel[i].year}] += sh.s_C[i];
            CHECK(sh.s_C[i] == doctest::Approx(truth.obs[i].s_C).epsilon(1e-10));
            CHECK(sh.scond_C[i] == doctest::Approx(truth.obs[i].scond_C).epsilon(1e-10));
            CHECK(sh.s0_C[i] == doctest::Approx(truth.obs[i].s0_C).epsilon(1e-10));
        }
        for (const auto& [k, v] : cond_sum) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));
        for (std::size_t i = 0; i < panel.size(); ++i) {
            const auto key = std::make_pair(panel[i].market_id, panel[i].year);
            CHECK(inside_sum.at(key) + sh.s0_C[i] == doctest::Approx(1.0).epsilon(1e-12));
        }
    }

    SUBCASE("generated markup is recovered by the intermediates condition") {
        for (std::size_t i = 0; i < panel.size(); ++i) {
            const double mu = markup_from_materials(panel[i], P, truth.obs[i].state.omega_L,
                                                    truth.obs[i].state.omega_H);
            CHECK(mu == doctest::Approx(truth.mu).epsilon(1e-8));
        }
    }

    SUBCASE("inverse-elasticity terms equal the generator's wage-setting terms") {
        const PanelShares sh = compute_panel_shares(panel);
        for (std::size_t i = 0; i < panel.size(); ++i) {
            const int a = cfg.interval_of(panel[i].year);
            const double term = inverse_supply_elasticity_term(
                panel[i].W_C, sh.s_C[i], sh.scond_C[i], truth.supply_C, a);
            CHECK(term - 1.0 == doctest::Approx(truth.obs[i].invel_C).epsilon(1e-10));
        }
    }

    SUBCASE("markdown identity with zero coordination costs") {
        for (std::size_t i = 0; i < panel.size(); ++i) {
            const auto& tr = truth.obs[i];
            const double md = 100.0 * (tr.mrpl_C - panel[i].W_C) / tr.mrpl_C;
            const double nu = 1.0 + tr.invel_C;
            CHECK(md == doctest::Approx(markdown_percent(nu)).epsilon(1e-8));
        }
    }
}

TEST_CASE("same seed reproduces the panel bit for bit") {
    const SimulatedPanel a = simulate_panel(small_config(7));
    const SimulatedPanel b = simulate_panel(small_config(7));
    REQUIRE(a.panel.size() == b.panel.size());
    for (std::size_t i = 0; i < a.panel.size(); ++i) {
        CHECK(a.panel[i].Q_obs == b.panel[i].Q_obs);
        CHECK(a.panel[i].W_C == b.panel[i].W_C);
        CHECK(a.panel[i].W_D == b.panel[i].W_D);
        CHECK(a.panel[i].M == b.panel[i].M);
        CHECK(a.truth.obs[i].state.omega_H == b.truth.obs[i].state.omega_H);
    }
}

TEST_CASE("theta = 1 bargaining coincides with Nash-Bertrand wage setting") {
    DgpConfig nb = small_config(11);
    nb.conduct = Conduct::NashBertrand;
    DgpConfig nn = small_config(11);
    nn.conduct = Conduct::NashBargaining;
    nn.theta = 1.0;
    const SimulatedPanel a = simulate_panel(nb);
    const SimulatedPanel b = simulate_panel(nn);
    for (std::size_t i = 0; i < a.panel.size(); ++i)
        CHECK(a.panel[i].W_D == doctest::Approx(b.panel[i].W_D).epsilon(1e-10));
}

TEST_CASE("positive coordination costs split the composite friction") {
    DgpConfig cfg = small_config(13);
    cfg.g_C = 40.0;
    cfg.g_D = 90.0;
    const SimulatedPanel sim = simulate_panel(cfg);
    for (std::size_t i = 0; i < sim.panel.size(); ++i) {
        const auto& tr = sim.truth.obs[i];
        const LaborFrictions f = labor_frictions(sim.panel[i], sim.truth.params);
        CHECK(f.nu_tilde_C == doctest::Approx(tr.nu_C + tr.F_C).epsilon(1e-8));
        CHECK(f.nu_tilde_D == doctest::Approx(tr.nu_D + tr.F_D).epsilon(1e-8));
        CHECK(tr.F_C > 0);
        CHECK(tr.F_D > 0);
    }
}

TEST_CASE("labor market dataset generator") {
    LaborMarketConfig cfg;
    cfg.supply = LaborSupplyParams{0.009, -0.002, 0.245, 0.0, 0.002};
    cfg.seed = 5;

    SUBCASE("supply equation and adding-up hold by construction") {
        const LaborMarketDataset d = simulate_labor_market(cfg);
        REQUIRE(!d.rows.empty());
        std::map<std::pair<std::string, int>, double> cond_sum;
        for (const auto& r : d.rows) {
            const double rhs = d.truth.intercept +
                               d.truth.trend * (r.year - cfg.first_year) +
                               d.truth.gamma_at(r.interval) * r.W +
                               d.truth.eta * std::log(r.cond_share) + r.amenity;
            CHECK(r.log_odds == doctest::Approx(rhs).epsilon(1e-10));
            cond_sum[{r.market_id, r.year}] += r.cond_share;
        }
        for (const auto& [k, v] : cond_sum) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));
    }

    SUBCASE("eta = 0 with one plant per market degenerates the nest term") {
        LaborMarketConfig solo = cfg;
        solo.supply.eta = 0.0;
        solo.min_plants = solo.max_plants = 1;
        const LaborMarketDataset d = simulate_labor_market(solo);
        for (const auto& r : d.rows) {
            CHECK(r.cond_share == doctest::Approx(1.0));
            const double rhs = d.truth.intercept +
                               d.truth.trend * (r.year - solo.first_year) +
                               d.truth.gamma_at(r.interval) * r.W + r.amenity;
            CHECK(r.log_odds == doctest::Approx(rhs).epsilon(1e-10));
        }
    }
}
