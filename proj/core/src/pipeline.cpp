#include "cesmark/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <set>

#include <json.hpp>

#include "cesmark/csv.hpp"
#include "cesmark/stats.hpp"

namespace cesmark {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const std::vector<std::string> kRequiredColumns = {
    "plant_id", "year", "market_id", "Q_obs", "P", "K", "M", "P_M", "H", "W_H",
    "C", "W_C", "D", "W_D", "IDA", "Imp_lag", "strike_intensity",
    "outside_mandays_C", "outside_mandays_D"};

void check_positive_cell(double v, const std::string& column, int row) {
    if (!(v > 0) || !std::isfinite(v))
        throw ConfigError("row " + std::to_string(row) + ": column " + column +
                          " must be strictly positive, got " + format_double(v));
}

}  // namespace

Panel ingest(const std::string& path) {
    const CsvTable t = read_csv(path);
    for (const auto& c : kRequiredColumns) t.require_column(c);

    std::vector<std::string> z_columns;
    for (const auto& h : t.header)
        if (h.rfind("z_", 0) == 0) z_columns.push_back(h);

    Panel panel;
    std::set<std::pair<std::string, int>> seen;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const int rowno = static_cast<int>(r) + 2;  // header is row 1
        const auto& cells = t.rows[r];
        auto cell = [&](const std::string& name) -> const std::string& {
            return cells[static_cast<std::size_t>(t.column(name))];
        };
        PanelObservation o;
        o.plant_id = cell("plant_id");
        o.year = parse_int(cell("year"), "year", rowno);
        o.market_id = cell("market_id");
        o.Q_obs = parse_double(cell("Q_obs"), "Q_obs", rowno);
        o.P = parse_double(cell("P"), "P", rowno);
        o.K = parse_double(cell("K"), "K", rowno);
        o.M = parse_double(cell("M"), "M", rowno);
        o.P_M = parse_double(cell("P_M"), "P_M", rowno);
        o.H = parse_double(cell("H"), "H", rowno);
        o.W_H = parse_double(cell("W_H"), "W_H", rowno);
        o.C = parse_double(cell("C"), "C", rowno);
        o.W_C = parse_double(cell("W_C"), "W_C", rowno);
        o.D = parse_double(cell("D"), "D", rowno);
        o.W_D = parse_double(cell("W_D"), "W_D", rowno);
        o.IDA = parse_double(cell("IDA"), "IDA", rowno);
        o.Imp_lag = parse_double(cell("Imp_lag"), "Imp_lag", rowno);
        o.strike_intensity = parse_double(cell("strike_intensity"), "strike_intensity", rowno);
        o.outside_mandays_C =
            parse_double(cell("outside_mandays_C"), "outside_mandays_C", rowno);
        o.outside_mandays_D =
            parse_double(cell("outside_mandays_D"), "outside_mandays_D", rowno);
        for (const auto& z : z_columns)
            o.extra_instruments[z] = parse_double(cell(z), z, rowno);

        for (const char* qcol : {"Q_obs", "P", "K", "M", "P_M", "H", "W_H", "C", "W_C", "D",
                                 "W_D", "outside_mandays_C", "outside_mandays_D"})
            check_positive_cell(parse_double(cell(qcol), qcol, rowno), qcol, rowno);
        if (o.Imp_lag != 0.0 && o.Imp_lag != 1.0)
            throw ConfigError("row " + std::to_string(rowno) + ": Imp_lag must be 0 or 1");
        if (o.strike_intensity < 0)
            throw ConfigError("row " + std::to_string(rowno) +
                              ": strike_intensity must be nonnegative");
        if (!seen.insert({o.plant_id, o.year}).second)
            throw ConfigError("row " + std::to_string(rowno) + ": duplicate (plant, year) " +
                              o.plant_id + ", " + std::to_string(o.year));
        panel.push_back(std::move(o));
    }
    return panel;
}

void write_panel_csv(const std::string& path, const Panel& panel) {
    std::set<std::string> z_names;
    for (const auto& o : panel)
        for (const auto& [k, v] : o.extra_instruments) z_names.insert(k);

    std::vector<std::string> header = kRequiredColumns;
    header.insert(header.end(), z_names.begin(), z_names.end());

    std::vector<std::vector<std::string>> rows;
    for (const auto& o : panel) {
        std::vector<std::string> row = {o.plant_id,
                                        std::to_string(o.year),
                                        o.market_id,
                                        format_double(o.Q_obs),
                                        format_double(o.P),
                                        format_double(o.K),
                                        format_double(o.M),
                                        format_double(o.P_M),
                                        format_double(o.H),
                                        format_double(o.W_H),
                                        format_double(o.C),
                                        format_double(o.W_C),
                                        format_double(o.D),
                                        format_double(o.W_D),
                                        format_double(o.IDA),
                                        format_double(o.Imp_lag),
                                        format_double(o.strike_intensity),
                                        format_double(o.outside_mandays_C),
                                        format_double(o.outside_mandays_D)};
        for (const auto& z : z_names) {
            auto it = o.extra_instruments.find(z);
            row.push_back(format_double(it == o.extra_instruments.end() ? 0.0 : it->second));
        }
        rows.push_back(std::move(row));
    }
    write_csv(path, header, rows);
}

// ---------------------------------------------------------------------------
// Truth sidecar

namespace {

json means_to_json(const GeometricMeans& g) {
    return json{{"Q", g.Q}, {"K", g.K},     {"M", g.M},     {"H", g.H},   {"C", g.C},
                {"D", g.D}, {"W_H", g.W_H}, {"W_C", g.W_C}, {"W_D", g.W_D},
                {"P_M", g.P_M}, {"W_B", g.W_B}, {"W_L", g.W_L}, {"B", g.B}, {"L", g.L}};
}

GeometricMeans means_from_json(const json& j) {
    GeometricMeans g;
    g.Q = j.at("Q");
    g.K = j.at("K");
    g.M = j.at("M");
    g.H = j.at("H");
    g.C = j.at("C");
    g.D = j.at("D");
    g.W_H = j.at("W_H");
    g.W_C = j.at("W_C");
    g.W_D = j.at("W_D");
    g.P_M = j.at("P_M");
    g.W_B = j.at("W_B");
    g.W_L = j.at("W_L");
    g.B = j.at("B");
    g.L = j.at("L");
    return g;
}

json markov_to_json(const MarkovProcess& p) {
    json iota = json::object();
    for (const auto& [year, v] : p.iota) iota[std::to_string(year)] = v;
    return json{{"rho", p.rho}, {"beta_ida", p.beta_ida}, {"beta_imp", p.beta_imp},
                {"iota", iota}};
}

MarkovProcess markov_from_json(const json& j) {
    MarkovProcess p;
    p.rho = j.at("rho");
    p.beta_ida = j.at("beta_ida");
    p.beta_imp = j.at("beta_imp");
    for (const auto& [k, v] : j.at("iota").items()) p.iota[std::stoi(k)] = v.get<double>();
    return p;
}

json supply_to_json(const LaborSupplyParams& s) {
    return json{{"gamma", s.gamma}, {"gamma_t", s.gamma_t}, {"eta", s.eta},
                {"intercept", s.intercept}, {"trend", s.trend}};
}

LaborSupplyParams supply_from_json(const json& j) {
    LaborSupplyParams s;
    s.gamma = j.at("gamma");
    s.gamma_t = j.at("gamma_t");
    s.eta = j.at("eta");
    s.intercept = j.at("intercept");
    s.trend = j.at("trend");
    return s;
}

}  // namespace

void write_truth(const std::string& path, const PanelTruth& truth) {
    json j;
    j["sigma_O"] = truth.params.sigma_O;
    j["sigma_M"] = truth.params.sigma_M;
    j["sigma_I"] = truth.params.sigma_I;
    j["tau"] = truth.params.tau;
    j["means"] = means_to_json(truth.params.means);
    j["hicks"] = markov_to_json(truth.productivity.hicks);
    j["labor"] = markov_to_json(truth.productivity.labor);
    j["sigma_H"] = truth.productivity.sigma_H;
    j["sigma_L"] = truth.productivity.sigma_L;
    j["sigma_eps"] = truth.productivity.sigma_eps;
    j["supply_C"] = supply_to_json(truth.supply_C);
    j["supply_D"] = supply_to_json(truth.supply_D);
    j["conduct"] = truth.conduct == Conduct::NashBargaining ? "nash_bargaining"
                                                            : "nash_bertrand";
    j["theta"] = truth.theta;
    j["g_C"] = truth.g_C;
    j["g_D"] = truth.g_D;
    j["mu"] = truth.mu;
    j["first_year"] = truth.first_year;
    j["n_years"] = truth.n_years;
    j["n_policy_intervals"] = truth.n_policy_intervals;

    json obs = json::array();
    for (const auto& o : truth.obs) {
        obs.push_back(json{{"omega_H", o.state.omega_H},
                           {"omega_L", o.state.omega_L},
                           {"xi_H", o.state.xi_H},
                           {"xi_L", o.state.xi_L},
                           {"eps", o.state.eps},
                           {"mu", o.mu},
                           {"pi_hat", o.pi_hat},
                           {"mrpl_C", o.mrpl_C},
                           {"mrpl_D", o.mrpl_D},
                           {"nu_C", o.nu_C},
                           {"nu_D", o.nu_D},
                           {"F_C", o.F_C},
                           {"F_D", o.F_D},
                           {"invel_C", o.invel_C},
                           {"invel_D", o.invel_D},
                           {"s_C", o.s_C},
                           {"s0_C", o.s0_C},
                           {"scond_C", o.scond_C},
                           {"s_D", o.s_D},
                           {"s0_D", o.s0_D},
                           {"scond_D", o.scond_D},
                           {"amenity_C", o.amenity_C},
                           {"amenity_D", o.amenity_D},
                           {"Q_planned", o.Q_planned}});
    }
    j["observations"] = std::move(obs);

    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path);
    out << j.dump(1) << "\n";
}

PanelTruth read_truth(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open truth sidecar " + path);
    json j;
    in >> j;

    PanelTruth t;
    t.params.sigma_O = j.at("sigma_O");
    t.params.sigma_M = j.at("sigma_M");
    t.params.sigma_I = j.at("sigma_I");
    t.params.tau = j.at("tau");
    t.params.means = means_from_json(j.at("means"));
    t.params.worker = worker_shares_from_means(t.params.means);
    t.params.input = shares_from_tau(t.params.tau, t.params.means);
    t.productivity.hicks = markov_from_json(j.at("hicks"));
    t.productivity.labor = markov_from_json(j.at("labor"));
    t.productivity.sigma_H = j.at("sigma_H");
    t.productivity.sigma_L = j.at("sigma_L");
    t.productivity.sigma_eps = j.at("sigma_eps");
    t.supply_C = supply_from_json(j.at("supply_C"));
    t.supply_D = supply_from_json(j.at("supply_D"));
    t.conduct = j.at("conduct") == "nash_bargaining" ? Conduct::NashBargaining
                                                     : Conduct::NashBertrand;
    t.theta = j.at("theta");
    t.g_C = j.at("g_C");
    t.g_D = j.at("g_D");
    t.mu = j.at("mu");
    t.first_year = j.at("first_year");
    t.n_years = j.at("n_years");
    t.n_policy_intervals = j.at("n_policy_intervals");
    for (const auto& o : j.at("observations")) {
        ObservationTruth tr;
        tr.state.omega_H = o.at("omega_H");
        tr.state.omega_L = o.at("omega_L");
        tr.state.xi_H = o.at("xi_H");
        tr.state.xi_L = o.at("xi_L");
        tr.state.eps = o.at("eps");
        tr.mu = o.at("mu");
        tr.pi_hat = o.at("pi_hat");
        tr.mrpl_C = o.at("mrpl_C");
        tr.mrpl_D = o.at("mrpl_D");
        tr.nu_C = o.at("nu_C");
        tr.nu_D = o.at("nu_D");
        tr.F_C = o.at("F_C");
        tr.F_D = o.at("F_D");
        tr.invel_C = o.at("invel_C");
        tr.invel_D = o.at("invel_D");
        tr.s_C = o.at("s_C");
        tr.s0_C = o.at("s0_C");
        tr.scond_C = o.at("scond_C");
        tr.s_D = o.at("s_D");
        tr.s0_D = o.at("s0_D");
        tr.scond_D = o.at("scond_D");
        tr.amenity_C = o.at("amenity_C");
        tr.amenity_D = o.at("amenity_D");
        tr.Q_planned = o.at("Q_planned");
        t.obs.push_back(tr);
    }
    return t;
}

std::vector<double> perpetual_inventory(const std::vector<double>& K_book,
                                        const std::vector<double>& I_flow, double delta) {
    if (K_book.empty()) return {};
    if (I_flow.size() + 1 < K_book.size())
        throw ConfigError("perpetual_inventory: need investment for every transition");
    if (delta < 0 || delta > 1) throw ParameterError("depreciation must lie in [0,1]");
    std::vector<double> out(K_book.size());
    out[0] = K_book[0];  // no prior stock: book value
    for (std::size_t t = 1; t < K_book.size(); ++t)
        out[t] = (1.0 - delta) * out[t - 1] + I_flow[t - 1];
    return out;
}

// ---------------------------------------------------------------------------
// Report emission

namespace {

struct YearSeriesPoint {
    int year;
    WeightedMean wm;
};

std::vector<YearSeriesPoint> weighted_year_series(const std::vector<int>& years,
                                                  const std::vector<double>& values,
                                                  const std::vector<double>& weights,
                                                  const std::vector<char>& mask) {
    std::map<int, std::pair<std::vector<double>, std::vector<double>>> by_year;
    for (std::size_t i = 0; i < years.size(); ++i) {
        if (!mask[i] || !std::isfinite(values[i])) continue;
        auto& [v, w] = by_year[years[i]];
        v.push_back(values[i]);
        w.push_back(weights[i]);
    }
    std::vector<YearSeriesPoint> out;
    for (const auto& [year, vw] : by_year)
        out.push_back({year, weighted_mean(vw.first, vw.second)});
    return out;
}

void write_series_csv(const std::string& path,
                      const std::map<std::string, std::vector<YearSeriesPoint>>& series,
                      std::vector<std::string>& outputs) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& [name, pts] : series)
        for (const auto& p : pts)
            rows.push_back({name, std::to_string(p.year), format_double(p.wm.mean),
                            format_double(p.wm.mean - 1.96 * p.wm.se),
                            format_double(p.wm.mean + 1.96 * p.wm.se),
                            std::to_string(p.wm.n)});
    write_csv(path, {"series", "year", "wmean", "ci_lo", "ci_hi", "n"}, rows);
    outputs.push_back(path);
}

struct ReportInputs {
    std::vector<int> years;
    std::vector<double> log_revenue;  // weights
    std::vector<MarketPowerRecord> records;
    std::vector<double> W_C, W_D;
    std::vector<double> omega_H, omega_L;  // may be empty
    double working_days = 250.0;
    bool lerner_restrict = true;
};

std::vector<std::string> summary_row(const std::string& name, const std::vector<double>& v) {
    const SummaryStats s = summarize(v);
    return {name,
            format_double(s.median),
            format_double(s.mean),
            format_double(s.sd),
            format_double(s.iqr),
            std::to_string(s.n)};
}

void emit_reports(const std::string& out_dir, const ReportInputs& in,
                  std::vector<std::string>& outputs) {
    const std::size_t n = in.records.size();
    std::vector<char> all(n, 1), lerner_mask(n, 0), nn_mask(n, 0), mu_mask(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        lerner_mask[i] = in.records[i].lerner_positive;
        nn_mask[i] = in.records[i].nu_D_NN_in_range;
        mu_mask[i] = in.records[i].mu_valid;
    }
    const std::vector<char>& restricted = in.lerner_restrict ? lerner_mask : all;

    // Appendix-style market power summary.
    {
        auto collect = [&](auto getter, const std::vector<char>& mask) {
            std::vector<double> v;
            for (std::size_t i = 0; i < n; ++i)
                if (mask[i] && std::isfinite(getter(in.records[i])))
                    v.push_back(getter(in.records[i]));
            return v;
        };
        std::vector<std::vector<std::string>> rows;
        rows.push_back(summary_row(
            "mu_M", collect([](const MarketPowerRecord& r) { return r.mu; }, mu_mask)));
        rows.push_back(summary_row(
            "mu_H", collect([](const MarketPowerRecord& r) { return r.mu_labor; }, mu_mask)));
        rows.push_back(summary_row(
            "nu_C", collect([](const MarketPowerRecord& r) { return r.nu_C; }, all)));
        rows.push_back(summary_row(
            "nu_D_NB", collect([](const MarketPowerRecord& r) { return r.nu_D_NB; }, all)));
        rows.push_back(summary_row(
            "nu_D_NN", collect([](const MarketPowerRecord& r) { return r.nu_D_NN; }, nn_mask)));
        rows.push_back(summary_row(
            "nu_tilde_C",
            collect([](const MarketPowerRecord& r) { return r.nu_tilde_C; }, all)));
        rows.push_back(summary_row(
            "nu_tilde_D",
            collect([](const MarketPowerRecord& r) { return r.nu_tilde_D; }, all)));
        const std::string path = out_dir + "/summary_market_power.csv";
        write_csv(path, {"index", "median", "mean", "sd", "iqr", "n"}, rows);
        outputs.push_back(path);
    }

    auto records_series = [&](auto getter, const std::vector<char>& mask) {
        std::vector<double> v(n);
        for (std::size_t i = 0; i < n; ++i) v[i] = getter(in.records[i]);
        return weighted_year_series(in.years, v, in.log_revenue, mask);
    };

    {
        std::map<std::string, std::vector<YearSeriesPoint>> s;
        s["log_operating_profit"] = records_series(
            [](const MarketPowerRecord& r) {
                return r.pi_hat > 0 ? std::log(r.pi_hat)
                                    : std::numeric_limits<double>::quiet_NaN();
            },
            restricted);
        s["log_planned_output"] = records_series(
            [](const MarketPowerRecord& r) {
                return r.q_hat > 0 ? std::log(r.q_hat)
                                   : std::numeric_limits<double>::quiet_NaN();
            },
            restricted);
        s["lerner"] =
            records_series([](const MarketPowerRecord& r) { return r.lerner; }, restricted);
        s["tfp"] = records_series([](const MarketPowerRecord& r) { return r.tfp; }, restricted);
        write_series_csv(out_dir + "/plot_output_market.csv", s, outputs);
    }
    if (!in.omega_H.empty()) {
        std::map<std::string, std::vector<YearSeriesPoint>> s;
        s["omega_H"] = weighted_year_series(in.years, in.omega_H, in.log_revenue, restricted);
        s["omega_L"] = weighted_year_series(in.years, in.omega_L, in.log_revenue, restricted);
        write_series_csv(out_dir + "/plot_productivity.csv", s, outputs);
    }
    {
        std::map<std::string, std::vector<YearSeriesPoint>> s;
        s["temporary"] = records_series(
            [](const MarketPowerRecord& r) { return r.markdown_C; }, all);
        s["permanent_nash_bertrand"] = records_series(
            [](const MarketPowerRecord& r) { return r.markdown_D_NB; }, all);
        s["permanent_nash_bargaining"] = records_series(
            [](const MarketPowerRecord& r) { return r.markdown_D_NN; }, nn_mask);
        write_series_csv(out_dir + "/plot_markdowns.csv", s, outputs);
    }
    {
        // Annual wages, actual and at the MRPL proxy (W * nu).
        const double days = in.working_days;
        std::map<std::string, std::vector<YearSeriesPoint>> sc, sd;
        std::vector<double> wc(n), wc_cf(n), wd(n), wd_nb(n), wd_nn(n);
        for (std::size_t i = 0; i < n; ++i) {
            wc[i] = days * in.W_C[i];
            wc_cf[i] = days * in.W_C[i] * in.records[i].nu_C;
            wd[i] = days * in.W_D[i];
            wd_nb[i] = days * in.W_D[i] * in.records[i].nu_D_NB;
            wd_nn[i] = days * in.W_D[i] * in.records[i].nu_D_NN;
        }
        sc["actual"] = weighted_year_series(in.years, wc, in.log_revenue, all);
        sc["mrpl_proxy"] = weighted_year_series(in.years, wc_cf, in.log_revenue, all);
        write_series_csv(out_dir + "/plot_wages_temporary.csv", sc, outputs);
        sd["actual"] = weighted_year_series(in.years, wd, in.log_revenue, all);
        sd["mrpl_proxy_nash_bertrand"] =
            weighted_year_series(in.years, wd_nb, in.log_revenue, all);
        sd["mrpl_proxy_nash_bargaining"] =
            weighted_year_series(in.years, wd_nn, in.log_revenue, nn_mask);
        write_series_csv(out_dir + "/plot_wages_permanent.csv", sd, outputs);
    }
}

void write_market_power_csv(const std::string& path, const Panel& panel,
                            const std::vector<MarketPowerRecord>& records,
                            std::vector<std::string>& outputs) {
    std::vector<std::vector<std::string>> rows;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        const auto& o = panel[i];
        rows.push_back({r.plant_id,
                        std::to_string(r.year),
                        format_double(r.mu),
                        format_double(r.mu_labor),
                        format_double(r.mc),
                        format_double(r.lerner),
                        format_double(r.pi_hat),
                        format_double(r.q_hat),
                        format_double(r.tfp),
                        format_double(r.nu_tilde_C),
                        format_double(r.nu_tilde_D),
                        format_double(r.nu_C),
                        format_double(r.nu_D_NB),
                        format_double(r.nu_D_NN),
                        format_double(r.F_C),
                        format_double(r.F_D),
                        format_double(r.markdown_C),
                        format_double(r.markdown_D_NB),
                        format_double(r.markdown_D_NN),
                        std::to_string(r.mu_valid ? 1 : 0),
                        std::to_string(r.lerner_positive ? 1 : 0),
                        std::to_string(r.nu_D_NN_in_range ? 1 : 0),
                        format_double(o.W_C),
                        format_double(o.W_D),
                        format_double(std::log(o.P * o.Q_obs))});
    }
    write_csv(path,
              {"plant_id", "year", "mu", "mu_labor", "mc", "lerner", "pi_hat", "q_hat", "tfp",
               "nu_tilde_C", "nu_tilde_D", "nu_C", "nu_D_NB", "nu_D_NN", "F_C", "F_D",
               "markdown_C", "markdown_D_NB", "markdown_D_NN", "mu_valid", "lerner_positive",
               "nu_D_NN_in_range", "W_C", "W_D", "log_revenue"},
              rows);
    outputs.push_back(path);
}

void write_bootstrap_csvs(const std::string& out_dir, const std::string& stem,
                          const BootstrapReport& rep, std::vector<std::string>& outputs) {
    {
        std::vector<std::string> header = {"replication"};
        for (const auto& p : rep.param_names) {
            header.push_back(p);
            header.push_back(p + "_effective");
        }
        std::vector<std::vector<std::string>> rows;
        for (std::size_t r = 0; r < rep.draws.size(); ++r) {
            std::vector<std::string> row = {std::to_string(r)};
            for (std::size_t k = 0; k < rep.param_names.size(); ++k) {
                row.push_back(format_double(rep.draws[r][k]));
                row.push_back(std::to_string(rep.effective[r][k] ? 1 : 0));
            }
            rows.push_back(std::move(row));
        }
        const std::string path = out_dir + "/" + stem + "_replications.csv";
        write_csv(path, header, rows);
        outputs.push_back(path);
    }
    {
        std::vector<std::vector<std::string>> rows;
        for (const auto& s : rep.summaries)
            rows.push_back({s.name, format_double(s.mean), format_double(s.median),
                            format_double(s.sd), format_double(s.max), format_double(s.min),
                            std::to_string(s.effective)});
        const std::string path = out_dir + "/" + stem + "_summary.csv";
        write_csv(path, {"parameter", "mean", "median", "sd", "max", "min",
                         "effective_replications"},
                  rows);
        outputs.push_back(path);
    }
}

}  // namespace

PipelineResult run_pipeline(const RunConfig& config, const std::string& out_dir) {
    config.validate();
    fs::create_directories(out_dir);

    PipelineResult res;
    std::string failed_step;
    std::string failure_message;

    json manifest;
    manifest["config_hash"] =
        "fnv1a64:" + std::to_string(fnv1a64(run_config_canonical_json(config)));
    manifest["seed"] = config.seed;
    manifest["version"] = "0.1.0";

    auto finish_manifest = [&]() {
        manifest["outputs"] = res.outputs;
        if (!failed_step.empty()) {
            manifest["failed_step"] = failed_step;
            manifest["error"] = failure_message;
        }
        std::ofstream out(out_dir + "/manifest.json");
        out << manifest.dump(1) << "\n";
    };

    Panel panel = ingest(config.input_csv);
    int min_year = panel.front().year, max_year = panel.front().year;
    for (const auto& o : panel) {
        min_year = std::min(min_year, o.year);
        max_year = std::max(max_year, o.year);
    }
    res.interval_per_row.resize(panel.size());
    for (std::size_t i = 0; i < panel.size(); ++i)
        res.interval_per_row[i] = config.interval_of(panel[i].year, min_year, max_year);

    std::optional<PanelTruth> truth;
    if (!config.truth_sidecar.empty()) truth = read_truth(config.truth_sidecar);
    res.means = config.use_truth_means ? truth->params.means : geometric_means(panel);

    StepOptions sopts = config.steps;

    auto run_guarded = [&](const char* name, auto&& body) {
        try {
            body();
        } catch (const std::exception& e) {
            failed_step = name;
            failure_message = e.what();
            finish_manifest();
            throw EstimationError(std::string("step ") + name + " failed: " + e.what());
        }
    };

    if (config.run_step1)
        run_guarded("1 (production elasticities)", [&] {
            res.step1 = step1_estimate(panel, res.means, sopts);
        });
    if (config.run_step2 && res.step1)
        run_guarded("2 (capital wedge)", [&] {
            res.step2 = step2_estimate(panel, *res.step1, res.means, sopts);
        });
    if (config.run_step3 && res.step2)
        run_guarded("3 (kalman decomposition)", [&] {
            const StateSpaceSpec spec =
                StateSpaceSpec::build(panel, res.step2->omega_tilde, res.step2->iota_H,
                                      res.step2->rho_H, res.step2->beta_H1, res.step2->beta_H2);
            res.sigma_H = estimate_sigma_H(spec);
            res.smoother = kalman_smooth(spec, res.sigma_H->sigma_H2);
        });

    ProductionParams est_params;
    if (config.run_step4 && res.smoother)
        run_guarded("4 (market power)", [&] {
            est_params.sigma_O = res.step1->sigmas.O;
            est_params.sigma_M = res.step1->sigmas.M;
            est_params.sigma_I = res.step1->sigmas.I;
            est_params.tau = res.step2->tau;
            est_params.means = res.means;
            est_params.worker = worker_shares_from_means(res.means);
            est_params.input = shares_from_tau(res.step2->tau, res.means);
            res.records = market_power_step4(panel, est_params, res.step1->omega_L_hat,
                                             res.smoother->omega_H_hat);
        });

    if (config.run_step5 && !res.records.empty())
        run_guarded("5 (labor supply and conduct)", [&] {
            const LaborSupplyData data_C =
                panel_labor_supply_data(panel, WorkerType::Temporary, res.interval_per_row);
            const LaborSupplyData data_D =
                panel_labor_supply_data(panel, WorkerType::Permanent, res.interval_per_row);
            res.supply_C = estimate_labor_supply(data_C);
            res.supply_D = estimate_labor_supply(data_D);
            augment_market_power(res.records, panel, res.supply_C->params,
                                 res.supply_D->params, res.interval_per_row, std::nullopt);
            const ThetaInputs tin = build_theta_inputs(
                panel, res.records, res.supply_C->params, res.supply_D->params, res.means,
                res.step1->sigmas.I, res.interval_per_row);
            res.theta = estimate_theta(tin);
            augment_market_power(res.records, panel, res.supply_C->params,
                                 res.supply_D->params, res.interval_per_row,
                                 res.theta->theta);
            if (config.theta_bootstrap_reps > 0) {
                PairsBootstrapOptions bopts;
                bopts.reps = config.theta_bootstrap_reps;
                bopts.seed = config.bootstrap_seed;
                bopts.workers = config.workers;
                res.theta_report = pairs_bootstrap_theta(tin, bopts);
            }
        });

    if (config.bootstrap_reps > 0 && res.smoother)
        run_guarded("bootstrap", [&] {
            FittedSteps fitted{res.means, *res.step1, *res.step2, *res.sigma_H, *res.smoother};
            WildBootstrapOptions bopts;
            bopts.reps = config.bootstrap_reps;
            bopts.seed = config.bootstrap_seed;
            bopts.level = config.bootstrap_per_observation ? PerturbationLevel::PerObservation
                                                           : PerturbationLevel::PerPlant;
            bopts.step_options = sopts;
            bopts.workers = config.workers;
            res.wild_report = wild_bootstrap(panel, fitted, bopts);
        });

    // ---- persist artifacts ----
    run_guarded("emit (artifacts)", [&] {
        if (res.step1) {
            std::vector<std::vector<std::string>> rows;
            auto add = [&](const std::string& name, double v) {
                rows.push_back({name, format_double(v)});
            };
            add("sigma_O", res.step1->sigmas.O);
            add("sigma_M", res.step1->sigmas.M);
            add("sigma_I", res.step1->sigmas.I);
            if (res.step2) {
                add("tau", res.step2->tau);
                const InputShares sh = shares_from_tau(res.step2->tau, res.means);
                add("alpha_K", sh.alpha_K);
                add("alpha_M", sh.alpha_M);
                add("alpha_L", sh.alpha_L);
            }
            const WorkerShares w = worker_shares_from_means(res.means);
            add("alpha_H", w.alpha_H);
            add("alpha_B", w.alpha_B);
            add("alpha_C", w.alpha_C);
            add("alpha_D", w.alpha_D);
            if (res.sigma_H) add("sigma_H", res.sigma_H->sigma_H);
            add("step1_J", res.step1->gmm.J);
            add("step1_J_pvalue", res.step1->gmm.J_pvalue);
            const std::string path = out_dir + "/params_production.csv";
            write_csv(path, {"parameter", "estimate"}, rows);
            res.outputs.push_back(path);
        }
        if (res.step1 && res.step2) {
            std::vector<std::vector<std::string>> rows;
            rows.push_back({"rho_H", format_double(res.step2->rho_H)});
            rows.push_back({"rho_L", format_double(res.step1->rho_L)});
            rows.push_back({"beta_H1", format_double(res.step2->beta_H1)});
            rows.push_back({"beta_L1", format_double(res.step1->beta_L1)});
            rows.push_back({"beta_H2", format_double(res.step2->beta_H2)});
            rows.push_back({"beta_L2", format_double(res.step1->beta_L2)});
            for (const auto& [y, v] : res.step2->iota_H)
                rows.push_back({"iota_H_" + std::to_string(y), format_double(v)});
            for (const auto& [y, v] : res.step1->iota_L)
                rows.push_back({"iota_L_" + std::to_string(y), format_double(v)});
            const std::string path = out_dir + "/params_productivity.csv";
            write_csv(path, {"parameter", "estimate"}, rows);
            res.outputs.push_back(path);
        }
        if (res.step1 && res.smoother) {
            std::vector<std::vector<std::string>> rows;
            for (std::size_t i = 0; i < panel.size(); ++i) {
                const double tfp_i =
                    tfp(panel[i], res.smoother->omega_H_hat[i], res.step1->omega_L_hat[i]);
                rows.push_back({panel[i].plant_id, std::to_string(panel[i].year),
                                format_double(res.step1->omega_L_hat[i]),
                                format_double(res.step1->xi_L_hat[i]),
                                format_double(res.step2 ? res.step2->omega_tilde[i]
                                                        : std::numeric_limits<double>::quiet_NaN()),
                                format_double(res.smoother->omega_H_hat[i]),
                                format_double(res.smoother->eps_hat[i]),
                                format_double(res.smoother->xi_H_hat[i]),
                                format_double(tfp_i),
                                format_double(std::log(panel[i].P * panel[i].Q_obs))});
            }
            const std::string path = out_dir + "/productivity.csv";
            write_csv(path,
                      {"plant_id", "year", "omega_L_hat", "xi_L_hat", "omega_tilde",
                       "omega_H_hat", "eps_hat", "xi_H_hat", "tfp", "log_revenue"},
                      rows);
            res.outputs.push_back(path);
        }
        if (!res.records.empty())
            write_market_power_csv(out_dir + "/market_power.csv", panel, res.records,
                                   res.outputs);
        if (res.supply_C && res.supply_D) {
            std::vector<std::vector<std::string>> rows;
            auto add_type = [&](const char* type, const LaborSupplyEstimate& e) {
                auto add = [&](const char* param, const char* iv_name) {
                    rows.push_back({type, param, format_double(e.ols.coef_of(iv_name)),
                                    format_double(e.ols.se_of(iv_name)),
                                    format_double(e.iv.coef_of(iv_name)),
                                    format_double(e.iv.se_of(iv_name))});
                };
                add("gamma", "wage");
                add("gamma_t", "wage_x_interval");
                add("eta", "log_cond_share");
                add("trend", "trend");
                add("constant", "const");
                for (std::size_t k = 0; k < e.iv.first_stage_F.size(); ++k)
                    rows.push_back({type, "first_stage_F_" + std::to_string(k), "", "",
                                    format_double(e.iv.first_stage_F[k]), ""});
                rows.push_back({type, "hansen_J", "", "", format_double(e.iv.hansen_J),
                                format_double(e.iv.hansen_p)});
                rows.push_back({type, "N", "", "", std::to_string(e.iv.n_obs), ""});
            };
            add_type("temporary", *res.supply_C);
            add_type("permanent", *res.supply_D);
            const std::string path = out_dir + "/params_labor_supply.csv";
            write_csv(path, {"worker_type", "parameter", "ols", "ols_se", "iv", "iv_se"}, rows);
            res.outputs.push_back(path);
        }
        if (res.theta) {
            std::vector<std::vector<std::string>> rows;
            rows.push_back({"nash_weights_ratio_ols",
                            format_double(res.theta->ols.coef_of("surplus_ratio")),
                            format_double(res.theta->ols.se_of("surplus_ratio"))});
            rows.push_back({"nash_weights_ratio_iv", format_double(res.theta->coef),
                            format_double(res.theta->se_coef)});
            rows.push_back({"theta", format_double(res.theta->theta),
                            format_double(res.theta->se_theta)});
            rows.push_back({"first_stage_F", format_double(res.theta->iv.first_stage_F[0]), ""});
            rows.push_back({"hansen_J", format_double(res.theta->iv.hansen_J),
                            format_double(res.theta->iv.hansen_p)});
            rows.push_back({"N", std::to_string(res.theta->iv.n_obs), ""});
            rows.push_back({"nonnegative_coef_flag",
                            std::to_string(res.theta->nonnegative_coef ? 1 : 0), ""});
            const std::string path = out_dir + "/params_conduct.csv";
            write_csv(path, {"parameter", "estimate", "se"}, rows);
            res.outputs.push_back(path);
        }
        if (!res.records.empty()) {
            ReportInputs rin;
            rin.working_days = config.working_days;
            rin.lerner_restrict = config.lerner_restrict;
            for (std::size_t i = 0; i < panel.size(); ++i) {
                rin.years.push_back(panel[i].year);
                rin.log_revenue.push_back(std::log(panel[i].P * panel[i].Q_obs));
                rin.W_C.push_back(panel[i].W_C);
                rin.W_D.push_back(panel[i].W_D);
            }
            rin.records = res.records;
            if (res.smoother && res.step1) {
                rin.omega_H = res.smoother->omega_H_hat;
                rin.omega_L = res.step1->omega_L_hat;
            }
            emit_reports(out_dir, rin, res.outputs);
        }
        if (res.wild_report)
            write_bootstrap_csvs(out_dir, "bootstrap_wild", *res.wild_report, res.outputs);
        if (res.theta_report)
            write_bootstrap_csvs(out_dir, "bootstrap_theta", *res.theta_report, res.outputs);
    });

    finish_manifest();
    return res;
}

void emit_report_from_artifacts(const std::string& artifact_dir, const RunConfig& config,
                                const std::string& out_dir) {
    fs::create_directories(out_dir);
    const CsvTable t = read_csv(artifact_dir + "/market_power.csv");
    ReportInputs rin;
    rin.working_days = config.working_days;
    rin.lerner_restrict = config.lerner_restrict;
    auto col = [&](const char* name) { return t.require_column(name); };
    const int c_year = col("year"), c_wc = col("W_C"), c_wd = col("W_D"),
              c_rev = col("log_revenue");
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& row = t.rows[r];
        const int rowno = static_cast<int>(r) + 2;
        MarketPowerRecord rec;
        rec.plant_id = row[static_cast<std::size_t>(col("plant_id"))];
        rec.year = parse_int(row[static_cast<std::size_t>(c_year)], "year", rowno);
        auto d = [&](const char* name) {
            return parse_double(row[static_cast<std::size_t>(col(name))], name, rowno);
        };
        rec.mu = d("mu");
        rec.mu_labor = d("mu_labor");
        rec.mc = d("mc");
        rec.lerner = d("lerner");
        rec.pi_hat = d("pi_hat");
        rec.q_hat = d("q_hat");
        rec.tfp = d("tfp");
        rec.nu_tilde_C = d("nu_tilde_C");
        rec.nu_tilde_D = d("nu_tilde_D");
        rec.nu_C = d("nu_C");
        rec.nu_D_NB = d("nu_D_NB");
        rec.nu_D_NN = d("nu_D_NN");
        rec.F_C = d("F_C");
        rec.F_D = d("F_D");
        rec.markdown_C = d("markdown_C");
        rec.markdown_D_NB = d("markdown_D_NB");
        rec.markdown_D_NN = d("markdown_D_NN");
        rec.mu_valid = d("mu_valid") != 0;
        rec.lerner_positive = d("lerner_positive") != 0;
        rec.nu_D_NN_in_range = d("nu_D_NN_in_range") != 0;
        rin.records.push_back(rec);
        rin.years.push_back(rec.year);
        rin.W_C.push_back(parse_double(row[static_cast<std::size_t>(c_wc)], "W_C", rowno));
        rin.W_D.push_back(parse_double(row[static_cast<std::size_t>(c_wd)], "W_D", rowno));
        rin.log_revenue.push_back(
            parse_double(row[static_cast<std::size_t>(c_rev)], "log_revenue", rowno));
    }
    std::vector<std::string> outputs;
    emit_reports(out_dir, rin, outputs);
}

}  // namespace cesmark
