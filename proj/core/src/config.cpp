#include "cesmark/config.hpp"

#include <algorithm>
#include <fstream>

#include <json.hpp>

#include "cesmark/dgp.hpp"

namespace cesmark {

using nlohmann::json;

void RunConfig::validate() const {
    if (input_csv.empty()) throw ConfigError("input_csv must be set");
    if (use_truth_means && truth_sidecar.empty())
        throw ConfigError("use_truth_means requires truth_sidecar");
    if (!std::is_sorted(interval_starts.begin(), interval_starts.end()) ||
        std::adjacent_find(interval_starts.begin(), interval_starts.end()) !=
            interval_starts.end())
        throw ConfigError("interval_starts must be strictly increasing");
    if (bootstrap_reps < 0 || theta_bootstrap_reps < 0)
        throw ConfigError("bootstrap replication counts must be nonnegative");
    if (run_step2 && !run_step1) throw ConfigError("step 2 requires step 1");
    if (run_step3 && !run_step2) throw ConfigError("step 3 requires step 2");
    if (run_step4 && !run_step3) throw ConfigError("step 4 requires step 3");
    if (run_step5 && !run_step4) throw ConfigError("step 5 requires step 4");
}

int RunConfig::interval_of(int year, int min_year, int max_year) const {
    if (!interval_starts.empty()) {
        int a = 0;
        for (std::size_t k = 0; k < interval_starts.size(); ++k)
            if (year >= interval_starts[k]) a = static_cast<int>(k);
        return a;
    }
    const int span = std::max(1, max_year - min_year + 1);
    const int t = std::clamp(year - min_year, 0, span - 1);
    return std::min(3, (t * 4) / span);
}

namespace {

template <typename T>
void maybe(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }

    RunConfig cfg;
    maybe(j, "input_csv", cfg.input_csv);
    maybe(j, "truth_sidecar", cfg.truth_sidecar);
    maybe(j, "use_truth_means", cfg.use_truth_means);
    maybe(j, "run_step1", cfg.run_step1);
    maybe(j, "run_step2", cfg.run_step2);
    maybe(j, "run_step3", cfg.run_step3);
    maybe(j, "run_step4", cfg.run_step4);
    maybe(j, "run_step5", cfg.run_step5);
    maybe(j, "seed", cfg.seed);
    maybe(j, "workers", cfg.workers);
    maybe(j, "bootstrap_reps", cfg.bootstrap_reps);
    maybe(j, "bootstrap_seed", cfg.bootstrap_seed);
    maybe(j, "bootstrap_per_observation", cfg.bootstrap_per_observation);
    maybe(j, "theta_bootstrap_reps", cfg.theta_bootstrap_reps);
    maybe(j, "lerner_restrict", cfg.lerner_restrict);
    maybe(j, "working_days", cfg.working_days);
    maybe(j, "interval_starts", cfg.interval_starts);
    maybe(j, "use_perpetual_inventory", cfg.use_perpetual_inventory);
    maybe(j, "depreciation", cfg.depreciation);

    if (j.contains("optimizer")) {
        const auto& o = j.at("optimizer");
        maybe(o, "multistarts", cfg.steps.optimizer.multistarts);
        maybe(o, "nm_max_iter", cfg.steps.optimizer.nm_max_iter);
        maybe(o, "nm_ftol", cfg.steps.optimizer.nm_ftol);
        maybe(o, "seed", cfg.steps.optimizer.seed);
    }
    if (j.contains("instruments")) {
        const auto& o = j.at("instruments");
        maybe(o, "extra_columns", cfg.steps.extra_instrument_columns);
        maybe(o, "lagged_employment", cfg.steps.use_lagged_employment_instruments);
        maybe(o, "strike", cfg.steps.use_strike_instrument);
    }
    if (j.contains("weighting")) {
        const std::string w = j.at("weighting").get<std::string>();
        if (w == "identity")
            cfg.steps.weighting = Weighting::Identity;
        else if (w == "two-step-optimal")
            cfg.steps.weighting = Weighting::TwoStepOptimal;
        else
            throw ConfigError("unknown weighting: " + w);
    }
    cfg.validate();
    return cfg;
}

std::string run_config_canonical_json(const RunConfig& cfg) {
    json j;
    j["input_csv"] = cfg.input_csv;
    j["truth_sidecar"] = cfg.truth_sidecar;
    j["use_truth_means"] = cfg.use_truth_means;
    j["run_step1"] = cfg.run_step1;
    j["run_step2"] = cfg.run_step2;
    j["run_step3"] = cfg.run_step3;
    j["run_step4"] = cfg.run_step4;
    j["run_step5"] = cfg.run_step5;
    j["seed"] = cfg.seed;
    j["workers"] = cfg.workers;
    j["bootstrap_reps"] = cfg.bootstrap_reps;
    j["bootstrap_seed"] = cfg.bootstrap_seed;
    j["bootstrap_per_observation"] = cfg.bootstrap_per_observation;
    j["theta_bootstrap_reps"] = cfg.theta_bootstrap_reps;
    j["lerner_restrict"] = cfg.lerner_restrict;
    j["working_days"] = cfg.working_days;
    j["interval_starts"] = cfg.interval_starts;
    j["use_perpetual_inventory"] = cfg.use_perpetual_inventory;
    j["depreciation"] = cfg.depreciation;
    j["optimizer"] = {{"multistarts", cfg.steps.optimizer.multistarts},
                      {"nm_max_iter", cfg.steps.optimizer.nm_max_iter},
                      {"nm_ftol", cfg.steps.optimizer.nm_ftol},
                      {"seed", cfg.steps.optimizer.seed}};
    j["instruments"] = {{"extra_columns", cfg.steps.extra_instrument_columns},
                        {"lagged_employment", cfg.steps.use_lagged_employment_instruments},
                        {"strike", cfg.steps.use_strike_instrument}};
    j["weighting"] =
        cfg.steps.weighting == Weighting::Identity ? "identity" : "two-step-optimal";
    return j.dump();  // nlohmann emits object keys sorted: canonical
}

DgpConfig load_dgp_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }

    DgpConfig cfg = default_dgp_config();
    maybe(j, "sigma_O", cfg.sigma_O);
    maybe(j, "sigma_M", cfg.sigma_M);
    maybe(j, "sigma_I", cfg.sigma_I);
    maybe(j, "tau", cfg.tau);
    maybe(j, "n_plants", cfg.n_plants);
    maybe(j, "n_years", cfg.n_years);
    maybe(j, "n_markets", cfg.n_markets);
    maybe(j, "first_year", cfg.first_year);
    maybe(j, "seed", cfg.seed);
    maybe(j, "theta", cfg.theta);
    maybe(j, "mu", cfg.mu);
    maybe(j, "demand_elasticity", cfg.demand_elasticity);
    maybe(j, "g_C", cfg.g_C);
    maybe(j, "g_D", cfg.g_D);
    maybe(j, "amenity_sd_C", cfg.amenity_sd_C);
    maybe(j, "amenity_sd_D", cfg.amenity_sd_D);
    maybe(j, "calibration_passes", cfg.calibration_passes);
    if (j.contains("conduct")) {
        const std::string c = j.at("conduct").get<std::string>();
        if (c == "nash_bertrand")
            cfg.conduct = Conduct::NashBertrand;
        else if (c == "nash_bargaining")
            cfg.conduct = Conduct::NashBargaining;
        else
            throw ConfigError("unknown conduct: " + c);
    }
    if (j.contains("markup_rule")) {
        const std::string m = j.at("markup_rule").get<std::string>();
        if (m == "constant")
            cfg.markup_rule = MarkupRule::Constant;
        else if (m == "isoelastic")
            cfg.markup_rule = MarkupRule::Isoelastic;
        else
            throw ConfigError("unknown markup_rule: " + m);
    }
    double sigma_H = cfg.productivity.sigma_H, sigma_L = cfg.productivity.sigma_L;
    double sigma_eps = cfg.productivity.sigma_eps;
    maybe(j, "sigma_H", sigma_H);
    maybe(j, "sigma_L", sigma_L);
    maybe(j, "sigma_eps", sigma_eps);
    cfg.productivity.sigma_H = sigma_H;
    cfg.productivity.sigma_L = sigma_L;
    cfg.productivity.sigma_eps = sigma_eps;
    // Year-effect maps follow the panel span when the shape changed.
    cfg.productivity.hicks.iota.clear();
    cfg.productivity.labor.iota.clear();
    for (int t = 0; t < cfg.n_years; ++t) {
        const int year = cfg.first_year + t;
        const double centered = t - 0.5 * (cfg.n_years - 1);
        cfg.productivity.hicks.iota[year] = -0.015 * centered;
        cfg.productivity.labor.iota[year] = 0.010 * centered;
    }
    return cfg;
}

std::uint64_t fnv1a64(const std::string& text) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

}  // namespace cesmark
