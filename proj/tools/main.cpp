// Command-line front end: synthetic panel generation, the five-step
// estimation pipeline, bootstrap inference, report emission and schema
// validation. Exit codes: 0 success, 2 validation failure, 3 estimation
// failure.

#include <CLI11.hpp>
#include <filesystem>
#include <iostream>
#include <string>

#include "cesmark/config.hpp"
#include "cesmark/dgp.hpp"
#include "cesmark/pipeline.hpp"

namespace fs = std::filesystem;
using namespace cesmark;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitEstimation = 3;

void apply_steps_range(RunConfig& cfg, const std::string& steps) {
    int hi = 5;
    const auto dots = steps.find("..");
    if (dots != std::string::npos)
        hi = std::stoi(steps.substr(dots + 2));
    else
        hi = std::stoi(steps);
    if (hi < 1 || hi > 5) throw ConfigError("--steps must select a range within 1..5");
    cfg.run_step1 = hi >= 1;
    cfg.run_step2 = hi >= 2;
    cfg.run_step3 = hi >= 3;
    cfg.run_step4 = hi >= 4;
    cfg.run_step5 = hi >= 5;
}

int run_simulate(const std::string& config_path, std::uint64_t seed, bool seed_set,
                 const std::string& out_dir) {
    DgpConfig cfg = config_path.empty() ? default_dgp_config() : load_dgp_config(config_path);
    if (seed_set) cfg.seed = seed;
    fs::create_directories(out_dir);
    const SimulatedPanel sim = simulate_panel(cfg);
    const std::string panel_path = out_dir + "/panel.csv";
    write_panel_csv(panel_path, sim.panel);
    write_truth(out_dir + "/panel.truth", sim.truth);
    std::cout << "wrote " << sim.panel.size() << " observations to " << panel_path << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"nested-CES production and labor market power toolkit"};
    app.require_subcommand(1);

    std::string config_path, out_dir = "out", steps_range, artifact_dir, input_csv;
    std::uint64_t seed = 0;
    int reps = -1;
    int workers = 0;

    auto* sim = app.add_subcommand("simulate", "generate a synthetic establishment panel");
    sim->add_option("--config", config_path, "generator config JSON");
    auto* sim_seed = sim->add_option("--seed", seed, "master seed");
    sim->add_option("--out", out_dir, "output directory");

    auto* est = app.add_subcommand("estimate", "run the estimation pipeline");
    est->add_option("--config", config_path, "run config JSON")->required();
    auto* est_seed = est->add_option("--seed", seed, "override config seed");
    est->add_option("--out", out_dir, "artifact directory");
    est->add_option("--steps", steps_range, "steps to run, e.g. 1..3");
    est->add_option("--reps", reps, "override wild bootstrap replications");
    est->add_option("--workers", workers, "parallel workers for bootstrap");

    auto* boot = app.add_subcommand("bootstrap", "wild bootstrap of steps 1-3");
    boot->add_option("--config", config_path, "run config JSON")->required();
    boot->add_option("--reps", reps, "replications")->required();
    auto* boot_seed = boot->add_option("--seed", seed, "bootstrap seed");
    boot->add_option("--out", out_dir, "artifact directory");
    boot->add_option("--workers", workers, "parallel workers");

    auto* rep = app.add_subcommand("report", "re-emit summary tables and plot data");
    rep->add_option("--in", artifact_dir, "artifact directory of a previous run")->required();
    rep->add_option("--config", config_path, "run config JSON for report toggles");
    rep->add_option("--out", out_dir, "output directory");

    auto* val = app.add_subcommand("validate", "schema-check a panel CSV");
    val->add_option("input", input_csv, "panel CSV path")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (sim->parsed())
            return run_simulate(config_path, seed, !sim_seed->empty(), out_dir);
        if (est->parsed() || boot->parsed()) {
            RunConfig cfg = load_run_config(config_path);
            if (est->parsed() && !est_seed->empty()) cfg.seed = seed;
            if (boot->parsed()) {
                cfg.bootstrap_reps = reps;
                if (!boot_seed->empty()) cfg.bootstrap_seed = seed;
            } else if (reps >= 0) {
                cfg.bootstrap_reps = reps;
            }
            if (!steps_range.empty()) apply_steps_range(cfg, steps_range);
            if (workers > 0) cfg.workers = workers;
            const PipelineResult res = run_pipeline(cfg, out_dir);
            std::cout << "wrote " << res.outputs.size() + 1 << " artifacts to " << out_dir
                      << "\n";
            return kExitOk;
        }
        if (rep->parsed()) {
            RunConfig cfg;
            if (!config_path.empty()) cfg = load_run_config(config_path);
            emit_report_from_artifacts(artifact_dir, cfg, out_dir);
            std::cout << "report written to " << out_dir << "\n";
            return kExitOk;
        }
        if (val->parsed()) {
            const Panel p = ingest(input_csv);
            std::cout << "OK: " << p.size() << " observations\n";
            return kExitOk;
        }
    } catch (const ConfigError& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const DomainError& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const ParameterError& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "estimation error: " << e.what() << "\n";
        return kExitEstimation;
    }
    return kExitOk;
}
