#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cesmark/bootstrap.hpp"
#include "cesmark/config.hpp"
#include "cesmark/dgp.hpp"
#include "cesmark/kalman.hpp"
#include "cesmark/labor_supply.hpp"
#include "cesmark/markets.hpp"
#include "cesmark/steps.hpp"
#include "cesmark/types.hpp"

namespace cesmark {

/// Validated panel from a wide-format CSV. Columns prefixed z_ become named
/// extra instruments. Throws ConfigError with row numbers on bad cells.
Panel ingest(const std::string& path);

void write_panel_csv(const std::string& path, const Panel& panel);

/// Truth sidecar (JSON content, `.truth` suffix by convention).
void write_truth(const std::string& path, const PanelTruth& truth);
PanelTruth read_truth(const std::string& path);

/// Perpetual-inventory capital: book value when no prior stock exists,
/// otherwise (1 - delta) K_{t-1} + I_{t-1}. Series must be time-ordered.
std::vector<double> perpetual_inventory(const std::vector<double>& K_book,
                                        const std::vector<double>& I_flow, double delta = 0.10);

struct PipelineResult {
    GeometricMeans means;
    std::vector<int> interval_per_row;
    std::optional<Step1Result> step1;
    std::optional<Step2Result> step2;
    std::optional<SigmaHEstimate> sigma_H;
    std::optional<SmootherOutput> smoother;
    std::vector<MarketPowerRecord> records;            // steps 4-5
    std::optional<LaborSupplyEstimate> supply_C, supply_D;
    std::optional<ThetaEstimate> theta;
    std::optional<BootstrapReport> wild_report;
    std::optional<BootstrapReport> theta_report;
    std::vector<std::string> outputs;                  // files written
};

/// Execute the configured steps in order, persisting parameter tables,
/// per-observation series, the market-power summary, plot data and a
/// manifest into `out_dir`. A step failure persists partial outputs plus
/// the manifest, then rethrows tagged with the step name.
PipelineResult run_pipeline(const RunConfig& config, const std::string& out_dir);

/// Re-emit the summary table and plot data from a previous artifact
/// directory, honoring the report toggles of `config`.
void emit_report_from_artifacts(const std::string& artifact_dir, const RunConfig& config,
                                const std::string& out_dir);

}  // namespace cesmark
