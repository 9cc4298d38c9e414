#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "twinforge/experiment.hpp"

namespace twinforge::harness {

inline constexpr const char* kUtilityHeader =
    "scheme,sweep_param,sweep_value,seed,mean_sum_rate,construction_cost,deployment_cost,utility,status,"
    "physical_k,twin_noise";
inline constexpr const char* kConvergenceHeader =
    "episode,train_return,eval_sum_rate,moving_avg_200,epsilon,seed,scheme_id";

std::string utility_csv(const UtilityReport& report);
std::string convergence_csv(const UtilityReport& report);

struct ChartSeries {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;
};

// Self-contained SVG line chart.
std::string line_chart_svg(const std::string& title, const std::string& x_label, const std::string& y_label,
                           const std::vector<ChartSeries>& series);

// Recomputes every successful row's costs and utility from its own columns
// and the base economics; throws StateError naming the first mismatch.
// Returns the number of rows checked.
std::size_t audit_utility_csv(const std::string& csv, const fleet::TwinEconomics& base_econ, int m_uavs);

struct EmitOptions {
    std::string command;  // recorded in the manifest
    double total_wall_seconds = 0.0;
};

// Writes utility.csv, convergence.csv, config.resolved.ini, manifest.json,
// surface.csv when a surface was used, and SVG charts for non-empty reports.
// The audit runs on the written utility.csv.
void emit_report(const UtilityReport& report, const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                 const EmitOptions& options = {});

// Redraws the charts from existing CSVs in out_dir and re-runs the audit.
void rerender_report(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);

}  // namespace twinforge::harness
