#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pvctl/config.hpp"
#include "pvctl/metrics.hpp"

namespace pvctl {

/// Everything a run needs once files and scenarios have been materialised.
struct SimulationInputs {
  TimeGrid grid;
  SeriesMatrix true_mpp;  // [timestep x inverter], kW
  std::vector<DispatchSignal> dispatch;
  Clusters clusters;
  std::optional<HourlyCorrelation> training;
  std::vector<double> capacity_kw;  // AC limits
  std::size_t clamped_samples = 0;
};

SimulationInputs prepare_inputs(const RunConfig& cfg);

/// Hourly matrices of the run's available power.
HourlyCorrelation run_correlation(const RunConfig& cfg, const SimulationInputs& inputs);

struct StepView {
  std::size_t index = 0;
  const DispatchSignal* dispatch = nullptr;
  std::span<const double> impp_est_kw;
  std::span<const double> alpha;
  std::span<const double> setpoint_kw;
  std::span<const double> output_kw;
  std::span<const double> available_kw;
  std::span<const ControlMessage> messages;
  const IterationResult* iteration = nullptr;  // hierarchical runs only
  double planned_kw = 0.0;
};

class StepObserver {
 public:
  virtual ~StepObserver() = default;
  virtual void on_step(const StepView& step) = 0;
};

struct SimulationResult {
  std::vector<double> planned_kw;
  std::vector<double> output_kw;
  std::vector<double> mpp_kw;
  MetricsReport metrics;
  std::size_t messages = 0;
  std::size_t help_requests = 0;
  std::size_t adaptive_messages = 0;
  std::size_t floor_clamp_events = 0;
};

/// Runs the configured controller over the whole grid. Deterministic in (cfg, inputs).
SimulationResult simulate(const RunConfig& cfg, const SimulationInputs& inputs, StepObserver* observer = nullptr);

/// simulate() plus the run artifacts in cfg.output_dir, written as the run progresses:
/// setpoints.csv, messages.csv, plant.csv, metrics.json, metrics.csv, config.json.
SimulationResult run_simulation(const RunConfig& cfg);

struct ComparisonRow {
  std::string metric;
  std::optional<double> a;
  std::optional<double> b;
  std::optional<double> ratio;  // a / b; 1 when both are zero
};

/// Side-by-side metrics of two run directories that share a grid and dispatch.
/// Throws ValidationError when the plant traces disagree on either.
std::vector<ComparisonRow> compare_runs(const std::filesystem::path& run_a, const std::filesystem::path& run_b);

void write_comparison(const std::vector<ComparisonRow>& rows, std::ostream& out);

/// One `hour_HH.csv` per hourly matrix plus `clusters.csv` (`cluster,inverter_id`).
void export_correlation(const RunConfig& cfg, const std::filesystem::path& out_dir);

}  // namespace pvctl
