#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pvctl/correlation.hpp"
#include "pvctl/data_ingest.hpp"
#include "pvctl/dispatch.hpp"
#include "pvctl/grouping_control.hpp"
#include "pvctl/hier_control.hpp"
#include "pvctl/pv_model.hpp"
#include "pvctl/tick_scheduler.hpp"

namespace pvctl {

enum class ControllerKind { Hierarchical, Grouping, Uncontrolled };

std::string_view to_string(ControllerKind kind);
/// Throws ConfigError for an unknown name.
ControllerKind parse_controller(std::string_view name);

enum class TraceLevel { All, Help, None };

struct PlantConfig {
  std::vector<std::string> inverter_ids;
  std::vector<std::string> sensors;  // irradiance column read by each inverter
  std::vector<PvArrayConfig> arrays;
  std::vector<std::size_t> cluster_sizes;
  Clusters clusters;  // explicit partition; empty means derive from correlation

  std::size_t size() const noexcept { return arrays.size(); }
};

struct IrradianceSource {
  std::optional<std::filesystem::path> file;
  std::int64_t max_gap_s = 60;
  std::optional<ScenarioSpec> scenario;
};

struct CommitmentConfig {
  std::optional<CommitmentSchedule> schedule;
  /// Commitment as a fraction of the plant's output under the scenario's cloud-free sky.
  std::optional<double> clear_sky_fraction;
};

struct RegulationConfig {
  std::optional<std::filesystem::path> file;
  std::optional<RegulationSynthSpec> synth;
  ActiveWindow window;
  std::optional<double> reserve_kw;  // default: headroom_fraction * sum of AC limits
  double tolerance_pct = 0.5;
};

struct ControlConfig {
  HierarchyConfig hierarchy;
  TickMode tick_mode = TickMode::Instant;
  LayerCadences cadences;
};

struct CorrelationConfig {
  int window_days = 1;
  std::optional<IrradianceSource> training;
};

struct RunConfig {
  std::filesystem::path base_dir;
  PlantConfig plant;
  IrradianceSource irradiance;
  ControllerKind controller = ControllerKind::Hierarchical;
  GroupingMode grouping_mode = GroupingMode::Commitment;
  double headroom_fraction = kDefaultHeadroomFraction;
  CommitmentConfig commitment;
  RegulationConfig regulation;
  ControlConfig control;
  CorrelationConfig correlation;
  std::int64_t utc_offset_s = 0;
  std::filesystem::path output_dir = "out";
  std::uint64_t seed = 0;
  TraceLevel message_trace = TraceLevel::Help;

  std::string source_json;  // document the config was parsed from
};

/// Relative paths inside the document resolve against `base_dir`.
RunConfig parse_run_config(std::string_view json_text, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);

/// The source document with controller, seed and output directory replaced
/// by the values currently held in `cfg`, pretty-printed.
std::string config_snapshot(const RunConfig& cfg);

}  // namespace pvctl
