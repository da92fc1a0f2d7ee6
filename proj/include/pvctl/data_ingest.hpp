#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pvctl/series_matrix.hpp"
#include "pvctl/time_grid.hpp"

namespace pvctl {

inline constexpr double kIrradianceMinWm2 = 0.0;
inline constexpr double kIrradianceMaxWm2 = 1500.0;
inline constexpr std::int64_t kCloudRampSteps = 10;

/// Per-sensor global horizontal irradiance on a shared uniform time grid.
/// Missing samples are NaN until fill_gaps() has run.
struct IrradianceDataset {
  Timestamp start_time = 0;
  std::int64_t step_s = 1;
  std::vector<std::string> sensors;
  SeriesMatrix values;  // [timestep x sensor], W/m^2

  std::size_t steps() const noexcept { return values.rows(); }
  TimeGrid grid() const { return {start_time, step_s, values.rows()}; }
  bool has_gaps() const;
  std::size_t sensor_index(const std::string& id) const;  // throws SchemaError
};

/// Output of a loader together with the number of values it had to clamp.
template <class T>
struct Loaded {
  T value;
  std::size_t clamped = 0;
};

struct CsvSchema {
  std::string timestamp_column = "timestamp";
  /// Sensor columns to load, in this order. Empty selects every column other
  /// than the timestamp, in header order.
  std::vector<std::string> sensor_columns;
};

Loaded<IrradianceDataset> parse_irradiance_csv(const std::filesystem::path& path,
                                               const CsvSchema& schema = {});
Loaded<IrradianceDataset> parse_irradiance_csv(std::istream& in, const CsvSchema& schema = {});

/// Writes the `timestamp,<sensor>...` layout read by parse_irradiance_csv.
/// Values are printed in shortest round-trip form; missing values as empty.
void write_irradiance_csv(const IrradianceDataset& dataset, std::ostream& out);

/// Linear interpolation across interior runs of missing samples, flat
/// extrapolation at either edge. A run whose duration (missing samples x
/// step) exceeds `max_gap_s` raises GapError.
IrradianceDataset fill_gaps(IrradianceDataset dataset, std::int64_t max_gap_s);

// ---------------------------------------------------------------------------
// Synthetic scenarios

struct CloudEvent {
  std::vector<std::string> sensors;
  std::int64_t start_s = 0;  // offset from scenario start
  std::int64_t duration_s = 0;
  double depth = 0.0;  // fraction of irradiance removed at the floor, [0, 1]
};

/// Seeded generator for moving clouds: each event shades a run of adjacent
/// sensors (adjacency = sorted sensor id order), each hit after its own lag.
struct RandomCloudEvents {
  std::size_t count = 0;
  std::int64_t min_duration_s = 30;
  std::int64_t max_duration_s = 180;
  double min_depth = 0.3;
  double max_depth = 0.8;
  std::size_t min_sensors = 1;
  std::size_t max_sensors = 3;
  std::int64_t max_lag_s = 0;
};

enum class IrradianceProfile { Flat, Diurnal };

struct ScenarioSpec {
  Timestamp start_time = 0;
  std::int64_t step_s = 1;
  std::size_t n_steps = 0;
  double base_wm2 = 1000.0;
  std::vector<std::string> sensors;
  IrradianceProfile profile = IrradianceProfile::Flat;
  double sunrise_h = 6.0;  // diurnal profile only, hours after midnight UTC
  double sunset_h = 18.0;
  std::vector<CloudEvent> events;
  RandomCloudEvents random_events;
  double noise_amp = 0.0;  // W/m^2, uniform in [-amp, +amp] while the sun is up
};

/// Default sensor ids S01..Snn.
std::vector<std::string> default_sensor_ids(std::size_t n);

/// Explicit events plus the seeded random ones.
std::vector<CloudEvent> expand_cloud_events(const ScenarioSpec& spec, std::uint64_t seed);

/// Deterministic in (spec, seed). Each cloud event scales its sensors by
/// (1 - depth * w) where w ramps linearly over kCloudRampSteps at both edges.
IrradianceDataset synth_cloud_scenario(const ScenarioSpec& spec, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Dispatch inputs

/// Normalised regulation setpoints in [-1, +1], one per `step_s`.
struct RegulationSignal {
  std::int64_t step_s = 2;
  std::optional<Timestamp> start_time;  // set when the source carried timestamps
  std::vector<double> values;
};

Loaded<RegulationSignal> load_regulation_csv(const std::filesystem::path& path);
Loaded<RegulationSignal> load_regulation_csv(std::istream& in);

/// Band-limited random walk resembling a fast regulation signal.
struct RegulationSynthSpec {
  std::size_t n_values = 0;
  std::int64_t step_s = 2;
  double volatility = 0.08;  // std-dev of the per-sample innovation
  double reversion = 0.02;   // pull toward zero per sample
};

RegulationSignal synth_regulation_signal(const RegulationSynthSpec& spec, std::uint64_t seed);

struct CommitmentSchedule {
  enum class Interpolation { StepHold, Linear };

  std::vector<std::pair<std::int64_t, double>> breakpoints;  // (seconds of day, kW)
  Interpolation interpolation = Interpolation::Linear;

  /// Throws ConfigError on negative power or non-increasing times.
  void validate() const;
  /// Holds the first/last value outside the breakpoint range.
  double at(std::int64_t second_of_day) const;
};

}  // namespace pvctl
