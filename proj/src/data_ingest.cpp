#include "pvctl/data_ingest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <random>

#include <fmt/format.h>

#include "csv_util.hpp"
#include "pvctl/error.hpp"

namespace pvctl {
namespace {

constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

double clamp_counted(double v, double lo, double hi, std::size_t& clamped) {
  if (std::isnan(v)) return v;
  if (v < lo) {
    ++clamped;
    return lo;
  }
  if (v > hi) {
    ++clamped;
    return hi;
  }
  return v;
}

std::int64_t check_step(const std::vector<Timestamp>& stamps, std::size_t i, std::int64_t step,
                        std::size_t line) {
  const std::int64_t delta = stamps[i] - stamps[i - 1];
  if (delta <= 0)
    throw ValidationError(fmt::format("line {}: timestamps not strictly increasing ({} after {})", line,
                                      format_iso8601(stamps[i]), format_iso8601(stamps[i - 1])));
  if (step != 0 && delta != step)
    throw ValidationError(
        fmt::format("line {}: irregular time step ({} s, expected {} s)", line, delta, step));
  return delta;
}

std::seed_seq make_seed(std::uint64_t seed, std::string_view salt) {
  std::vector<std::uint32_t> words{static_cast<std::uint32_t>(seed),
                                   static_cast<std::uint32_t>(seed >> 32)};
  for (char c : salt) words.push_back(static_cast<unsigned char>(c));
  return std::seed_seq(words.begin(), words.end());
}

}  // namespace

bool IrradianceDataset::has_gaps() const {
  const auto d = values.data();
  return std::any_of(d.begin(), d.end(), [](double v) { return std::isnan(v); });
}

std::size_t IrradianceDataset::sensor_index(const std::string& id) const {
  const auto it = std::find(sensors.begin(), sensors.end(), id);
  if (it == sensors.end()) throw SchemaError(fmt::format("unknown sensor '{}'", id));
  return static_cast<std::size_t>(it - sensors.begin());
}

Loaded<IrradianceDataset> parse_irradiance_csv(const std::filesystem::path& path,
                                               const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot open irradiance file '{}'", path.string()));
  return parse_irradiance_csv(in, schema);
}

Loaded<IrradianceDataset> parse_irradiance_csv(std::istream& in, const CsvSchema& schema) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string_view> header;
  std::string header_line;
  while (std::getline(in, line)) {
    ++line_no;
    if (!detail::trim(line).empty()) {
      header_line = line;
      header = detail::split_csv(header_line);
      break;
    }
  }
  if (header.empty()) throw SchemaError("irradiance CSV has no header row");

  const auto ts_it = std::find(header.begin(), header.end(), schema.timestamp_column);
  if (ts_it == header.end())
    throw SchemaError(fmt::format("missing timestamp column '{}'", schema.timestamp_column));
  const std::size_t ts_col = static_cast<std::size_t>(ts_it - header.begin());

  std::vector<std::size_t> cols;
  Loaded<IrradianceDataset> out;
  auto& ds = out.value;
  if (schema.sensor_columns.empty()) {
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (c == ts_col) continue;
      cols.push_back(c);
      ds.sensors.emplace_back(header[c]);
    }
  } else {
    for (const auto& name : schema.sensor_columns) {
      const auto it = std::find(header.begin(), header.end(), name);
      if (it == header.end()) throw SchemaError(fmt::format("missing sensor column '{}'", name));
      cols.push_back(static_cast<std::size_t>(it - header.begin()));
      ds.sensors.push_back(name);
    }
  }
  if (cols.empty()) throw SchemaError("irradiance CSV has no sensor columns");

  std::vector<Timestamp> stamps;
  std::int64_t step = 0;
  std::vector<double> row(cols.size());
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split_csv(line);
    if (fields.size() != header.size())
      throw ParseError(line_no, fmt::format("expected {} fields, found {}", header.size(), fields.size()));
    try {
      stamps.push_back(parse_iso8601(fields[ts_col]));
    } catch (const DomainError& e) {
      throw ParseError(line_no, e.what());
    }
    if (stamps.size() > 1) step = check_step(stamps, stamps.size() - 1, step, line_no);
    for (std::size_t k = 0; k < cols.size(); ++k) {
      const auto v = detail::parse_double(fields[cols[k]]);
      if (!v) throw ParseError(line_no, fmt::format("non-numeric value '{}'", fields[cols[k]]));
      row[k] = clamp_counted(*v, kIrradianceMinWm2, kIrradianceMaxWm2, out.clamped);
    }
    ds.values.append_row(row);
  }
  if (stamps.empty()) throw ValidationError("irradiance CSV has no data rows");
  ds.start_time = stamps.front();
  ds.step_s = step == 0 ? 1 : step;
  return out;
}

void write_irradiance_csv(const IrradianceDataset& dataset, std::ostream& out) {
  out << "timestamp";
  for (const auto& s : dataset.sensors) out << ',' << s;
  out << '\n';
  const auto grid = dataset.grid();
  for (std::size_t r = 0; r < dataset.steps(); ++r) {
    out << format_iso8601(grid.at(r));
    for (double v : dataset.values.row(r)) out << ',' << detail::format_double(v);
    out << '\n';
  }
}

IrradianceDataset fill_gaps(IrradianceDataset dataset, std::int64_t max_gap_s) {
  auto& m = dataset.values;
  const std::size_t n = m.rows();
  for (std::size_t c = 0; c < m.cols(); ++c) {
    std::size_t r = 0;
    while (r < n) {
      if (!std::isnan(m(r, c))) {
        ++r;
        continue;
      }
      const std::size_t first = r;
      while (r < n && std::isnan(m(r, c))) ++r;
      const std::size_t last = r - 1;
      const auto length = static_cast<std::int64_t>(r - first);
      if (first == 0 && r == n)
        throw GapError(dataset.sensors[c], first, last,
                       fmt::format("sensor '{}' has no valid samples", dataset.sensors[c]));
      if (length * dataset.step_s > max_gap_s)
        throw GapError(dataset.sensors[c], first, last,
                       fmt::format("sensor '{}': gap of {} s from {} to {} exceeds {} s",
                                   dataset.sensors[c], length * dataset.step_s,
                                   format_iso8601(dataset.grid().at(first)),
                                   format_iso8601(dataset.grid().at(last)), max_gap_s));
      if (first == 0) {
        for (std::size_t k = first; k <= last; ++k) m(k, c) = m(r, c);
      } else if (r == n) {
        for (std::size_t k = first; k <= last; ++k) m(k, c) = m(first - 1, c);
      } else {
        const double a = m(first - 1, c);
        const double b = m(r, c);
        const double span = static_cast<double>(r - (first - 1));
        for (std::size_t k = first; k <= last; ++k)
          m(k, c) = a + (b - a) * static_cast<double>(k - (first - 1)) / span;
      }
    }
  }
  return dataset;
}

std::vector<std::string> default_sensor_ids(std::size_t n) {
  std::vector<std::string> ids;
  ids.reserve(n);
  for (std::size_t i = 1; i <= n; ++i) ids.push_back(fmt::format("S{:02}", i));
  return ids;
}

std::vector<CloudEvent> expand_cloud_events(const ScenarioSpec& spec, std::uint64_t seed) {
  std::vector<CloudEvent> events = spec.events;
  const auto& rnd = spec.random_events;
  if (rnd.count == 0) return events;
  if (spec.sensors.empty()) throw ConfigError("scenario has no sensors");
  if (rnd.min_duration_s <= 0 || rnd.max_duration_s < rnd.min_duration_s)
    throw ConfigError("random_events: invalid duration range");
  if (rnd.min_depth < 0.0 || rnd.max_depth > 1.0 || rnd.max_depth < rnd.min_depth)
    throw ConfigError("random_events: depth range must lie in [0, 1]");
  if (rnd.min_sensors == 0 || rnd.max_sensors < rnd.min_sensors)
    throw ConfigError("random_events: invalid sensor count range");

  // Adjacency follows sorted sensor ids.
  std::vector<std::string> sorted = spec.sensors;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  const auto total_s = static_cast<std::int64_t>(spec.n_steps) * spec.step_s;

  auto seq = make_seed(seed, "cloud-events");
  std::mt19937_64 rng(seq);
  std::uniform_int_distribution<std::int64_t> duration(rnd.min_duration_s, rnd.max_duration_s);
  std::uniform_int_distribution<std::int64_t> start(0, std::max<std::int64_t>(0, total_s - 1));
  std::uniform_real_distribution<double> depth(rnd.min_depth, rnd.max_depth);
  std::uniform_int_distribution<std::size_t> width(rnd.min_sensors, std::min(rnd.max_sensors, n));
  std::uniform_int_distribution<std::size_t> center(0, n - 1);
  std::uniform_int_distribution<std::int64_t> lag(0, rnd.max_lag_s);

  for (std::size_t k = 0; k < rnd.count; ++k) {
    const auto d = duration(rng);
    const auto s = start(rng);
    const double dep = depth(rng);
    const std::size_t w = std::min(width(rng), n);
    std::size_t first = center(rng);
    if (first + w > n) first = n - w;
    for (std::size_t j = 0; j < w; ++j) {
      const auto offset = j == 0 ? 0 : lag(rng);
      events.push_back({{sorted[first + j]}, s + offset, d, dep});
    }
  }
  return events;
}

IrradianceDataset synth_cloud_scenario(const ScenarioSpec& spec, std::uint64_t seed) {
  if (spec.step_s <= 0) throw ConfigError("scenario step must be positive");
  if (spec.sensors.empty()) throw ConfigError("scenario has no sensors");
  if (spec.base_wm2 < 0.0) throw ConfigError("scenario base irradiance must be non-negative");
  if (spec.noise_amp < 0.0) throw ConfigError("scenario noise amplitude must be non-negative");
  if (spec.profile == IrradianceProfile::Diurnal && !(spec.sunset_h > spec.sunrise_h))
    throw ConfigError("scenario sunset must follow sunrise");
  for (const auto& e : spec.events) {
    if (!(e.depth >= 0.0 && e.depth <= 1.0))
      throw ConfigError(fmt::format("cloud event depth {} outside [0, 1]", e.depth));
    if (e.duration_s < 0) throw ConfigError("cloud event duration must be non-negative");
  }

  IrradianceDataset ds;
  ds.start_time = spec.start_time;
  ds.step_s = spec.step_s;
  ds.sensors = spec.sensors;
  ds.values = SeriesMatrix(spec.n_steps, spec.sensors.size());

  for (std::size_t r = 0; r < spec.n_steps; ++r) {
    double base = spec.base_wm2;
    if (spec.profile == IrradianceProfile::Diurnal) {
      const double hour = static_cast<double>(seconds_of_day(ds.grid().at(r))) / 3600.0;
      const double x = (hour - spec.sunrise_h) / (spec.sunset_h - spec.sunrise_h);
      base = (x > 0.0 && x < 1.0) ? spec.base_wm2 * std::sin(std::numbers::pi * x) : 0.0;
    }
    for (std::size_t c = 0; c < ds.sensors.size(); ++c) ds.values(r, c) = base;
  }

  const auto ramp = static_cast<double>(kCloudRampSteps);
  for (const auto& e : expand_cloud_events(spec, seed)) {
    const std::int64_t first = e.start_s / spec.step_s;
    const std::int64_t len = e.duration_s / spec.step_s;
    for (const auto& id : e.sensors) {
      const auto it = std::find(ds.sensors.begin(), ds.sensors.end(), id);
      if (it == ds.sensors.end()) throw ConfigError(fmt::format("cloud event names unknown sensor '{}'", id));
      const auto c = static_cast<std::size_t>(it - ds.sensors.begin());
      for (std::int64_t k = 0; k < len; ++k) {
        const std::int64_t r = first + k;
        if (r < 0) continue;
        if (r >= static_cast<std::int64_t>(spec.n_steps)) break;
        const double w = std::min({1.0, static_cast<double>(k + 1) / ramp, static_cast<double>(len - k) / ramp});
        ds.values(static_cast<std::size_t>(r), c) *= 1.0 - e.depth * w;
      }
    }
  }

  if (spec.noise_amp > 0.0) {
    std::uniform_real_distribution<double> noise(-spec.noise_amp, spec.noise_amp);
    for (std::size_t c = 0; c < ds.sensors.size(); ++c) {
      auto seq = make_seed(seed, "noise:" + ds.sensors[c]);
      std::mt19937_64 rng(seq);
      for (std::size_t r = 0; r < spec.n_steps; ++r) {
        const double n = noise(rng);
        double& v = ds.values(r, c);
        if (v > 0.0) v = std::clamp(v + n, kIrradianceMinWm2, kIrradianceMaxWm2);
      }
    }
  }
  for (std::size_t r = 0; r < spec.n_steps; ++r)
    for (double& v : ds.values.row(r)) v = std::clamp(v, kIrradianceMinWm2, kIrradianceMaxWm2);
  return ds;
}

Loaded<RegulationSignal> load_regulation_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot open regulation file '{}'", path.string()));
  return load_regulation_csv(in);
}

Loaded<RegulationSignal> load_regulation_csv(std::istream& in) {
  Loaded<RegulationSignal> out;
  auto& sig = out.value;
  std::string line;
  std::size_t line_no = 0;
  std::optional<std::size_t> ts_col;
  std::size_t value_col = 0;
  std::size_t width = 0;
  bool header_seen = false;
  std::vector<Timestamp> stamps;
  std::int64_t step = 0;

  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split_csv(line);
    if (!header_seen) {
      header_seen = true;
      const bool numeric = fields.size() == 1 && detail::parse_double(fields[0]).has_value() &&
                           !fields[0].empty();
      if (!numeric) {
        width = fields.size();
        bool found_value = false;
        for (std::size_t c = 0; c < fields.size(); ++c) {
          if (fields[c] == "timestamp") ts_col = c;
          if (fields[c] == "value") {
            value_col = c;
            found_value = true;
          }
        }
        if (!found_value) throw SchemaError("regulation CSV header must contain a 'value' column");
        continue;
      }
      width = 1;
    }
    if (fields.size() != width)
      throw ParseError(line_no, fmt::format("expected {} fields, found {}", width, fields.size()));
    const auto v = detail::parse_double(fields[value_col]);
    if (!v || std::isnan(*v)) throw ParseError(line_no, fmt::format("invalid value '{}'", fields[value_col]));
    if (ts_col) {
      try {
        stamps.push_back(parse_iso8601(fields[*ts_col]));
      } catch (const DomainError& e) {
        throw ParseError(line_no, e.what());
      }
      if (stamps.size() > 1) step = check_step(stamps, stamps.size() - 1, step, line_no);
    }
    sig.values.push_back(clamp_counted(*v, -1.0, 1.0, out.clamped));
  }
  if (sig.values.empty()) throw ValidationError("regulation CSV has no values");
  if (ts_col) {
    sig.start_time = stamps.front();
    if (step != 0) sig.step_s = step;
  }
  return out;
}

RegulationSignal synth_regulation_signal(const RegulationSynthSpec& spec, std::uint64_t seed) {
  if (spec.step_s <= 0) throw ConfigError("regulation step must be positive");
  if (spec.volatility < 0.0 || spec.reversion < 0.0 || spec.reversion > 1.0)
    throw ConfigError("regulation synth parameters out of range");
  RegulationSignal sig;
  sig.step_s = spec.step_s;
  sig.values.reserve(spec.n_values);
  auto seq = make_seed(seed, "regulation");
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> innovation(0.0, spec.volatility);
  double x = 0.0;
  for (std::size_t k = 0; k < spec.n_values; ++k) {
    x = std::clamp((1.0 - spec.reversion) * x + innovation(rng), -1.0, 1.0);
    sig.values.push_back(x);
  }
  return sig;
}

void CommitmentSchedule::validate() const {
  if (breakpoints.empty()) throw ConfigError("commitment schedule has no breakpoints");
  for (std::size_t i = 0; i < breakpoints.size(); ++i) {
    if (!(breakpoints[i].second >= 0.0))
      throw ConfigError(fmt::format("commitment breakpoint {} has negative power", i));
    if (i > 0 && breakpoints[i].first <= breakpoints[i - 1].first)
      throw ConfigError("commitment breakpoint times must be strictly increasing");
  }
}

double CommitmentSchedule::at(std::int64_t second_of_day) const {
  if (breakpoints.empty()) return 0.0;
  if (second_of_day <= breakpoints.front().first) return breakpoints.front().second;
  if (second_of_day >= breakpoints.back().first) return breakpoints.back().second;
  const auto upper = std::upper_bound(
      breakpoints.begin(), breakpoints.end(), second_of_day,
      [](std::int64_t t, const std::pair<std::int64_t, double>& bp) { return t < bp.first; });
  const auto& hi = *upper;
  const auto& lo = *(upper - 1);
  if (interpolation == Interpolation::StepHold) return lo.second;
  const double f = static_cast<double>(second_of_day - lo.first) / static_cast<double>(hi.first - lo.first);
  return lo.second + f * (hi.second - lo.second);
}

}  // namespace pvctl
