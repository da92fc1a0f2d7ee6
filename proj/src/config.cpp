#include "pvctl/config.hpp"

#include <fstream>
#include <initializer_list>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "pvctl/error.hpp"

namespace pvctl {
namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

void require_object(const json& j, const std::string& where) {
  if (!j.is_object()) throw ConfigError(fmt::format("{}: expected an object", where));
}

void allow_keys(const json& j, const std::string& where, std::initializer_list<std::string_view> keys) {
  require_object(j, where);
  for (const auto& item : j.items()) {
    bool known = false;
    for (auto k : keys) known = known || item.key() == k;
    if (!known) throw ConfigError(fmt::format("{}: unknown key '{}'", where, item.key()));
  }
}

template <class T>
T get_or(const json& j, const char* key, T fallback, const std::string& where) {
  const auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw ConfigError(fmt::format("{}.{}: wrong type", where, key));
  }
}

double get_number(const json& j, const char* key, double fallback, const std::string& where) {
  const auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  if (!it->is_number()) throw ConfigError(fmt::format("{}.{}: expected a number", where, key));
  return it->get<double>();
}

std::int64_t get_int(const json& j, const char* key, std::int64_t fallback, const std::string& where) {
  const auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  if (!it->is_number_integer()) throw ConfigError(fmt::format("{}.{}: expected an integer", where, key));
  return it->get<std::int64_t>();
}

std::size_t get_count(const json& j, const char* key, std::size_t fallback, const std::string& where) {
  const auto v = get_int(j, key, static_cast<std::int64_t>(fallback), where);
  if (v < 0) throw ConfigError(fmt::format("{}.{}: must be non-negative", where, key));
  return static_cast<std::size_t>(v);
}

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

json parse_document(std::string_view text, const std::string& where) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(fmt::format("{}: {}", where, e.what()));
  }
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(fmt::format("cannot open '{}'", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

PvArrayConfig parse_array(const json& j, const PvArrayConfig& defaults, const std::string& where) {
  PvArrayConfig a = defaults;
  a.rated_dc_kw = get_number(j, "rated_dc_kw", a.rated_dc_kw, where);
  a.derate = get_number(j, "derate", a.derate, where);
  a.inverter_efficiency = get_number(j, "inverter_efficiency", a.inverter_efficiency, where);
  a.ac_limit_kw = get_number(j, "ac_limit_kw", a.ac_limit_kw, where);
  a.validate();
  return a;
}

std::vector<std::size_t> default_cluster_sizes(std::size_t n) {
  if (n == 17) return {6, 6, 5};
  const std::size_t k = std::min<std::size_t>(3, n);
  std::vector<std::size_t> sizes(k, n / k);
  for (std::size_t i = 0; i < n % k; ++i) ++sizes[i];
  return sizes;
}

PlantConfig parse_plant(const json& j, const std::string& where) {
  allow_keys(j, where, {"inverters", "array", "cluster_sizes", "clusters"});
  PlantConfig p;
  PvArrayConfig defaults;
  if (j.contains("array")) {
    allow_keys(j["array"], where + ".array", {"rated_dc_kw", "derate", "inverter_efficiency", "ac_limit_kw"});
    defaults = parse_array(j["array"], defaults, where + ".array");
  }
  const auto& inv = j.contains("inverters") ? j["inverters"] : json(17);
  if (inv.is_number_integer()) {
    const auto n = inv.get<std::int64_t>();
    if (n <= 0) throw ConfigError(where + ".inverters: must be positive");
    const auto sensors = default_sensor_ids(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) {
      p.inverter_ids.push_back(fmt::format("INV{:02}", i + 1));
      p.sensors.push_back(sensors[static_cast<std::size_t>(i)]);
      p.arrays.push_back(defaults);
    }
  } else if (inv.is_array() && !inv.empty()) {
    const auto sensors = default_sensor_ids(inv.size());
    for (std::size_t i = 0; i < inv.size(); ++i) {
      const std::string w = fmt::format("{}.inverters[{}]", where, i);
      allow_keys(inv[i], w, {"id", "sensor", "rated_dc_kw", "derate", "inverter_efficiency", "ac_limit_kw"});
      p.inverter_ids.push_back(get_or<std::string>(inv[i], "id", fmt::format("INV{:02}", i + 1), w));
      p.sensors.push_back(get_or<std::string>(inv[i], "sensor", sensors[i], w));
      p.arrays.push_back(parse_array(inv[i], defaults, w));
    }
  } else {
    throw ConfigError(where + ".inverters: expected a positive count or a non-empty list");
  }

  const std::size_t n = p.arrays.size();
  if (j.contains("clusters")) {
    p.clusters = get_or<Clusters>(j, "clusters", {}, where);
    for (const auto& c : p.clusters) p.cluster_sizes.push_back(c.size());
  } else {
    p.cluster_sizes = get_or<std::vector<std::size_t>>(j, "cluster_sizes", default_cluster_sizes(n), where);
  }
  std::size_t total = 0;
  for (auto s : p.cluster_sizes) {
    if (s == 0) throw ConfigError(where + ": empty cluster");
    total += s;
  }
  if (total != n)
    throw ConfigError(fmt::format("{}: cluster sizes sum to {} for {} inverters", where, total, n));
  return p;
}

ScenarioSpec parse_scenario(const json& j, const std::vector<std::string>& default_sensors,
                            const std::string& where) {
  allow_keys(j, where,
             {"start", "step_s", "n_steps", "duration_s", "base_wm2", "sensors", "profile", "sunrise_h", "sunset_h",
              "noise_amp", "events", "random_events"});
  ScenarioSpec s;
  try {
    s.start_time = parse_iso8601(get_or<std::string>(j, "start", "2026-06-21T00:00:00Z", where));
  } catch (const DomainError& e) {
    throw ConfigError(fmt::format("{}.start: {}", where, e.what()));
  }
  s.step_s = get_int(j, "step_s", 1, where);
  if (s.step_s <= 0) throw ConfigError(where + ".step_s: must be positive");
  if (j.contains("duration_s"))
    s.n_steps = static_cast<std::size_t>(get_int(j, "duration_s", 0, where) / s.step_s);
  s.n_steps = get_count(j, "n_steps", s.n_steps, where);
  if (s.n_steps == 0) throw ConfigError(where + ": scenario needs n_steps or duration_s");
  s.base_wm2 = get_number(j, "base_wm2", s.base_wm2, where);
  s.sensors = get_or<std::vector<std::string>>(j, "sensors", default_sensors, where);
  const auto profile = get_or<std::string>(j, "profile", "flat", where);
  if (profile == "flat")
    s.profile = IrradianceProfile::Flat;
  else if (profile == "diurnal")
    s.profile = IrradianceProfile::Diurnal;
  else
    throw ConfigError(fmt::format("{}.profile: unknown profile '{}'", where, profile));
  s.sunrise_h = get_number(j, "sunrise_h", s.sunrise_h, where);
  s.sunset_h = get_number(j, "sunset_h", s.sunset_h, where);
  s.noise_amp = get_number(j, "noise_amp", 0.0, where);
  if (j.contains("events")) {
    if (!j["events"].is_array()) throw ConfigError(where + ".events: expected a list");
    for (std::size_t i = 0; i < j["events"].size(); ++i) {
      const auto& e = j["events"][i];
      const std::string w = fmt::format("{}.events[{}]", where, i);
      allow_keys(e, w, {"sensors", "start_s", "duration_s", "depth"});
      CloudEvent ev;
      ev.sensors = get_or<std::vector<std::string>>(e, "sensors", {}, w);
      ev.start_s = get_int(e, "start_s", 0, w);
      ev.duration_s = get_int(e, "duration_s", 0, w);
      ev.depth = get_number(e, "depth", 0.0, w);
      s.events.push_back(std::move(ev));
    }
  }
  if (j.contains("random_events")) {
    const auto& r = j["random_events"];
    const std::string w = where + ".random_events";
    allow_keys(r, w,
               {"count", "min_duration_s", "max_duration_s", "min_depth", "max_depth", "min_sensors", "max_sensors",
                "max_lag_s"});
    auto& re = s.random_events;
    re.count = get_count(r, "count", re.count, w);
    re.min_duration_s = get_int(r, "min_duration_s", re.min_duration_s, w);
    re.max_duration_s = get_int(r, "max_duration_s", re.max_duration_s, w);
    re.min_depth = get_number(r, "min_depth", re.min_depth, w);
    re.max_depth = get_number(r, "max_depth", re.max_depth, w);
    re.min_sensors = get_count(r, "min_sensors", re.min_sensors, w);
    re.max_sensors = get_count(r, "max_sensors", re.max_sensors, w);
    re.max_lag_s = get_int(r, "max_lag_s", re.max_lag_s, w);
  }
  return s;
}

IrradianceSource parse_irradiance(const json& j, const fs::path& base, const std::vector<std::string>& sensors,
                                  const std::string& where) {
  allow_keys(j, where, {"file", "max_gap_s", "scenario"});
  IrradianceSource src;
  if (j.contains("file") == j.contains("scenario"))
    throw ConfigError(where + ": exactly one of 'file' and 'scenario' is required");
  if (j.contains("file")) src.file = resolve(base, get_or<std::string>(j, "file", "", where));
  src.max_gap_s = get_int(j, "max_gap_s", src.max_gap_s, where);
  if (src.max_gap_s < 0) throw ConfigError(where + ".max_gap_s: must be non-negative");
  if (j.contains("scenario")) src.scenario = parse_scenario(j["scenario"], sensors, where + ".scenario");
  return src;
}

CommitmentConfig parse_commitment(const json& j, const std::string& where) {
  allow_keys(j, where, {"breakpoints", "interpolation", "clear_sky_fraction"});
  CommitmentConfig c;
  if (j.contains("breakpoints") == j.contains("clear_sky_fraction"))
    throw ConfigError(where + ": exactly one of 'breakpoints' and 'clear_sky_fraction' is required");
  if (j.contains("clear_sky_fraction")) {
    const double f = get_number(j, "clear_sky_fraction", 0.0, where);
    if (!(f >= 0.0)) throw ConfigError(where + ".clear_sky_fraction: must be non-negative");
    c.clear_sky_fraction = f;
    return c;
  }
  const auto& bp = j["breakpoints"];
  if (!bp.is_array() || bp.empty()) throw ConfigError(where + ".breakpoints: expected a non-empty list");
  CommitmentSchedule s;
  for (std::size_t i = 0; i < bp.size(); ++i) {
    const auto& b = bp[i];
    if (!b.is_array() || b.size() != 2 || !b[0].is_string() || !b[1].is_number())
      throw ConfigError(fmt::format("{}.breakpoints[{}]: expected [\"HH:MM:SS\", kW]", where, i));
    try {
      s.breakpoints.emplace_back(parse_time_of_day(b[0].get<std::string>()), b[1].get<double>());
    } catch (const DomainError& e) {
      throw ConfigError(fmt::format("{}.breakpoints[{}]: {}", where, i, e.what()));
    }
  }
  const auto interp = get_or<std::string>(j, "interpolation", "linear", where);
  if (interp == "linear")
    s.interpolation = CommitmentSchedule::Interpolation::Linear;
  else if (interp == "step")
    s.interpolation = CommitmentSchedule::Interpolation::StepHold;
  else
    throw ConfigError(fmt::format("{}.interpolation: unknown mode '{}'", where, interp));
  s.validate();
  c.schedule = std::move(s);
  return c;
}

RegulationConfig parse_regulation(const json& j, const fs::path& base, const std::string& where) {
  allow_keys(j, where, {"file", "synth", "active_hours", "reserve_kw", "tolerance_pct"});
  RegulationConfig r;
  if (j.contains("file") && j.contains("synth")) throw ConfigError(where + ": 'file' and 'synth' are exclusive");
  if (j.contains("file")) r.file = resolve(base, get_or<std::string>(j, "file", "", where));
  if (j.contains("synth")) {
    const auto& s = j["synth"];
    const std::string w = where + ".synth";
    allow_keys(s, w, {"n_values", "hours", "step_s", "volatility", "reversion"});
    RegulationSynthSpec spec;
    spec.step_s = get_int(s, "step_s", spec.step_s, w);
    if (spec.step_s <= 0) throw ConfigError(w + ".step_s: must be positive");
    if (s.contains("hours"))
      spec.n_values = static_cast<std::size_t>(get_number(s, "hours", 0.0, w) * 3600.0) /
                      static_cast<std::size_t>(spec.step_s);
    spec.n_values = get_count(s, "n_values", spec.n_values, w);
    spec.volatility = get_number(s, "volatility", spec.volatility, w);
    spec.reversion = get_number(s, "reversion", spec.reversion, w);
    r.synth = spec;
  }
  if (j.contains("active_hours")) {
    const auto hours = get_or<std::vector<std::string>>(j, "active_hours", {}, where);
    if (hours.size() != 2) throw ConfigError(where + ".active_hours: expected [start, end]");
    try {
      r.window.start_s = parse_time_of_day(hours[0]);
      r.window.end_s = hours[1] == "24:00" ? kSecondsPerDay : parse_time_of_day(hours[1]);
    } catch (const DomainError& e) {
      throw ConfigError(fmt::format("{}.active_hours: {}", where, e.what()));
    }
  }
  r.window.validate();
  if (j.contains("reserve_kw")) {
    const double v = get_number(j, "reserve_kw", 0.0, where);
    if (!(v >= 0.0)) throw ConfigError(where + ".reserve_kw: must be non-negative");
    r.reserve_kw = v;
  }
  r.tolerance_pct = get_number(j, "tolerance_pct", r.tolerance_pct, where);
  if (!(r.tolerance_pct >= 0.0)) throw ConfigError(where + ".tolerance_pct: must be non-negative");
  return r;
}

ControlConfig parse_control(const json& j, const std::string& where) {
  allow_keys(j, where, {"alpha_floor", "max_rounds", "tolerance", "tick_mode", "cadences_s"});
  ControlConfig c;
  c.hierarchy.alpha_floor = get_number(j, "alpha_floor", c.hierarchy.alpha_floor, where);
  c.hierarchy.max_rounds = get_count(j, "max_rounds", c.hierarchy.max_rounds, where);
  c.hierarchy.tolerance = get_number(j, "tolerance", c.hierarchy.tolerance, where);
  c.hierarchy.validate();
  const auto mode = get_or<std::string>(j, "tick_mode", "instant", where);
  if (mode == "instant")
    c.tick_mode = TickMode::Instant;
  else if (mode == "cadenced")
    c.tick_mode = TickMode::Cadenced;
  else
    throw ConfigError(fmt::format("{}.tick_mode: unknown mode '{}'", where, mode));
  if (j.contains("cadences_s")) {
    const auto& k = j["cadences_s"];
    const std::string w = where + ".cadences_s";
    allow_keys(k, w, {"direct", "supervisor", "adaptive"});
    c.cadences.direct_s = get_int(k, "direct", c.cadences.direct_s, w);
    c.cadences.supervisor_s = get_int(k, "supervisor", c.cadences.supervisor_s, w);
    c.cadences.adaptive_s = get_int(k, "adaptive", c.cadences.adaptive_s, w);
  }
  return c;
}

}  // namespace

std::string_view to_string(ControllerKind kind) {
  switch (kind) {
    case ControllerKind::Hierarchical:
      return "hierarchical";
    case ControllerKind::Grouping:
      return "grouping";
    case ControllerKind::Uncontrolled:
      return "uncontrolled";
  }
  return "?";
}

ControllerKind parse_controller(std::string_view name) {
  if (name == "hierarchical") return ControllerKind::Hierarchical;
  if (name == "grouping") return ControllerKind::Grouping;
  if (name == "uncontrolled") return ControllerKind::Uncontrolled;
  throw ConfigError(fmt::format("unknown controller '{}'", name));
}

RunConfig parse_run_config(std::string_view json_text, const fs::path& base_dir) {
  const json doc = parse_document(json_text, "config");
  allow_keys(doc, "config",
             {"plant", "irradiance", "controller", "grouping_mode", "headroom_fraction", "commitment", "regulation",
              "control", "correlation", "utc_offset_hours", "output_dir", "seed", "message_trace"});
  RunConfig cfg;
  cfg.base_dir = base_dir;
  cfg.source_json = std::string(json_text);

  if (!doc.contains("plant")) throw ConfigError("config: 'plant' is required");
  if (doc["plant"].is_string()) {
    const auto path = resolve(base_dir, doc["plant"].get<std::string>());
    cfg.plant = parse_plant(parse_document(read_file(path), path.string()), path.string());
  } else {
    cfg.plant = parse_plant(doc["plant"], "plant");
  }

  if (!doc.contains("irradiance")) throw ConfigError("config: 'irradiance' is required");
  cfg.irradiance = parse_irradiance(doc["irradiance"], base_dir, cfg.plant.sensors, "irradiance");

  cfg.controller = parse_controller(get_or<std::string>(doc, "controller", "hierarchical", "config"));
  const auto gmode = get_or<std::string>(doc, "grouping_mode", "commitment", "config");
  if (gmode == "commitment")
    cfg.grouping_mode = GroupingMode::Commitment;
  else if (gmode == "headroom")
    cfg.grouping_mode = GroupingMode::Headroom;
  else
    throw ConfigError(fmt::format("config.grouping_mode: unknown mode '{}'", gmode));
  cfg.headroom_fraction = get_number(doc, "headroom_fraction", cfg.headroom_fraction, "config");
  if (!(cfg.headroom_fraction >= 0.0 && cfg.headroom_fraction < 1.0))
    throw ConfigError("config.headroom_fraction: must lie in [0, 1)");

  if (!doc.contains("commitment")) throw ConfigError("config: 'commitment' is required");
  cfg.commitment = parse_commitment(doc["commitment"], "commitment");
  if (cfg.commitment.clear_sky_fraction && !cfg.irradiance.scenario)
    throw ConfigError("commitment.clear_sky_fraction requires a scenario irradiance source");

  if (doc.contains("regulation")) cfg.regulation = parse_regulation(doc["regulation"], base_dir, "regulation");
  if (doc.contains("control")) cfg.control = parse_control(doc["control"], "control");
  if (doc.contains("correlation")) {
    const auto& c = doc["correlation"];
    allow_keys(c, "correlation", {"window_days", "training"});
    const auto days = get_int(c, "window_days", cfg.correlation.window_days, "correlation");
    if (days < 0 || days > 366) throw ConfigError("correlation.window_days: must lie in [0, 366]");
    cfg.correlation.window_days = static_cast<int>(days);
    if (c.contains("training"))
      cfg.correlation.training =
          parse_irradiance(c["training"], base_dir, cfg.plant.sensors, "correlation.training");
  }

  const double offset_h = get_number(doc, "utc_offset_hours", 0.0, "config");
  if (!(offset_h >= -14.0 && offset_h <= 14.0)) throw ConfigError("config.utc_offset_hours: outside [-14, 14]");
  cfg.utc_offset_s = static_cast<std::int64_t>(offset_h * 3600.0);
  cfg.output_dir = resolve(base_dir, get_or<std::string>(doc, "output_dir", "out", "config"));
  if (doc.contains("seed")) {
    if (!doc["seed"].is_number_unsigned()) throw ConfigError("config.seed: expected a non-negative integer");
    cfg.seed = doc["seed"].get<std::uint64_t>();
  }
  const auto trace = get_or<std::string>(doc, "message_trace", "help", "config");
  if (trace == "all")
    cfg.message_trace = TraceLevel::All;
  else if (trace == "help")
    cfg.message_trace = TraceLevel::Help;
  else if (trace == "none")
    cfg.message_trace = TraceLevel::None;
  else
    throw ConfigError(fmt::format("config.message_trace: unknown level '{}'", trace));
  return cfg;
}

RunConfig load_run_config(const fs::path& path) {
  const auto base = path.has_parent_path() ? path.parent_path() : fs::path(".");
  return parse_run_config(read_file(path), base);
}

std::string config_snapshot(const RunConfig& cfg) {
  nlohmann::ordered_json doc = nlohmann::ordered_json::parse(cfg.source_json);
  doc["controller"] = std::string(to_string(cfg.controller));
  doc["seed"] = cfg.seed;
  doc["output_dir"] = cfg.output_dir.string();
  return doc.dump(2) + "\n";
}

}  // namespace pvctl
