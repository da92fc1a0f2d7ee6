#include "pvctl/simulation.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

#include <fmt/format.h>

#include "csv_util.hpp"
#include "pvctl/error.hpp"

namespace pvctl {
namespace {

namespace fs = std::filesystem;

IrradianceDataset select_sensors(const IrradianceDataset& ds, const std::vector<std::string>& sensors) {
  std::vector<std::size_t> cols;
  for (const auto& s : sensors) cols.push_back(ds.sensor_index(s));
  IrradianceDataset out;
  out.start_time = ds.start_time;
  out.step_s = ds.step_s;
  out.sensors = sensors;
  out.values = SeriesMatrix(ds.steps(), sensors.size());
  for (std::size_t r = 0; r < ds.steps(); ++r)
    for (std::size_t c = 0; c < cols.size(); ++c) out.values(r, c) = ds.values(r, cols[c]);
  return out;
}

Loaded<IrradianceDataset> load_irradiance(const IrradianceSource& src, const PlantConfig& plant,
                                          std::uint64_t seed) {
  if (src.file) {
    CsvSchema schema;
    schema.sensor_columns = plant.sensors;
    auto loaded = parse_irradiance_csv(*src.file, schema);
    loaded.value = fill_gaps(std::move(loaded.value), src.max_gap_s);
    return loaded;
  }
  if (!src.scenario) throw ConfigError("irradiance source has neither a file nor a scenario");
  return {select_sensors(synth_cloud_scenario(*src.scenario, seed), plant.sensors), 0};
}

std::vector<double> row_sums(const SeriesMatrix& m) {
  std::vector<double> out(m.rows(), 0.0);
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (double v : m.row(r)) out[r] += v;
  return out;
}

std::vector<double> clear_sky_commitment(const RunConfig& cfg, double fraction) {
  ScenarioSpec clear = *cfg.irradiance.scenario;
  clear.events.clear();
  clear.random_events.count = 0;
  clear.noise_amp = 0.0;
  const auto ds = select_sensors(synth_cloud_scenario(clear, cfg.seed), cfg.plant.sensors);
  auto total = row_sums(plant_true_mpp(ds, cfg.plant.arrays));
  for (double& v : total) v *= fraction;
  return total;
}

RegulationSignal load_regulation(const RunConfig& cfg) {
  if (cfg.regulation.file) return load_regulation_csv(*cfg.regulation.file).value;
  if (cfg.regulation.synth) return synth_regulation_signal(*cfg.regulation.synth, cfg.seed);
  return {};
}

double sum(std::span<const double> v) { return std::accumulate(v.begin(), v.end(), 0.0); }

}  // namespace

SimulationInputs prepare_inputs(const RunConfig& cfg) {
  const auto& plant = cfg.plant;
  SimulationInputs in;
  auto loaded = load_irradiance(cfg.irradiance, plant, cfg.seed);
  in.clamped_samples = loaded.clamped;
  const auto& ds = loaded.value;
  if (ds.steps() == 0) throw ValidationError("irradiance source has no samples");
  in.grid = ds.grid();
  in.true_mpp = plant_true_mpp(ds, plant.arrays);
  for (const auto& a : plant.arrays) in.capacity_kw.push_back(a.ac_limit_kw);

  const auto commitment = cfg.commitment.clear_sky_fraction
                              ? clear_sky_commitment(cfg, *cfg.commitment.clear_sky_fraction)
                              : commitment_series(*cfg.commitment.schedule, in.grid, cfg.utc_offset_s);
  const auto alignment = regulation_window(load_regulation(cfg), in.grid, cfg.regulation.window, cfg.utc_offset_s);
  const double reserve = cfg.regulation.reserve_kw.value_or(cfg.headroom_fraction * sum(in.capacity_kw));
  in.dispatch = build_dispatch(in.grid, commitment, alignment, reserve);

  if (cfg.correlation.training) {
    const auto training = load_irradiance(*cfg.correlation.training, plant, cfg.seed + 1).value;
    in.training = build_hourly_matrices(plant_true_mpp(training, plant.arrays), training.grid(), cfg.utc_offset_s);
  }

  if (!plant.clusters.empty()) {
    in.clusters = plant.clusters;
  } else {
    const auto basis = in.training ? *in.training : run_correlation(cfg, in);
    in.clusters = cluster_assign(mean_matrix(basis, plant.size()), plant.cluster_sizes);
  }
  return in;
}

HourlyCorrelation run_correlation(const RunConfig& cfg, const SimulationInputs& inputs) {
  return build_hourly_matrices(inputs.true_mpp, inputs.grid, cfg.utc_offset_s);
}

SimulationResult simulate(const RunConfig& cfg, const SimulationInputs& inputs, StepObserver* observer) {
  const std::size_t n = cfg.plant.size();
  const std::size_t steps = inputs.grid.count;
  if (inputs.true_mpp.cols() != n || inputs.true_mpp.rows() != steps || inputs.dispatch.size() != steps)
    throw ConfigError("simulation inputs do not match the plant");

  SimulationResult res;
  res.planned_kw.resize(steps);
  res.output_kw.resize(steps);
  res.mpp_kw.resize(steps);
  std::vector<double> est(n), alpha(n, 1.0), setpoint(n), output(n);

  auto report = [&](std::size_t t, std::span<const ControlMessage> messages, const IterationResult* it) {
    const auto avail = inputs.true_mpp.row(t);
    res.planned_kw[t] = sum(setpoint);
    res.output_kw[t] = sum(output);
    res.mpp_kw[t] = sum(avail);
    res.messages += messages.size();
    if (observer != nullptr) {
      StepView v;
      v.index = t;
      v.dispatch = &inputs.dispatch[t];
      v.impp_est_kw = est;
      v.alpha = alpha;
      v.setpoint_kw = setpoint;
      v.output_kw = output;
      v.available_kw = avail;
      v.messages = messages;
      v.iteration = it;
      v.planned_kw = res.planned_kw[t];
      observer->on_step(v);
    }
  };

  switch (cfg.controller) {
    case ControllerKind::Hierarchical: {
      HierarchicalController ctrl(n, inputs.clusters, cfg.control.hierarchy);
      HourlyCorrelationModel model(n, cfg.correlation.window_days, cfg.utc_offset_s, inputs.training);
      const TickScheduler ticks(cfg.control.cadences, cfg.control.tick_mode, inputs.grid.step_s);
      ctrl.bootstrap(inputs.true_mpp.row(0));
      for (std::size_t t = 0; t < steps; ++t) {
        const Timestamp ts = inputs.grid.at(t);
        const auto avail = inputs.true_mpp.row(t);
        const auto it = ctrl.step(inputs.dispatch[t].p_desired, model.order_for(ts), ticks.at(t));
        for (const auto& s : ctrl.states()) {
          est[s.id] = s.p_impp_est;
          alpha[s.id] = s.alpha;
          setpoint[s.id] = s.p_final;
          output[s.id] = s.alpha * avail[s.id];
        }
        res.help_requests += it.help_requests;
        res.adaptive_messages += it.adaptive_messages;
        report(t, ctrl.messages(), &it);
        ctrl.observe(output);
        model.record(ts, est);
      }
      res.floor_clamp_events = ctrl.floor_clamp_events();
      break;
    }
    case ControllerKind::Grouping: {
      GroupingConfig gcfg{inputs.clusters, cfg.headroom_fraction};
      GroupingController ctrl(gcfg, inputs.capacity_kw, cfg.grouping_mode);
      ctrl.bootstrap(inputs.true_mpp.row(0));
      std::vector<double> group_capacity(gcfg.groups.size(), 0.0);
      for (std::size_t g = 0; g < gcfg.groups.size(); ++g)
        for (std::size_t m : gcfg.groups[g]) group_capacity[g] += inputs.capacity_kw[m];
      for (std::size_t t = 0; t < steps; ++t) {
        const auto avail = inputs.true_mpp.row(t);
        const auto group_est = ctrl.group_estimates();
        for (std::size_t g = 0; g < gcfg.groups.size(); ++g)
          for (std::size_t m : gcfg.groups[g]) est[m] = group_est[g] * inputs.capacity_kw[m] / group_capacity[g];
        const auto& sp = ctrl.step(inputs.dispatch[t].p_desired);
        std::copy(sp.setpoint_kw.begin(), sp.setpoint_kw.end(), setpoint.begin());
        std::copy(sp.member_alpha.begin(), sp.member_alpha.end(), alpha.begin());
        const auto realized = realize_output(setpoint, avail);
        std::copy(realized.begin(), realized.end(), output.begin());
        report(t, {}, nullptr);
        ctrl.observe(avail);
      }
      break;
    }
    case ControllerKind::Uncontrolled: {
      for (std::size_t t = 0; t < steps; ++t) {
        const auto avail = inputs.true_mpp.row(t);
        std::copy(avail.begin(), avail.end(), est.begin());
        std::copy(avail.begin(), avail.end(), setpoint.begin());
        std::copy(avail.begin(), avail.end(), output.begin());
        report(t, {}, nullptr);
      }
      break;
    }
  }

  RunSeries series{inputs.grid.step_s, inputs.dispatch, res.planned_kw, res.output_kw, res.mpp_kw};
  res.metrics = compute_report(series, cfg.regulation.tolerance_pct);
  return res;
}

namespace {

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError(fmt::format("cannot write '{}'", path.string()));
  return out;
}

bool traced(TraceLevel level, const ControlMessage& m) {
  switch (level) {
    case TraceLevel::All:
      return true;
    case TraceLevel::Help:
      return m.kind == MessageKind::HelpRequest || m.kind == MessageKind::HelpGrant;
    case TraceLevel::None:
      return false;
  }
  return false;
}

class ArtifactWriter : public StepObserver {
 public:
  ArtifactWriter(const RunConfig& cfg)
      : controller_(to_string(cfg.controller)),
        level_(cfg.message_trace),
        setpoints_(open_output(cfg.output_dir / "setpoints.csv")),
        messages_(open_output(cfg.output_dir / "messages.csv")),
        plant_(open_output(cfg.output_dir / "plant.csv")) {
    setpoints_ << "timestamp,inverter_id,impp_est_kw,alpha,p_final_kw,controller\n";
    messages_ << "iteration,kind,sender,receiver,amount_kw\n";
    plant_ << "timestamp,p_desired_kw,commitment_kw,regd,planned_kw,output_kw,mpp_kw,support_kw\n";
  }

  void on_step(const StepView& v) override {
    using detail::format_double;
    const auto ts = format_iso8601(v.dispatch->timestamp);
    buf_.clear();
    for (std::size_t i = 0; i < v.alpha.size(); ++i)
      fmt::format_to(std::back_inserter(buf_), "{},{},{},{},{},{}\n", ts, i, format_double(v.impp_est_kw[i]),
                     format_double(v.alpha[i]), format_double(v.setpoint_kw[i]), controller_);
    setpoints_.write(buf_.data(), static_cast<std::streamsize>(buf_.size()));
    for (const auto& m : v.messages)
      if (traced(level_, m)) messages_ << to_csv_line(m) << '\n';
    double output = 0.0;
    double mpp = 0.0;
    for (double o : v.output_kw) output += o;
    for (double a : v.available_kw) mpp += a;
    const auto& d = *v.dispatch;
    plant_ << fmt::format("{},{},{},{},{},{},{},{}\n", ts, format_double(d.p_desired), format_double(d.commitment_kw),
                          format_double(d.regd), format_double(v.planned_kw), format_double(output),
                          format_double(mpp), format_double(d.p_desired - output));
    if ((v.index + 1) % 3600 == 0) flush();
  }

  void flush() {
    setpoints_.flush();
    messages_.flush();
    plant_.flush();
  }

 private:
  std::string controller_;
  TraceLevel level_;
  std::ofstream setpoints_;
  std::ofstream messages_;
  std::ofstream plant_;
  fmt::memory_buffer buf_;
};

struct PlantTrace {
  std::vector<std::string> timestamps;
  std::vector<std::string> desired;
  std::vector<double> output;
  std::vector<double> mpp;
};

PlantTrace read_plant_trace(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError(fmt::format("cannot open '{}'", path.string()));
  std::string line;
  std::getline(in, line);
  const auto header = detail::split_csv(line);
  auto col = [&](std::string_view name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw SchemaError(fmt::format("{}: missing column '{}'", path.string(), name));
    return static_cast<std::size_t>(it - header.begin());
  };
  const auto c_ts = col("timestamp");
  const auto c_des = col("p_desired_kw");
  const auto c_out = col("output_kw");
  const auto c_mpp = col("mpp_kw");
  PlantTrace t;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto cells = detail::split_csv(line);
    if (cells.size() != header.size()) throw ParseError(line_no, fmt::format("{}: wrong cell count", path.string()));
    const auto out = detail::parse_double(cells[c_out]);
    const auto mpp = detail::parse_double(cells[c_mpp]);
    if (!out || !mpp) throw ParseError(line_no, fmt::format("{}: bad number", path.string()));
    t.timestamps.emplace_back(cells[c_ts]);
    t.desired.emplace_back(cells[c_des]);
    t.output.push_back(*out);
    t.mpp.push_back(*mpp);
  }
  return t;
}

MetricsReport read_metrics(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError(fmt::format("cannot open '{}'", path.string()));
  return read_metrics_json(in);
}

std::optional<double> ratio(std::optional<double> a, std::optional<double> b) {
  if (!a || !b) return std::nullopt;
  if (*b == 0.0) return *a == 0.0 ? std::optional<double>(1.0) : std::nullopt;
  return *a / *b;
}

}  // namespace

SimulationResult run_simulation(const RunConfig& cfg) {
  const auto inputs = prepare_inputs(cfg);
  std::error_code ec;
  fs::create_directories(cfg.output_dir, ec);
  if (ec) throw ConfigError(fmt::format("cannot create '{}': {}", cfg.output_dir.string(), ec.message()));
  {
    auto snap = open_output(cfg.output_dir / "config.json");
    snap << config_snapshot(cfg);
  }
  ArtifactWriter writer(cfg);
  auto result = simulate(cfg, inputs, &writer);
  writer.flush();
  {
    auto js = open_output(cfg.output_dir / "metrics.json");
    write_metrics_json(result.metrics, js);
    auto csv = open_output(cfg.output_dir / "metrics.csv");
    write_metrics_csv(result.metrics, csv);
  }
  return result;
}

std::vector<ComparisonRow> compare_runs(const fs::path& run_a, const fs::path& run_b) {
  const auto ta = read_plant_trace(run_a / "plant.csv");
  const auto tb = read_plant_trace(run_b / "plant.csv");
  if (ta.timestamps != tb.timestamps) throw ValidationError("runs do not share a time grid");
  if (ta.desired != tb.desired) throw ValidationError("runs do not share dispatch inputs");
  const auto ma = read_metrics(run_a / "metrics.json");
  const auto mb = read_metrics(run_b / "metrics.json");

  std::int64_t step_s = 1;
  if (ta.timestamps.size() >= 2)
    step_s = parse_iso8601(ta.timestamps[1]) - parse_iso8601(ta.timestamps[0]);
  auto curtailed = [&](const PlantTrace& t) {
    double kws = 0.0;
    for (std::size_t i = 0; i < t.output.size(); ++i) kws += std::max(0.0, t.mpp[i] - t.output[i]);
    return kws * static_cast<double>(step_s) / 3600.0;
  };

  std::vector<ComparisonRow> rows;
  auto add = [&](std::string name, std::optional<double> a, std::optional<double> b) {
    rows.push_back({std::move(name), a, b, ratio(a, b)});
  };
  add("mileage_mean_kw", ma.mileage_mean_kw, mb.mileage_mean_kw);
  add("mileage_max_kw", ma.mileage_max_kw, mb.mileage_max_kw);
  add("regulation_kwh", ma.regulation_kwh, mb.regulation_kwh);
  add("commitment_satisfied_pct", ma.commitment_satisfied_pct, mb.commitment_satisfied_pct);
  add("regd_satisfied_pct", ma.regd_satisfied_pct, mb.regd_satisfied_pct);
  add("rmse_kw", ma.rmse_kw, mb.rmse_kw);
  add("mae_kw", ma.mae_kw, mb.mae_kw);
  add("ancillary_potential_kwh", ma.ancillary_potential_kwh, mb.ancillary_potential_kwh);
  add("curtailed_kwh", curtailed(ta), curtailed(tb));
  return rows;
}

void write_comparison(const std::vector<ComparisonRow>& rows, std::ostream& out) {
  auto cell = [](std::optional<double> v) { return v ? detail::format_double(*v) : std::string(); };
  out << "metric,a,b,ratio\n";
  for (const auto& r : rows) out << fmt::format("{},{},{},{}\n", r.metric, cell(r.a), cell(r.b), cell(r.ratio));
}

void export_correlation(const RunConfig& cfg, const fs::path& out_dir) {
  const auto inputs = prepare_inputs(cfg);
  const auto hourly = run_correlation(cfg, inputs);
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw ConfigError(fmt::format("cannot create '{}': {}", out_dir.string(), ec.message()));
  for (const auto& m : hourly.matrices) {
    auto out = open_output(out_dir / fmt::format("hour_{:02}.csv", m.hour_bucket()));
    write_correlation_csv(m, out);
  }
  auto out = open_output(out_dir / "clusters.csv");
  out << "cluster,inverter_id\n";
  for (std::size_t c = 0; c < inputs.clusters.size(); ++c)
    for (std::size_t m : inputs.clusters[c]) out << c << ',' << cfg.plant.inverter_ids[m] << '\n';
}

}  // namespace pvctl
