#include "pvctl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include <fmt/format.h>
#include <json.hpp>

#include "csv_util.hpp"
#include "pvctl/error.hpp"

namespace pvctl {

SupportSeries SupportSeries::from(std::span<const double> desired_kw, std::span<const double> output_kw,
                                  std::int64_t step_s) {
  if (desired_kw.size() != output_kw.size()) throw DomainError("support: length mismatch");
  SupportSeries s;
  s.step_s = step_s;
  s.support_kw.resize(desired_kw.size());
  for (std::size_t i = 0; i < desired_kw.size(); ++i) s.support_kw[i] = desired_kw[i] - output_kw[i];
  return s;
}

Mileage mileage(const SupportSeries& support) {
  const auto& v = support.support_kw;
  Mileage m;
  if (v.size() < 2) return m;
  for (std::size_t i = 1; i < v.size(); ++i) {
    const double d = std::abs(v[i] - v[i - 1]);
    m.total_kw += d;
    m.max_kw = std::max(m.max_kw, d);
  }
  m.mean_kw = m.total_kw / static_cast<double>(v.size() - 1);
  return m;
}

double regulation_energy(const SupportSeries& support) {
  double kws = 0.0;
  for (double s : support.support_kw) kws += std::max(0.0, s);
  return kws * static_cast<double>(support.step_s) / 3600.0;
}

double commitment_satisfaction(double committed_kwh, double unsatisfied_kwh) {
  if (!(committed_kwh > 0.0)) throw MetricError("commitment satisfaction undefined: nothing was committed");
  if (!(unsatisfied_kwh >= 0.0 && unsatisfied_kwh <= committed_kwh))
    throw DomainError(fmt::format("unsatisfied energy {} kWh outside [0, {}]", unsatisfied_kwh, committed_kwh));
  return 100.0 * (1.0 - unsatisfied_kwh / committed_kwh);
}

double regd_satisfaction(std::span<const double> output_kw, std::span<const DispatchSignal> dispatch,
                         double tolerance_pct) {
  if (output_kw.size() != dispatch.size()) throw DomainError("regulation satisfaction: length mismatch");
  std::size_t intervals = 0;
  std::size_t satisfied = 0;
  std::size_t i = 0;
  while (i < dispatch.size()) {
    const auto id = dispatch[i].interval;
    if (id < 0) {
      ++i;
      continue;
    }
    bool ok = true;
    for (; i < dispatch.size() && dispatch[i].interval == id; ++i) {
      const double band = tolerance_pct / 100.0 * dispatch[i].p_desired;
      if (std::abs(output_kw[i] - dispatch[i].p_desired) > band) ok = false;
    }
    ++intervals;
    if (ok) ++satisfied;
  }
  if (intervals == 0) throw MetricError("regulation satisfaction undefined: no active interval");
  return 100.0 * static_cast<double>(satisfied) / static_cast<double>(intervals);
}

CurveErrors curve_errors(std::span<const double> theoretical_kw, std::span<const double> actual_kw) {
  if (theoretical_kw.size() != actual_kw.size()) throw DomainError("curve errors: length mismatch");
  if (theoretical_kw.empty()) throw MetricError("curve errors undefined for empty series");
  double sq = 0.0;
  double abs_sum = 0.0;
  for (std::size_t i = 0; i < actual_kw.size(); ++i) {
    const double e = theoretical_kw[i] - actual_kw[i];
    sq += e * e;
    abs_sum += std::abs(e);
  }
  const auto n = static_cast<double>(actual_kw.size());
  return {std::sqrt(sq / n), abs_sum / n};
}

double ancillary_potential(std::span<const double> mpp_kw, std::span<const double> commitment_kw,
                           std::int64_t step_s) {
  if (mpp_kw.size() != commitment_kw.size()) throw DomainError("ancillary potential: length mismatch");
  double kws = 0.0;
  for (std::size_t i = 0; i < mpp_kw.size(); ++i) kws += std::max(0.0, mpp_kw[i] - commitment_kw[i]);
  return kws * static_cast<double>(step_s) / 3600.0;
}

double energy_kwh(std::span<const double> power_kw, std::int64_t step_s) {
  double kws = 0.0;
  for (double p : power_kw) kws += p;
  return kws * static_cast<double>(step_s) / 3600.0;
}

MetricsReport compute_report(const RunSeries& run, double regd_tolerance_pct) {
  const std::size_t n = run.dispatch.size();
  if (run.planned_kw.size() != n || run.output_kw.size() != n || run.mpp_kw.size() != n)
    throw DomainError("run series lengths differ");
  std::vector<double> desired(n);
  std::vector<double> commitment(n);
  for (std::size_t i = 0; i < n; ++i) {
    desired[i] = run.dispatch[i].p_desired;
    commitment[i] = run.dispatch[i].commitment_kw;
  }
  const auto support = SupportSeries::from(desired, run.output_kw, run.step_s);
  const auto m = mileage(support);

  MetricsReport r;
  r.mileage_mean_kw = m.mean_kw;
  r.mileage_max_kw = m.max_kw;
  r.regulation_kwh = regulation_energy(support);
  const double committed = energy_kwh(desired, run.step_s);
  r.commitment_satisfied_pct =
      committed > 0.0 ? commitment_satisfaction(committed, std::min(r.regulation_kwh, committed)) : 100.0;
  if (std::any_of(run.dispatch.begin(), run.dispatch.end(), [](const DispatchSignal& d) { return d.interval >= 0; }))
    r.regd_satisfied_pct = regd_satisfaction(run.output_kw, run.dispatch, regd_tolerance_pct);
  if (n > 0) {
    const auto e = curve_errors(run.planned_kw, run.output_kw);
    r.rmse_kw = e.rmse_kw;
    r.mae_kw = e.mae_kw;
  }
  r.ancillary_potential_kwh = ancillary_potential(run.mpp_kw, commitment, run.step_s);
  return r;
}

void write_metrics_json(const MetricsReport& report, std::ostream& out) {
  nlohmann::ordered_json j;
  j["mileage_mean_kw"] = report.mileage_mean_kw;
  j["mileage_max_kw"] = report.mileage_max_kw;
  j["regulation_kwh"] = report.regulation_kwh;
  j["commitment_satisfied_pct"] = report.commitment_satisfied_pct;
  if (report.regd_satisfied_pct)
    j["regd_satisfied_pct"] = *report.regd_satisfied_pct;
  else
    j["regd_satisfied_pct"] = nullptr;
  j["rmse_kw"] = report.rmse_kw;
  j["mae_kw"] = report.mae_kw;
  j["ancillary_potential_kwh"] = report.ancillary_potential_kwh;
  out << j.dump(2) << '\n';
}

MetricsReport read_metrics_json(std::istream& in) {
  nlohmann::json j;
  try {
    in >> j;
    MetricsReport r;
    r.mileage_mean_kw = j.at("mileage_mean_kw").get<double>();
    r.mileage_max_kw = j.at("mileage_max_kw").get<double>();
    r.regulation_kwh = j.at("regulation_kwh").get<double>();
    r.commitment_satisfied_pct = j.at("commitment_satisfied_pct").get<double>();
    if (!j.at("regd_satisfied_pct").is_null()) r.regd_satisfied_pct = j.at("regd_satisfied_pct").get<double>();
    r.rmse_kw = j.at("rmse_kw").get<double>();
    r.mae_kw = j.at("mae_kw").get<double>();
    r.ancillary_potential_kwh = j.at("ancillary_potential_kwh").get<double>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(fmt::format("metrics file: {}", e.what()));
  }
}

void write_metrics_csv(const MetricsReport& report, std::ostream& out) {
  out << "mileage_mean_kw,mileage_max_kw,regulation_kwh,commitment_satisfied_pct,regd_satisfied_pct,"
         "rmse_kw,mae_kw,ancillary_potential_kwh\n";
  out << fmt::format("{},{},{},{},{},{},{},{}\n", detail::format_double(report.mileage_mean_kw),
                     detail::format_double(report.mileage_max_kw), detail::format_double(report.regulation_kwh),
                     detail::format_double(report.commitment_satisfied_pct),
                     report.regd_satisfied_pct ? detail::format_double(*report.regd_satisfied_pct) : "",
                     detail::format_double(report.rmse_kw), detail::format_double(report.mae_kw),
                     detail::format_double(report.ancillary_potential_kwh));
}

}  // namespace pvctl
