#include "pvctl/dispatch.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "pvctl/error.hpp"

namespace pvctl {
namespace {

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

}  // namespace

double desired_output(double commitment_kw, double regd, double reserve_kw) {
  if (!(regd >= -1.0 && regd <= 1.0)) throw DomainError(fmt::format("regulation value {} outside [-1, 1]", regd));
  if (!(commitment_kw >= 0.0)) throw DomainError(fmt::format("negative commitment {} kW", commitment_kw));
  if (!(reserve_kw >= 0.0)) throw DomainError(fmt::format("negative reserve {} kW", reserve_kw));
  return std::max(0.0, commitment_kw + regd * reserve_kw);
}

void ActiveWindow::validate() const {
  if (start_s < 0 || end_s > kSecondsPerDay || start_s >= end_s)
    throw ConfigError(fmt::format("active window [{}, {}) s is not a span within one day", start_s, end_s));
}

RegulationAlignment regulation_window(const RegulationSignal& signal, const TimeGrid& grid,
                                      const ActiveWindow& window, std::int64_t utc_offset_s) {
  window.validate();
  if (signal.step_s <= 0 || grid.step_s <= 0) throw ConfigError("regulation and simulation steps must be positive");
  if (signal.step_s % grid.step_s != 0 && grid.step_s % signal.step_s != 0)
    throw ConfigError(fmt::format("simulation step {} s and regulation step {} s are not aligned", grid.step_s,
                                  signal.step_s));

  const Timestamp local_midnight = grid.start - seconds_of_day(grid.start, utc_offset_s);
  const Timestamp signal_start = signal.start_time.value_or(local_midnight + window.start_s);
  const auto n_values = static_cast<std::int64_t>(signal.values.size());

  RegulationAlignment out;
  out.regd.assign(grid.count, 0.0);
  out.interval.assign(grid.count, -1);
  for (std::size_t i = 0; i < grid.count; ++i) {
    const Timestamp ts = grid.at(i);
    if (!window.contains(seconds_of_day(ts, utc_offset_s))) continue;
    const std::int64_t k = floor_div(ts - signal_start, signal.step_s);
    if (k < 0 || k >= n_values) continue;
    out.regd[i] = signal.values[static_cast<std::size_t>(k)];
    out.interval[i] = k;
  }
  return out;
}

std::vector<double> commitment_series(const CommitmentSchedule& schedule, const TimeGrid& grid,
                                      std::int64_t utc_offset_s) {
  schedule.validate();
  std::vector<double> out(grid.count);
  for (std::size_t i = 0; i < grid.count; ++i) out[i] = schedule.at(seconds_of_day(grid.at(i), utc_offset_s));
  return out;
}

std::vector<DispatchSignal> build_dispatch(const TimeGrid& grid, std::span<const double> commitment_kw,
                                           const RegulationAlignment& regulation, double reserve_kw) {
  if (commitment_kw.size() != grid.count || regulation.regd.size() != grid.count ||
      regulation.interval.size() != grid.count)
    throw ConfigError("dispatch inputs do not match the simulation grid");
  std::vector<DispatchSignal> out(grid.count);
  for (std::size_t i = 0; i < grid.count; ++i) {
    auto& d = out[i];
    d.timestamp = grid.at(i);
    d.commitment_kw = commitment_kw[i];
    d.regd = regulation.regd[i];
    d.reserve_kw = reserve_kw;
    d.interval = regulation.interval[i];
    d.p_desired = desired_output(d.commitment_kw, d.regd, reserve_kw);
  }
  return out;
}

}  // namespace pvctl
