#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "pvctl/data_ingest.hpp"
#include "pvctl/time_grid.hpp"

namespace pvctl {

struct DispatchSignal {
  Timestamp timestamp = 0;
  double commitment_kw = 0.0;
  double regd = 0.0;
  double reserve_kw = 0.0;
  double p_desired = 0.0;
  std::int64_t interval = -1;  // regulation sample index, -1 outside the active window
};

/// max(0, commitment + regd * reserve). Throws DomainError if regd is outside
/// [-1, 1] or either power is negative.
double desired_output(double commitment_kw, double regd, double reserve_kw);

/// Local time-of-day span [start_s, end_s) in which regulation is followed.
struct ActiveWindow {
  std::int64_t start_s = 9 * 3600;
  std::int64_t end_s = 17 * 3600;

  bool contains(std::int64_t second_of_day) const { return second_of_day >= start_s && second_of_day < end_s; }
  void validate() const;
};

struct RegulationAlignment {
  std::vector<double> regd;             // per simulation step
  std::vector<std::int64_t> interval;  // per simulation step, -1 when no sample applies
};

/// Sample-and-hold of `signal` onto `grid`, zero outside `window`. An untimed
/// signal starts at the window start of the grid's first local day. Throws
/// ConfigError unless one step divides the other.
RegulationAlignment regulation_window(const RegulationSignal& signal, const TimeGrid& grid,
                                      const ActiveWindow& window, std::int64_t utc_offset_s = 0);

/// The schedule evaluated at each grid step's local time of day.
std::vector<double> commitment_series(const CommitmentSchedule& schedule, const TimeGrid& grid,
                                      std::int64_t utc_offset_s = 0);

std::vector<DispatchSignal> build_dispatch(const TimeGrid& grid, std::span<const double> commitment_kw,
                                           const RegulationAlignment& regulation, double reserve_kw);

}  // namespace pvctl
