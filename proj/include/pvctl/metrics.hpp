#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pvctl/dispatch.hpp"

namespace pvctl {

inline constexpr double kPjmComplianceThresholdPct = 75.0;
inline constexpr double kDefaultRegdTolerancePct = 0.5;

/// Signed shortfall p_desired - output per step; positive values must be
/// supplied by other generation.
struct SupportSeries {
  std::vector<double> support_kw;
  std::int64_t step_s = 1;

  static SupportSeries from(std::span<const double> desired_kw, std::span<const double> output_kw,
                            std::int64_t step_s);
};

struct Mileage {
  double mean_kw = 0.0;
  double max_kw = 0.0;
  double total_kw = 0.0;
};

/// Statistics of |support_t - support_{t-1}|. Zero for fewer than two steps.
Mileage mileage(const SupportSeries& support);

/// Sum of max(0, support) * step / 3600, kWh.
double regulation_energy(const SupportSeries& support);

/// 100 * (1 - unsatisfied / committed). Throws MetricError when nothing was
/// committed and DomainError when unsatisfied lies outside [0, committed].
double commitment_satisfaction(double committed_kwh, double unsatisfied_kwh);

/// Share of regulation intervals in which every step delivered within
/// tolerance_pct of p_desired. Throws MetricError when no step belongs to an interval.
double regd_satisfaction(std::span<const double> output_kw, std::span<const DispatchSignal> dispatch,
                         double tolerance_pct = kDefaultRegdTolerancePct);

struct CurveErrors {
  double rmse_kw = 0.0;
  double mae_kw = 0.0;
};

/// Throws DomainError on a length mismatch and MetricError for empty input.
CurveErrors curve_errors(std::span<const double> theoretical_kw, std::span<const double> actual_kw);

/// Energy between the available power and the commitment where the former is higher, kWh.
double ancillary_potential(std::span<const double> mpp_kw, std::span<const double> commitment_kw,
                           std::int64_t step_s);

/// Sum of power * step / 3600.
double energy_kwh(std::span<const double> power_kw, std::int64_t step_s);

struct MetricsReport {
  double mileage_mean_kw = 0.0;
  double mileage_max_kw = 0.0;
  double regulation_kwh = 0.0;
  double commitment_satisfied_pct = 100.0;
  std::optional<double> regd_satisfied_pct;  // absent when no regulation interval was active
  double rmse_kw = 0.0;
  double mae_kw = 0.0;
  double ancillary_potential_kwh = 0.0;
};

struct RunSeries {
  std::int64_t step_s = 1;
  std::span<const DispatchSignal> dispatch;
  std::span<const double> planned_kw;
  std::span<const double> output_kw;
  std::span<const double> mpp_kw;
};

MetricsReport compute_report(const RunSeries& run, double regd_tolerance_pct = kDefaultRegdTolerancePct);

void write_metrics_json(const MetricsReport& report, std::ostream& out);
MetricsReport read_metrics_json(std::istream& in);
/// Header line plus one row.
void write_metrics_csv(const MetricsReport& report, std::ostream& out);

}  // namespace pvctl
