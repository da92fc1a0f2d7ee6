#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "pvctl/correlation.hpp"

namespace pvctl {

inline constexpr double kDefaultHeadroomFraction = 0.2;

struct GroupingConfig {
  Clusters groups;
  double headroom_fraction = kDefaultHeadroomFraction;

  /// Throws ConfigError unless `groups` partitions 0..n-1 and the fraction lies in [0, 1).
  void validate(std::size_t n_inverters) const;
};

enum class GroupingMode { Commitment, Headroom };

struct GroupSetpoints {
  std::vector<double> group_alpha;   // one ratio per group
  std::vector<double> member_alpha;  // the group ratio, repeated per inverter
  std::vector<double> setpoint_kw;   // per inverter
  double planned_kw = 0.0;           // sum of setpoints
};

/// (1 - headroom_fraction) * sum of group estimates.
double headroom_target(std::span<const double> group_impp_est, double headroom_fraction);

/// One plant-wide ratio alpha = min(1, p_desired / sum(est)) applied to every
/// group. Members of a group share its kW order alpha * est_g in proportion to
/// their capacity, regardless of how shading is spread inside the group.
/// A group with no estimated power is passed through with alpha = 1.
GroupSetpoints grouping_step(double p_desired, std::span<const double> group_impp_est,
                             const GroupingConfig& cfg, std::span<const double> member_capacity_kw);

/// Central controller whose group estimate is the group's available power one step earlier.
class GroupingController {
 public:
  GroupingController(GroupingConfig cfg, std::vector<double> member_capacity_kw,
                     GroupingMode mode = GroupingMode::Commitment);

  void bootstrap(std::span<const double> available_kw);
  const GroupSetpoints& step(double p_desired);
  void observe(std::span<const double> available_kw);

  std::span<const double> group_estimates() const noexcept { return group_est_; }
  const GroupSetpoints& setpoints() const noexcept { return last_; }

 private:
  void aggregate(std::span<const double> available_kw);

  GroupingConfig cfg_;
  std::vector<double> capacity_;
  GroupingMode mode_;
  std::vector<double> group_est_;
  GroupSetpoints last_;
  bool bootstrapped_ = false;
};

/// min(setpoint, available) per inverter.
std::vector<double> realize_output(std::span<const double> setpoint_kw, std::span<const double> available_kw);

}  // namespace pvctl
