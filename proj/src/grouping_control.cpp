#include "pvctl/grouping_control.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "pvctl/error.hpp"

namespace pvctl {

void GroupingConfig::validate(std::size_t n_inverters) const {
  if (!(headroom_fraction >= 0.0 && headroom_fraction < 1.0))
    throw ConfigError("headroom_fraction must lie in [0, 1)");
  std::vector<int> seen(n_inverters, 0);
  for (const auto& g : groups) {
    if (g.empty()) throw ConfigError("grouping partition contains an empty group");
    for (std::size_t m : g) {
      if (m >= n_inverters) throw ConfigError(fmt::format("group lists unknown inverter {}", m));
      ++seen[m];
    }
  }
  for (std::size_t i = 0; i < n_inverters; ++i)
    if (seen[i] != 1) throw ConfigError(fmt::format("inverter {} belongs to {} groups", i, seen[i]));
}

double headroom_target(std::span<const double> group_impp_est, double headroom_fraction) {
  double total = 0.0;
  for (double e : group_impp_est) total += e;
  return (1.0 - headroom_fraction) * total;
}

GroupSetpoints grouping_step(double p_desired, std::span<const double> group_impp_est,
                             const GroupingConfig& cfg, std::span<const double> member_capacity_kw) {
  if (group_impp_est.size() != cfg.groups.size())
    throw ConfigError("one estimate per group is required");
  double total = 0.0;
  for (double e : group_impp_est) total += std::max(0.0, e);
  const double ratio = total > 0.0 ? std::clamp(p_desired / total, 0.0, 1.0) : 1.0;

  GroupSetpoints out;
  out.group_alpha.assign(cfg.groups.size(), 1.0);
  out.member_alpha.assign(member_capacity_kw.size(), 1.0);
  out.setpoint_kw.assign(member_capacity_kw.size(), 0.0);
  for (std::size_t g = 0; g < cfg.groups.size(); ++g) {
    const double est = std::max(0.0, group_impp_est[g]);
    const double alpha = est > 0.0 ? ratio : 1.0;
    out.group_alpha[g] = alpha;
    double cap = 0.0;
    for (std::size_t m : cfg.groups[g]) cap += member_capacity_kw[m];
    for (std::size_t m : cfg.groups[g]) {
      out.member_alpha[m] = alpha;
      out.setpoint_kw[m] = cap > 0.0 ? alpha * est * member_capacity_kw[m] / cap : 0.0;
      out.planned_kw += out.setpoint_kw[m];
    }
  }
  return out;
}

GroupingController::GroupingController(GroupingConfig cfg, std::vector<double> member_capacity_kw,
                                       GroupingMode mode)
    : cfg_(std::move(cfg)), capacity_(std::move(member_capacity_kw)), mode_(mode) {
  cfg_.validate(capacity_.size());
  for (double c : capacity_)
    if (!(c > 0.0)) throw ConfigError("member capacity must be positive");
  group_est_.assign(cfg_.groups.size(), 0.0);
}

void GroupingController::aggregate(std::span<const double> available_kw) {
  if (available_kw.size() != capacity_.size()) throw ConfigError("grouping: wrong inverter count");
  for (std::size_t g = 0; g < cfg_.groups.size(); ++g) {
    group_est_[g] = 0.0;
    for (std::size_t m : cfg_.groups[g]) group_est_[g] += available_kw[m];
  }
}

void GroupingController::bootstrap(std::span<const double> available_kw) {
  aggregate(available_kw);
  bootstrapped_ = true;
}

const GroupSetpoints& GroupingController::step(double p_desired) {
  if (!bootstrapped_) throw ConfigError("grouping controller stepped before bootstrap");
  const double target =
      mode_ == GroupingMode::Headroom ? headroom_target(group_est_, cfg_.headroom_fraction) : p_desired;
  last_ = grouping_step(target, group_est_, cfg_, capacity_);
  return last_;
}

void GroupingController::observe(std::span<const double> available_kw) { aggregate(available_kw); }

std::vector<double> realize_output(std::span<const double> setpoint_kw, std::span<const double> available_kw) {
  if (setpoint_kw.size() != available_kw.size()) throw ConfigError("realize_output: length mismatch");
  std::vector<double> out(setpoint_kw.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(0.0, std::min(setpoint_kw[i], available_kw[i]));
  return out;
}

}  // namespace pvctl
