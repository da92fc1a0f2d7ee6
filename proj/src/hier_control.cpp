#include "pvctl/hier_control.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "csv_util.hpp"
#include "pvctl/error.hpp"

namespace pvctl {
namespace {

// Slack when comparing an assignment against its own estimate.
constexpr double kFeasibilityEps = 1e-9;

void emit(std::vector<ControlMessage>* log, MessageKind kind, AgentId from, AgentId to, double kw,
          std::int64_t iteration) {
  if (log != nullptr) log->push_back({kind, from, to, kw, iteration});
}

std::vector<std::size_t> cluster_of(std::span<const SupervisorState> supervisors, std::size_t n) {
  std::vector<std::size_t> owner(n, supervisors.size());
  for (const auto& sup : supervisors)
    for (std::size_t m : sup.members) {
      if (m >= n) throw ConfigError(fmt::format("supervisor {} lists unknown inverter {}", sup.id, m));
      owner[m] = sup.id;
    }
  return owner;
}

bool exceeds_estimate(const InverterState& s) {
  return s.p_final > s.p_impp_est * (1.0 + kFeasibilityEps) + kFeasibilityEps;
}

double recompute_alpha(InverterState& s, double alpha_floor) {
  if (s.p_impp_est <= 0.0) {
    s.alpha = 1.0;
    s.p_final = 0.0;
    return 0.0;
  }
  s.alpha = std::clamp(s.p_final / s.p_impp_est, alpha_floor, 1.0);
  return s.p_final;
}

double total_output(std::span<const InverterState> states) {
  double t = 0.0;
  for (const auto& s : states) t += s.p_final;
  return t;
}

double floor_output(std::span<const InverterState> states, double alpha_floor) {
  double t = 0.0;
  for (const auto& s : states) t += alpha_floor * std::max(0.0, s.p_impp_est);
  return t;
}

/// Moves the plant sum toward `target` in proportion to each inverter's
/// available margin (headroom when raising, distance to the floor when lowering).
void rebalance(std::span<InverterState> states, double target, double alpha_floor) {
  const double gap = target - total_output(states);
  if (gap > 0.0) {
    double headroom = 0.0;
    for (const auto& s : states) headroom += std::max(0.0, s.p_impp_est - s.p_final);
    if (headroom > 0.0)
      for (auto& s : states) {
        const double h = std::max(0.0, s.p_impp_est - s.p_final);
        s.p_final = std::min(s.p_impp_est, s.p_final + gap * h / headroom);
      }
  } else if (gap < 0.0) {
    double reducible = 0.0;
    for (const auto& s : states) reducible += std::max(0.0, s.p_final - alpha_floor * s.p_impp_est);
    if (reducible > 0.0)
      for (auto& s : states) {
        const double r = std::max(0.0, s.p_final - alpha_floor * s.p_impp_est);
        s.p_final = std::max(alpha_floor * s.p_impp_est, s.p_final + gap * r / reducible);
      }
  }
  for (auto& s : states) recompute_alpha(s, alpha_floor);
}

std::string format_trace(const std::vector<ControlMessage>& log) {
  std::string out;
  for (const auto& m : log) {
    out += to_csv_line(m);
    out += '\n';
  }
  return out;
}

void report_estimates(std::span<InverterState> states, const std::vector<std::size_t>& owner,
                      double alpha_floor, std::vector<ControlMessage>* log, std::int64_t iteration) {
  for (auto& s : states) {
    s.p_impp_est = estimate_impp(s.p_final_prev, s.alpha_prev, alpha_floor);
    emit(log, MessageKind::ImppReport, AgentId::inverter(s.id), AgentId::supervisor(owner[s.id]),
         s.p_impp_est, iteration);
  }
}

void assign_setpoints(std::span<const InverterState> states, const std::vector<std::size_t>& owner,
                      std::vector<ControlMessage>* log, std::int64_t iteration) {
  for (const auto& s : states)
    emit(log, MessageKind::SetpointAssignment, AgentId::supervisor(owner[s.id]), AgentId::inverter(s.id),
         s.p_final, iteration);
}

struct AllocationOutcome {
  IterationResult result;
  std::vector<double> cross_extra;
};

/// Request, allocation and rebalancing on states whose estimates are already current.
AllocationOutcome allocate(PlantRequest& plant, std::span<InverterState> states,
                           std::span<SupervisorState> supervisors, const NeighborOrder& order,
                           const HierarchyConfig& cfg, std::int64_t iteration,
                           std::vector<ControlMessage>* log, const std::vector<std::size_t>& owner) {
  const std::size_t log_start = log->size();
  plant.n_inverters = states.size();
  plant.p_request = uniform_request(plant.p_desired, states.size());
  plant.p_mpp_system = system_mpp(states);
  for (auto& s : states) {
    const auto r = residual(s.p_impp_est, plant.p_request);
    s.p_res = r.p_res;
    s.needs_help = r.needs_help;
  }

  std::vector<ClusterAllocation> within;
  within.reserve(supervisors.size());
  for (auto& sup : supervisors)
    within.push_back(allocate_within_cluster(sup, states, plant.p_request, order, log, iteration));

  AllocationOutcome out;
  out.cross_extra.assign(states.size(), 0.0);
  for (const auto& s : states) out.cross_extra[s.id] = -s.p_final;
  const auto across = allocate_across_clusters(supervisors, states, within, plant, order, log, iteration);
  for (const auto& s : states) out.cross_extra[s.id] += s.p_final;

  finalize_alphas(states, cfg.alpha_floor);

  auto& res = out.result;
  res.plant_deficit = across.plant_deficit;
  const double lower = floor_output(states, cfg.alpha_floor);
  res.plant_excess = std::max(0.0, lower - plant.p_desired);
  res.target_kw = std::clamp(plant.p_desired, lower, std::max(lower, plant.p_mpp_system));

  auto converged = [&] {
    if (std::any_of(states.begin(), states.end(), exceeds_estimate)) return false;
    const double band = cfg.tolerance * std::max(res.target_kw, 1e-6);
    return std::abs(total_output(states) - res.target_kw) <= band;
  };
  res.rounds = 1;
  while (!converged() && res.rounds < cfg.max_rounds) {
    rebalance(states, res.target_kw, cfg.alpha_floor);
    ++res.rounds;
  }
  res.total_kw = total_output(states);
  res.converged = converged();
  if (!res.converged) {
    throw ConvergenceError(
        fmt::format("iteration {}: plant output {} kW did not reach {} kW within {} rounds", iteration,
                    res.total_kw, res.target_kw, cfg.max_rounds),
        format_trace(*log));
  }
  assign_setpoints(states, owner, log, iteration);
  for (std::size_t k = log_start; k < log->size(); ++k) {
    const auto& m = (*log)[k];
    if (m.kind == MessageKind::HelpRequest) ++res.help_requests;
    if (m.touches_adaptive()) ++res.adaptive_messages;
  }
  return out;
}

}  // namespace

std::string AgentId::str() const {
  switch (layer) {
    case Layer::Direct:
      return fmt::format("inv{}", index);
    case Layer::Supervisor:
      return fmt::format("sup{}", index);
    case Layer::Adaptive:
      return "central";
  }
  return {};
}

std::string_view to_string(MessageKind kind) {
  switch (kind) {
    case MessageKind::ImppReport:
      return "ImppReport";
    case MessageKind::HelpRequest:
      return "HelpRequest";
    case MessageKind::HelpGrant:
      return "HelpGrant";
    case MessageKind::SetpointAssignment:
      return "SetpointAssignment";
  }
  return "?";
}

std::string to_csv_line(const ControlMessage& m) {
  return fmt::format("{},{},{},{},{}", m.iteration, to_string(m.kind), m.sender.str(), m.receiver.str(),
                     detail::format_double(m.amount_kw));
}

double estimate_impp(double p_final_prev, double alpha_prev, double alpha_floor) {
  return p_final_prev / std::max(alpha_prev, alpha_floor);
}

double system_mpp(std::span<const InverterState> states) {
  double total = 0.0;
  for (const auto& s : states) total += s.p_impp_est;
  return total;
}

double uniform_request(double p_desired, std::size_t n) {
  if (n == 0) throw ConfigError("uniform request over zero inverters");
  return p_desired / static_cast<double>(n);
}

Residual residual(double p_impp_est, double p_request) {
  const double r = p_impp_est - p_request;
  return {r, r < 0.0};
}

ClusterAllocation allocate_within_cluster(SupervisorState& supervisor, std::span<InverterState> states,
                                          double p_request, const NeighborOrder& order,
                                          std::vector<ControlMessage>* log, std::int64_t iteration) {
  std::vector<char> member(states.size(), 0);
  supervisor.p_sup = 0.0;
  for (std::size_t m : supervisor.members) {
    member[m] = 1;
    auto& s = states[m];
    s.p_final = std::min(s.p_impp_est, p_request);
    supervisor.p_sup += s.p_res;
  }
  supervisor.needs_help = supervisor.p_sup < 0.0;

  ClusterAllocation out;
  for (std::size_t r : supervisor.members) {
    if (!states[r].needs_help) continue;
    double shortfall = -states[r].p_res;
    emit(log, MessageKind::HelpRequest, AgentId::inverter(r), AgentId::supervisor(supervisor.id), shortfall,
         iteration);
    for (std::size_t d : order.of(r)) {
      if (shortfall <= 0.0) break;
      if (!member[d]) continue;
      auto& donor = states[d];
      const double headroom = donor.p_impp_est - donor.p_final;
      if (headroom <= 0.0) continue;
      const double take = std::min(shortfall, headroom);
      donor.p_final += take;
      shortfall -= take;
      emit(log, MessageKind::HelpGrant, AgentId::inverter(d), AgentId::inverter(r), take, iteration);
    }
    if (shortfall > 0.0) {
      out.unresolved.push_back({r, shortfall});
      out.remaining_deficit += shortfall;
    }
  }
  return out;
}

CrossClusterAllocation allocate_across_clusters(std::span<SupervisorState> supervisors,
                                                std::span<InverterState> states,
                                                std::span<const ClusterAllocation> within,
                                                const PlantRequest& plant, const NeighborOrder& order,
                                                std::vector<ControlMessage>* log, std::int64_t iteration) {
  CrossClusterAllocation out;
  out.contribution_kw.assign(supervisors.size(), 0.0);
  out.plant_deficit = std::max(0.0, plant.p_desired - plant.p_mpp_system);

  double deficit = 0.0;
  for (const auto& w : within) deficit += w.remaining_deficit;
  if (deficit <= 0.0) return out;

  std::vector<double> headroom(supervisors.size(), 0.0);
  double total_headroom = 0.0;
  for (std::size_t c = 0; c < supervisors.size(); ++c) {
    if (within[c].remaining_deficit > 0.0) {
      emit(log, MessageKind::HelpRequest, AgentId::supervisor(supervisors[c].id), AgentId::central(),
           within[c].remaining_deficit, iteration);
      continue;
    }
    for (std::size_t m : supervisors[c].members)
      headroom[c] += std::max(0.0, states[m].p_impp_est - states[m].p_final);
    total_headroom += headroom[c];
  }
  if (total_headroom <= 0.0) return out;

  const double covered = std::min(deficit, total_headroom);
  out.covered_kw = covered;
  for (std::size_t c = 0; c < supervisors.size(); ++c) {
    if (headroom[c] <= 0.0) continue;
    out.contribution_kw[c] = covered * headroom[c] / total_headroom;
    emit(log, MessageKind::HelpRequest, AgentId::central(), AgentId::supervisor(supervisors[c].id),
         out.contribution_kw[c], iteration);
    emit(log, MessageKind::HelpGrant, AgentId::supervisor(supervisors[c].id), AgentId::central(),
         out.contribution_kw[c], iteration);
  }

  std::vector<Shortfall> requesters;
  for (const auto& w : within) requesters.insert(requesters.end(), w.unresolved.begin(), w.unresolved.end());
  std::sort(requesters.begin(), requesters.end(),
            [](const Shortfall& a, const Shortfall& b) { return a.requester < b.requester; });

  std::vector<std::size_t> owner(states.size(), supervisors.size());
  for (std::size_t c = 0; c < supervisors.size(); ++c)
    for (std::size_t m : supervisors[c].members) owner[m] = c;

  for (const auto& req : requesters) {
    const double served = req.amount_kw * covered / deficit;
    for (std::size_t c = 0; c < supervisors.size(); ++c) {
      if (headroom[c] <= 0.0) continue;
      double part = served * headroom[c] / total_headroom;
      for (std::size_t d : order.of(req.requester)) {
        if (part <= 0.0) break;
        if (owner[d] != c) continue;
        auto& donor = states[d];
        const double room = donor.p_impp_est - donor.p_final;
        if (room <= 0.0) continue;
        const double take = std::min(part, room);
        donor.p_final += take;
        part -= take;
        emit(log, MessageKind::HelpGrant, AgentId::inverter(d), AgentId::inverter(req.requester), take,
             iteration);
      }
    }
  }
  for (std::size_t c = 0; c < supervisors.size(); ++c)
    if (within[c].remaining_deficit > 0.0)
      emit(log, MessageKind::HelpGrant, AgentId::central(), AgentId::supervisor(supervisors[c].id),
           covered * within[c].remaining_deficit / deficit, iteration);
  return out;
}

FinalizeResult finalize_alphas(std::span<InverterState> states, double alpha_floor) {
  FinalizeResult out;
  for (auto& s : states) {
    if (exceeds_estimate(s))
      throw InvariantViolation(fmt::format("inverter {} assigned {} kW above its estimate {} kW", s.id,
                                           s.p_final, s.p_impp_est));
    if (s.p_impp_est <= 0.0) {
      s.alpha = 1.0;
      s.p_final = 0.0;
      continue;
    }
    s.p_final = std::min(s.p_final, s.p_impp_est);
    const double ratio = s.p_final / s.p_impp_est;
    if (ratio < alpha_floor) {
      const double lifted = alpha_floor * s.p_impp_est;
      out.surplus_kw += lifted - s.p_final;
      ++out.floor_clamped;
      s.alpha = alpha_floor;
      s.p_final = lifted;
    } else {
      s.alpha = ratio;
    }
  }
  return out;
}

void HierarchyConfig::validate() const {
  if (!(alpha_floor > 0.0 && alpha_floor <= 1.0)) throw ConfigError("alpha_floor must lie in (0, 1]");
  if (max_rounds == 0) throw ConfigError("max_rounds must be at least 1");
  if (!(tolerance > 0.0)) throw ConfigError("convergence tolerance must be positive");
}

IterationResult control_step(PlantRequest& plant, std::span<InverterState> states,
                             std::span<SupervisorState> supervisors, const NeighborOrder& order,
                             const HierarchyConfig& cfg, std::int64_t iteration,
                             std::vector<ControlMessage>* log) {
  std::vector<ControlMessage> local;
  if (log == nullptr) log = &local;
  const auto owner = cluster_of(supervisors, states.size());
  report_estimates(states, owner, cfg.alpha_floor, log, iteration);
  return allocate(plant, states, supervisors, order, cfg, iteration, log, owner).result;
}

HierarchicalController::HierarchicalController(std::size_t n_inverters, Clusters clusters, HierarchyConfig cfg)
    : cfg_(cfg), states_(n_inverters), target_kw_(n_inverters, 0.0), cross_extra_kw_(n_inverters, 0.0) {
  cfg_.validate();
  if (n_inverters == 0) throw ConfigError("plant has no inverters");
  std::vector<int> seen(n_inverters, 0);
  for (std::size_t c = 0; c < clusters.size(); ++c) {
    auto members = clusters[c];
    std::sort(members.begin(), members.end());
    for (std::size_t m : members) {
      if (m >= n_inverters) throw ConfigError(fmt::format("cluster {} lists unknown inverter {}", c, m));
      ++seen[m];
    }
    supervisors_.push_back({c, std::move(members), 0.0, false});
  }
  for (std::size_t i = 0; i < n_inverters; ++i) {
    if (seen[i] != 1) throw ConfigError(fmt::format("inverter {} belongs to {} clusters", i, seen[i]));
    states_[i].id = i;
  }
}

void HierarchicalController::bootstrap(std::span<const double> output_at_full_kw) {
  if (output_at_full_kw.size() != states_.size()) throw ConfigError("bootstrap: wrong inverter count");
  for (auto& s : states_) {
    s.p_final_prev = s.p_final = output_at_full_kw[s.id];
    s.alpha_prev = s.alpha = 1.0;
    s.p_impp_est = s.p_final;
    target_kw_[s.id] = s.p_final;
  }
  iteration_ = 0;
  bootstrapped_ = true;
}

void HierarchicalController::estimate_and_report() {
  const auto owner = cluster_of(supervisors_, states_.size());
  for (const auto& s : states_)
    if (s.alpha_prev < cfg_.alpha_floor) ++floor_clamp_events_;
  report_estimates(states_, owner, cfg_.alpha_floor, &messages_, iteration_);
}

IterationResult HierarchicalController::step(double p_desired, const NeighborOrder& order, LayerTicks ticks) {
  if (!bootstrapped_) throw ConfigError("hierarchical controller stepped before bootstrap");
  if (order.size() != states_.size()) throw ConfigError("neighbour order does not match inverter count");
  ++iteration_;
  messages_.clear();

  IterationResult res;
  if (!ticks.direct) {
    res.converged = true;
    res.total_kw = total_output(states_);
    return res;
  }

  estimate_and_report();
  const auto owner = cluster_of(supervisors_, states_.size());

  if (ticks.adaptive) {
    PlantRequest plant{p_desired, states_.size(), 0.0, 0.0};
    auto out = allocate(plant, states_, supervisors_, order, cfg_, iteration_, &messages_, owner);
    held_request_ = plant.p_request;
    cross_extra_kw_ = std::move(out.cross_extra);
    for (const auto& s : states_) target_kw_[s.id] = s.p_final;
    return out.result;
  }

  if (ticks.supervisor) {
    for (auto& s : states_) {
      const auto r = residual(s.p_impp_est, held_request_);
      s.p_res = r.p_res;
      s.needs_help = r.needs_help;
    }
    for (auto& sup : supervisors_) allocate_within_cluster(sup, states_, held_request_, order, &messages_, iteration_);
    for (auto& s : states_) s.p_final = std::min(s.p_impp_est, s.p_final + cross_extra_kw_[s.id]);
    finalize_alphas(states_, cfg_.alpha_floor);
    assign_setpoints(states_, owner, &messages_, iteration_);
    for (const auto& s : states_) target_kw_[s.id] = s.p_final;
  } else {
    for (auto& s : states_) {
      s.p_final = std::clamp(target_kw_[s.id], 0.0, std::max(0.0, s.p_impp_est));
      recompute_alpha(s, cfg_.alpha_floor);
      if (s.p_impp_est > 0.0) s.p_final = s.alpha * s.p_impp_est;
    }
  }
  for (const auto& m : messages_)
    if (m.kind == MessageKind::HelpRequest) ++res.help_requests;
  res.converged = std::none_of(states_.begin(), states_.end(), exceeds_estimate);
  res.total_kw = total_output(states_);
  res.target_kw = res.total_kw;
  return res;
}

void HierarchicalController::observe(std::span<const double> measured_output_kw) {
  if (measured_output_kw.size() != states_.size()) throw ConfigError("observe: wrong inverter count");
  for (auto& s : states_) {
    s.p_final_prev = measured_output_kw[s.id];
    s.alpha_prev = s.alpha;
  }
}

}  // namespace pvctl
