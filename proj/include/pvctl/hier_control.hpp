#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pvctl/correlation.hpp"
#include "pvctl/tick_scheduler.hpp"

namespace pvctl {

inline constexpr double kDefaultAlphaFloor = 0.01;

/// Direct-layer view of one inverter for a single control iteration.
struct InverterState {
  std::size_t id = 0;
  double p_final_prev = 0.0;  // measured output of the previous iteration, kW
  double alpha_prev = 1.0;    // curtailment ratio applied in the previous iteration
  double p_impp_est = 0.0;    // estimated maximum power potential, kW
  double p_res = 0.0;         // p_impp_est - p_request
  bool needs_help = false;
  double alpha = 1.0;
  double p_final = 0.0;  // provisional during allocation, final after finalize_alphas()
};

struct SupervisorState {
  std::size_t id = 0;
  std::vector<std::size_t> members;  // ascending inverter ids
  double p_sup = 0.0;                // sum of member residuals
  bool needs_help = false;
};

struct PlantRequest {
  double p_desired = 0.0;
  std::size_t n_inverters = 0;
  double p_request = 0.0;     // p_desired / n_inverters
  double p_mpp_system = 0.0;  // sum of p_impp_est
};

enum class Layer { Direct, Supervisor, Adaptive };

struct AgentId {
  Layer layer = Layer::Direct;
  std::size_t index = 0;

  static AgentId inverter(std::size_t i) { return {Layer::Direct, i}; }
  static AgentId supervisor(std::size_t c) { return {Layer::Supervisor, c}; }
  static AgentId central() { return {Layer::Adaptive, 0}; }

  /// `inv<i>`, `sup<c>` or `central`.
  std::string str() const;
  bool operator==(const AgentId&) const = default;
};

enum class MessageKind { ImppReport, HelpRequest, HelpGrant, SetpointAssignment };

std::string_view to_string(MessageKind kind);

struct ControlMessage {
  MessageKind kind = MessageKind::ImppReport;
  AgentId sender;
  AgentId receiver;
  double amount_kw = 0.0;
  std::int64_t iteration = 0;

  bool touches_adaptive() const {
    return sender.layer == Layer::Adaptive || receiver.layer == Layer::Adaptive;
  }
};

/// `iteration,kind,sender,receiver,amount_kw` (no trailing newline).
std::string to_csv_line(const ControlMessage& message);

// ---------------------------------------------------------------------------
// Estimation and request

/// Previous output divided by the previous curtailment ratio. A ratio below
/// `alpha_floor` is raised to the floor before dividing.
double estimate_impp(double p_final_prev, double alpha_prev, double alpha_floor = kDefaultAlphaFloor);

double system_mpp(std::span<const InverterState> states);

/// p_desired / n. Throws ConfigError for n == 0.
double uniform_request(double p_desired, std::size_t n);

struct Residual {
  double p_res = 0.0;
  bool needs_help = false;
};

Residual residual(double p_impp_est, double p_request);

// ---------------------------------------------------------------------------
// Allocation

struct Shortfall {
  std::size_t requester = 0;
  double amount_kw = 0.0;
};

struct ClusterAllocation {
  double remaining_deficit = 0.0;
  std::vector<Shortfall> unresolved;  // ascending requester id
};

/// Starts every member at min(p_impp_est, p_request), then covers each
/// requester's shortfall (ascending id) from other members' headroom, visiting
/// donors in the requester's neighbour order. `states` is indexed by
/// inverter id; residuals must already be set. Updates `supervisor.p_sup`.
ClusterAllocation allocate_within_cluster(SupervisorState& supervisor, std::span<InverterState> states,
                                          double p_request, const NeighborOrder& order,
                                          std::vector<ControlMessage>* log = nullptr,
                                          std::int64_t iteration = 0);

struct CrossClusterAllocation {
  double plant_deficit = 0.0;  // max(0, p_desired - p_mpp_system)
  double covered_kw = 0.0;     // deficit moved onto donor clusters
  std::vector<double> contribution_kw;  // per supervisor
};

/// Covers the clusters' remaining deficits from clusters with spare headroom,
/// split in proportion to each donor cluster's aggregate headroom and placed
/// on donor members in each requester's neighbour order.
CrossClusterAllocation allocate_across_clusters(std::span<SupervisorState> supervisors,
                                                std::span<InverterState> states,
                                                std::span<const ClusterAllocation> within,
                                                const PlantRequest& plant, const NeighborOrder& order,
                                                std::vector<ControlMessage>* log = nullptr,
                                                std::int64_t iteration = 0);

struct FinalizeResult {
  double surplus_kw = 0.0;  // output added by raising ratios to the floor
  std::size_t floor_clamped = 0;
};

/// alpha = p_final / p_impp_est clamped to [alpha_floor, 1]; an inverter lifted
/// to the floor has its p_final recomputed. Inverters with no estimated power
/// keep alpha = 1. Throws InvariantViolation when p_final exceeds p_impp_est.
FinalizeResult finalize_alphas(std::span<InverterState> states, double alpha_floor = kDefaultAlphaFloor);

struct HierarchyConfig {
  double alpha_floor = kDefaultAlphaFloor;
  std::size_t max_rounds = 10;
  double tolerance = 1e-6;  // relative, on the plant sum

  void validate() const;
};

struct IterationResult {
  bool converged = false;
  std::size_t rounds = 0;
  double target_kw = 0.0;      // clamp(p_desired, floor output, p_mpp_system)
  double total_kw = 0.0;       // sum of p_final
  double plant_deficit = 0.0;  // desired output above p_mpp_system
  double plant_excess = 0.0;   // desired output below the floor output
  std::size_t help_requests = 0;
  std::size_t adaptive_messages = 0;
};

/// One full control iteration on `states` (indexed by inverter id), using
/// each state's p_final_prev / alpha_prev. Throws ConvergenceError with the
/// message trace if no feasible assignment is reached within max_rounds.
IterationResult control_step(PlantRequest& plant, std::span<InverterState> states,
                             std::span<SupervisorState> supervisors, const NeighborOrder& order,
                             const HierarchyConfig& cfg, std::int64_t iteration,
                             std::vector<ControlMessage>* log = nullptr);

/// Owns inverter and supervisor state across iterations and applies the
/// layer schedule: adaptive ticks run control_step(); supervisor-only ticks
/// reallocate inside clusters with the held request; direct-only ticks
/// re-derive ratios from held kW targets and fresh estimates.
class HierarchicalController {
 public:
  HierarchicalController(std::size_t n_inverters, Clusters clusters, HierarchyConfig cfg = {});

  /// Seeds the estimator from one iteration at full output (alpha = 1).
  void bootstrap(std::span<const double> output_at_full_kw);

  IterationResult step(double p_desired, const NeighborOrder& order, LayerTicks ticks = LayerTicks::all());

  /// Measured per-inverter output after applying the latest ratios.
  void observe(std::span<const double> measured_output_kw);

  std::span<const InverterState> states() const noexcept { return states_; }
  std::span<const SupervisorState> supervisors() const noexcept { return supervisors_; }
  const std::vector<ControlMessage>& messages() const noexcept { return messages_; }
  std::int64_t iteration() const noexcept { return iteration_; }
  std::size_t floor_clamp_events() const noexcept { return floor_clamp_events_; }
  const HierarchyConfig& config() const noexcept { return cfg_; }

 private:
  void estimate_and_report();

  HierarchyConfig cfg_;
  std::vector<InverterState> states_;
  std::vector<SupervisorState> supervisors_;
  std::vector<double> target_kw_;
  std::vector<double> cross_extra_kw_;
  double held_request_ = 0.0;
  std::int64_t iteration_ = 0;
  std::size_t floor_clamp_events_ = 0;
  bool bootstrapped_ = false;
  std::vector<ControlMessage> messages_;
};

}  // namespace pvctl
