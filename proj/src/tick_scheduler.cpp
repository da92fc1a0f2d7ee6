#include "pvctl/tick_scheduler.hpp"

#include <fmt/format.h>

#include "pvctl/error.hpp"

namespace pvctl {
namespace {

void check_cadence(const char* layer, std::int64_t cadence, std::int64_t step) {
  if (cadence <= 0 || cadence % step != 0)
    throw ConfigError(fmt::format("{} cadence {} s is not a positive multiple of the {} s step", layer,
                                  cadence, step));
}

}  // namespace

TickScheduler::TickScheduler(LayerCadences cadences, TickMode mode, std::int64_t step_s)
    : cadences_(cadences), mode_(mode), step_s_(step_s) {
  if (step_s <= 0) throw ConfigError("simulation step must be positive");
  check_cadence("direct", cadences.direct_s, step_s);
  check_cadence("supervisor", cadences.supervisor_s, step_s);
  check_cadence("adaptive", cadences.adaptive_s, step_s);
}

LayerTicks TickScheduler::at(std::size_t step_index) const {
  if (mode_ == TickMode::Instant) return LayerTicks::all();
  const auto t = static_cast<std::int64_t>(step_index) * step_s_;
  return {t % cadences_.direct_s == 0, t % cadences_.supervisor_s == 0, t % cadences_.adaptive_s == 0};
}

std::vector<LayerTicks> TickScheduler::schedule(std::size_t n_steps) const {
  std::vector<LayerTicks> out;
  out.reserve(n_steps);
  for (std::size_t i = 0; i < n_steps; ++i) out.push_back(at(i));
  return out;
}

}  // namespace pvctl
