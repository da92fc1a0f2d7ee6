#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace pvctl {

enum class TickMode { Instant, Cadenced };

/// Decision periods of the three layers, seconds.
struct LayerCadences {
  std::int64_t direct_s = 1;
  std::int64_t supervisor_s = 10;
  std::int64_t adaptive_s = 60;
};

struct LayerTicks {
  bool direct = true;
  bool supervisor = true;
  bool adaptive = true;

  static LayerTicks all() { return {}; }
};

class TickScheduler {
 public:
  /// Throws ConfigError unless every cadence is a positive multiple of `step_s`.
  TickScheduler(LayerCadences cadences, TickMode mode, std::int64_t step_s);

  LayerTicks at(std::size_t step_index) const;
  std::vector<LayerTicks> schedule(std::size_t n_steps) const;

  TickMode mode() const noexcept { return mode_; }

 private:
  LayerCadences cadences_;
  TickMode mode_;
  std::int64_t step_s_;
};

}  // namespace pvctl
