#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace pvctl {

/// Seconds since the Unix epoch, UTC.
using Timestamp = std::int64_t;

inline constexpr std::int64_t kSecondsPerDay = 86400;

/// Parses `YYYY-MM-DDTHH:MM:SS` with an optional `Z` or `+HH:MM`/`-HH:MM`
/// suffix (a space is accepted in place of `T`). Throws DomainError.
Timestamp parse_iso8601(std::string_view text);

/// Formats as `YYYY-MM-DDTHH:MM:SSZ`.
std::string format_iso8601(Timestamp ts);

/// Seconds since local midnight for a plant whose clock is `utc_offset_s`
/// ahead of UTC.
std::int64_t seconds_of_day(Timestamp ts, std::int64_t utc_offset_s = 0);

/// Parses `HH:MM[:SS]` into seconds since midnight. Throws DomainError.
std::int64_t parse_time_of_day(std::string_view text);

/// Uniform sample grid: `count` samples starting at `start`, `step_s` apart.
struct TimeGrid {
  Timestamp start = 0;
  std::int64_t step_s = 1;
  std::size_t count = 0;

  Timestamp at(std::size_t i) const { return start + static_cast<std::int64_t>(i) * step_s; }
  bool operator==(const TimeGrid&) const = default;
};

}  // namespace pvctl
