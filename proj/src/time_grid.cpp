#include "pvctl/time_grid.hpp"

#include <chrono>
#include <charconv>

#include <fmt/format.h>

#include "pvctl/error.hpp"

namespace pvctl {
namespace {

int read_fixed(std::string_view text, std::size_t pos, std::size_t width) {
  if (pos + width > text.size()) throw DomainError(fmt::format("truncated timestamp '{}'", text));
  int value = 0;
  auto first = text.data() + pos;
  auto [ptr, ec] = std::from_chars(first, first + width, value);
  if (ec != std::errc{} || ptr != first + width)
    throw DomainError(fmt::format("malformed timestamp '{}'", text));
  return value;
}

void expect(std::string_view text, std::size_t pos, char c) {
  if (pos >= text.size() || text[pos] != c)
    throw DomainError(fmt::format("malformed timestamp '{}'", text));
}

}  // namespace

Timestamp parse_iso8601(std::string_view text) {
  using namespace std::chrono;
  while (!text.empty() && (text.back() == ' ' || text.back() == '\r')) text.remove_suffix(1);
  while (!text.empty() && text.front() == ' ') text.remove_prefix(1);

  const int y = read_fixed(text, 0, 4);
  expect(text, 4, '-');
  const int mo = read_fixed(text, 5, 2);
  expect(text, 7, '-');
  const int d = read_fixed(text, 8, 2);
  if (text.size() <= 10 || (text[10] != 'T' && text[10] != ' '))
    throw DomainError(fmt::format("malformed timestamp '{}'", text));
  const int h = read_fixed(text, 11, 2);
  expect(text, 13, ':');
  const int mi = read_fixed(text, 14, 2);
  expect(text, 16, ':');
  const int s = read_fixed(text, 17, 2);

  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || h > 23 || mi > 59 || s > 60)
    throw DomainError(fmt::format("invalid calendar value in '{}'", text));

  std::int64_t offset = 0;
  std::size_t pos = 19;
  if (pos < text.size()) {
    const char sign = text[pos];
    if (sign == 'Z' && pos + 1 == text.size()) {
      offset = 0;
    } else if ((sign == '+' || sign == '-') && text.size() == pos + 6) {
      const int oh = read_fixed(text, pos + 1, 2);
      expect(text, pos + 3, ':');
      const int om = read_fixed(text, pos + 4, 2);
      offset = (sign == '+' ? 1 : -1) * (oh * 3600 + om * 60);
    } else {
      throw DomainError(fmt::format("malformed timestamp suffix in '{}'", text));
    }
  }

  const auto days = sys_days{ymd}.time_since_epoch().count();
  return static_cast<std::int64_t>(days) * kSecondsPerDay + h * 3600 + mi * 60 + s - offset;
}

std::string format_iso8601(Timestamp ts) {
  using namespace std::chrono;
  std::int64_t days = ts / kSecondsPerDay;
  std::int64_t rem = ts % kSecondsPerDay;
  if (rem < 0) {
    rem += kSecondsPerDay;
    --days;
  }
  const year_month_day ymd{sys_days{std::chrono::days{days}}};
  return fmt::format("{:04}-{:02}-{:02}T{:02}:{:02}:{:02}Z", static_cast<int>(ymd.year()),
                     static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                     rem / 3600, (rem / 60) % 60, rem % 60);
}

std::int64_t seconds_of_day(Timestamp ts, std::int64_t utc_offset_s) {
  std::int64_t rem = (ts + utc_offset_s) % kSecondsPerDay;
  return rem < 0 ? rem + kSecondsPerDay : rem;
}

std::int64_t parse_time_of_day(std::string_view text) {
  const int h = read_fixed(text, 0, 2);
  expect(text, 2, ':');
  const int m = read_fixed(text, 3, 2);
  int s = 0;
  if (text.size() > 5) {
    expect(text, 5, ':');
    s = read_fixed(text, 6, 2);
    if (text.size() != 8) throw DomainError(fmt::format("malformed time of day '{}'", text));
  }
  if (h > 24 || m > 59 || s > 59 || (h == 24 && (m != 0 || s != 0)))
    throw DomainError(fmt::format("invalid time of day '{}'", text));
  return h * 3600 + m * 60 + s;
}

}  // namespace pvctl
