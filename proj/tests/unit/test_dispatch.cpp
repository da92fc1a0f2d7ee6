#include <doctest.h>

#include "pvctl/dispatch.hpp"
#include "pvctl/error.hpp"

using namespace pvctl;

TEST_CASE("desired output examples") {
  CHECK(desired_output(5000, 0.5, 1000) == 5500.0);
  CHECK(desired_output(5000, 0.0, 1000) == 5000.0);
  CHECK(desired_output(500, -1.0, 1000) == 0.0);
  CHECK(desired_output(5000, -1.0, 1000) == 4000.0);
  CHECK_THROWS_AS(desired_output(5000, 1.5, 1000), DomainError);
  CHECK_THROWS_AS(desired_output(-1, 0, 1000), DomainError);
  CHECK_THROWS_AS(desired_output(1, 0, -1), DomainError);
}

TEST_CASE("desired output is monotone in the regulation signal") {
  double prev = -1;
  for (int k = -100; k <= 100; ++k) {
    const double p = desired_output(3000, k / 100.0, 1500);
    CHECK(p >= prev);
    prev = p;
  }
}

TEST_CASE("regulation samples are held across finer steps") {
  const TimeGrid grid{parse_iso8601("2026-06-21T09:00:00Z"), 1, 4};
  RegulationSignal sig{2, grid.start, {0.5, -0.5}};
  const auto a = regulation_window(sig, grid, {});
  CHECK(a.regd == std::vector<double>{0.5, 0.5, -0.5, -0.5});
  CHECK(a.interval == std::vector<std::int64_t>{0, 0, 1, 1});
}

TEST_CASE("regulation is zero outside the active window") {
  const TimeGrid grid{parse_iso8601("2026-06-21T08:59:00Z"), 60, 3};
  RegulationSignal sig{60, std::nullopt, {0.7, 0.3}};
  const auto a = regulation_window(sig, grid, {});
  CHECK(a.regd == std::vector<double>{0.0, 0.7, 0.3});
  CHECK(a.interval == std::vector<std::int64_t>{-1, 0, 1});

  const TimeGrid late{parse_iso8601("2026-06-21T16:59:00Z"), 60, 2};
  RegulationSignal long_sig{60, parse_iso8601("2026-06-21T09:00:00Z"), std::vector<double>(600, 0.1)};
  const auto b = regulation_window(long_sig, late, {});
  CHECK(b.regd == std::vector<double>{0.1, 0.0});
}

TEST_CASE("local time offset shifts the window") {
  const TimeGrid grid{parse_iso8601("2026-06-21T07:00:00Z"), 3600, 2};
  RegulationSignal sig{3600, std::nullopt, {0.2, 0.4}};
  const auto a = regulation_window(sig, grid, {}, 2 * 3600);
  CHECK(a.regd == std::vector<double>{0.2, 0.4});
}

TEST_CASE("empty or exhausted signals give zero") {
  const TimeGrid grid{parse_iso8601("2026-06-21T09:00:00Z"), 2, 3};
  const auto a = regulation_window(RegulationSignal{2, grid.start, {}}, grid, {});
  CHECK(a.regd == std::vector<double>{0, 0, 0});
  CHECK(a.interval == std::vector<std::int64_t>{-1, -1, -1});
  const auto b = regulation_window(RegulationSignal{2, grid.start, {0.9}}, grid, {});
  CHECK(b.regd == std::vector<double>{0.9, 0, 0});
}

TEST_CASE("misaligned steps are rejected") {
  const TimeGrid grid{0, 3, 10};
  CHECK_THROWS_AS(regulation_window(RegulationSignal{2, 0, {0.1}}, grid, {}), ConfigError);
  CHECK_THROWS_AS((ActiveWindow{10, 5}.validate()), ConfigError);
}

TEST_CASE("dispatch assembly") {
  const TimeGrid grid{parse_iso8601("2026-06-21T09:00:00Z"), 1, 2};
  CommitmentSchedule sched{{{9 * 3600, 1000}, {9 * 3600 + 10, 2000}}};
  const auto commit = commitment_series(sched, grid);
  CHECK(commit[1] == doctest::Approx(1100));
  const auto reg = regulation_window(RegulationSignal{1, grid.start, {1.0, -0.5}}, grid, {});
  const auto d = build_dispatch(grid, commit, reg, 200);
  REQUIRE(d.size() == 2);
  CHECK(d[0].p_desired == 1200.0);
  CHECK(d[1].p_desired == doctest::Approx(1000));
  CHECK(d[1].timestamp == grid.start + 1);
  CHECK(d[1].interval == 1);
}
