#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "pvctl/data_ingest.hpp"
#include "pvctl/error.hpp"

using namespace pvctl;

namespace {

Loaded<IrradianceDataset> parse(const std::string& text, const CsvSchema& schema = {}) {
  std::istringstream in(text);
  return parse_irradiance_csv(in, schema);
}

IrradianceDataset column(std::vector<double> values, std::int64_t step = 1) {
  IrradianceDataset ds;
  ds.step_s = step;
  ds.sensors = {"S01"};
  ds.values = SeriesMatrix(values.size(), 1);
  for (std::size_t r = 0; r < values.size(); ++r) ds.values(r, 0) = values[r];
  return ds;
}

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

}  // namespace

TEST_CASE("two rows of one sensor pass through") {
  const auto ds = parse("timestamp,S01\n2026-06-21T05:00:00Z,500\n2026-06-21T05:00:01Z,510\n");
  CHECK(ds.clamped == 0);
  REQUIRE(ds.value.steps() == 2);
  CHECK(ds.value.values(0, 0) == 500.0);
  CHECK(ds.value.values(1, 0) == 510.0);
  CHECK(ds.value.step_s == 1);
  CHECK(ds.value.sensors == std::vector<std::string>{"S01"});
}

TEST_CASE("out-of-range irradiance is clamped and counted") {
  const auto ds = parse("timestamp,S01\n2026-06-21T05:00:00Z,-3\n2026-06-21T05:00:01Z,1600\n");
  CHECK(ds.clamped == 2);
  CHECK(ds.value.values(0, 0) == 0.0);
  CHECK(ds.value.values(1, 0) == kIrradianceMaxWm2);
}

TEST_CASE("repeated timestamps are a validation error") {
  CHECK_THROWS_AS(parse("timestamp,S01\n2026-06-21T05:00:00Z,1\n2026-06-21T05:00:00Z,2\n"), ValidationError);
}

TEST_CASE("irregular steps are a validation error") {
  CHECK_THROWS_AS(
      parse("timestamp,S01\n2026-06-21T05:00:00Z,1\n2026-06-21T05:00:01Z,2\n2026-06-21T05:00:03Z,2\n"),
      ValidationError);
}

TEST_CASE("malformed rows report their line") {
  try {
    parse("timestamp,S01\n2026-06-21T05:00:00Z,1\n2026-06-21T05:00:01Z,abc\n");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
  CHECK_THROWS_AS(parse("timestamp,S01\n2026-06-21T05:00:00Z,1,2\n"), ParseError);
  CHECK_THROWS_AS(parse("timestamp,S01\nnot-a-time,1\n"), ParseError);
}

TEST_CASE("schema selects and orders sensor columns") {
  CsvSchema schema;
  schema.sensor_columns = {"S02", "S01"};
  const auto ds = parse("timestamp,S01,S02\n2026-06-21T05:00:00Z,1,2\n", schema);
  CHECK(ds.value.sensors == std::vector<std::string>{"S02", "S01"});
  CHECK(ds.value.values(0, 0) == 2.0);
  schema.sensor_columns = {"S03"};
  CHECK_THROWS_AS(parse("timestamp,S01,S02\n2026-06-21T05:00:00Z,1,2\n", schema), SchemaError);
  CHECK_THROWS_AS(parse("time,S01\n2026-06-21T05:00:00Z,1\n"), SchemaError);
}

TEST_CASE("blank cells become gaps") {
  const auto ds = parse("timestamp,S01\n2026-06-21T05:00:00Z,1\n2026-06-21T05:00:01Z,\n2026-06-21T05:00:02Z,3\n");
  CHECK(ds.value.has_gaps());
  CHECK(std::isnan(ds.value.values(1, 0)));
}

TEST_CASE("csv round trip is exact") {
  ScenarioSpec spec;
  spec.start_time = 1782018000;
  spec.n_steps = 50;
  spec.sensors = default_sensor_ids(3);
  spec.noise_amp = 7.3;
  spec.events = {{{"S02"}, 5, 30, 0.37}};
  const auto ds = synth_cloud_scenario(spec, 42);
  std::ostringstream out;
  write_irradiance_csv(ds, out);
  const auto back = parse(out.str());
  CHECK(back.clamped == 0);
  CHECK(back.value.start_time == ds.start_time);
  CHECK(back.value.step_s == ds.step_s);
  CHECK(back.value.sensors == ds.sensors);
  CHECK(back.value.values == ds.values);
}

TEST_CASE("fill_gaps interpolates interior gaps") {
  const auto filled = fill_gaps(column({100, kNaN, 300}), 2);
  CHECK(filled.values(1, 0) == doctest::Approx(200.0));
  const auto longer = fill_gaps(column({0, kNaN, kNaN, kNaN, 40}), 3);
  CHECK(longer.values(1, 0) == doctest::Approx(10.0));
  CHECK(longer.values(3, 0) == doctest::Approx(30.0));
}

TEST_CASE("fill_gaps extrapolates flat at the edges") {
  const auto filled = fill_gaps(column({kNaN, 5, 6, kNaN}), 1);
  CHECK(filled.values(0, 0) == 5.0);
  CHECK(filled.values(3, 0) == 6.0);
}

TEST_CASE("fill_gaps rejects long gaps") {
  std::vector<double> v(12, kNaN);
  v.front() = 1;
  v.back() = 2;
  try {
    fill_gaps(column(v), 5);
    FAIL("expected a gap error");
  } catch (const GapError& e) {
    CHECK(e.sensor() == "S01");
    CHECK(e.first_row() == 1);
    CHECK(e.last_row() == 10);
  }
  CHECK_THROWS_AS(fill_gaps(column({kNaN, kNaN}), 100), GapError);
}

TEST_CASE("fill_gaps is idempotent on complete data") {
  const auto ds = column({1, 2, 3, 4});
  CHECK(fill_gaps(ds, 0).values == ds.values);
  CHECK(fill_gaps(fill_gaps(ds, 0), 0).values == ds.values);
}

TEST_CASE("identity scenario is constant") {
  ScenarioSpec spec;
  spec.n_steps = 100;
  spec.sensors = default_sensor_ids(3);
  const auto ds = synth_cloud_scenario(spec, 1);
  for (std::size_t r = 0; r < 100; ++r)
    for (std::size_t c = 0; c < 3; ++c) CHECK(ds.values(r, c) == 1000.0);
}

TEST_CASE("a cloud event attenuates with ten-step ramps") {
  ScenarioSpec spec;
  spec.n_steps = 100;
  spec.sensors = {"S01", "S02"};
  spec.events = {{{"S01"}, 20, 50, 0.6}};
  const auto ds = synth_cloud_scenario(spec, 1);
  CHECK(ds.values(19, 0) == 1000.0);
  CHECK(ds.values(20, 0) == doctest::Approx(1000.0 * (1 - 0.6 * 0.1)));
  CHECK(ds.values(29, 0) == doctest::Approx(400.0));
  CHECK(ds.values(45, 0) == doctest::Approx(400.0));
  CHECK(ds.values(69, 0) == doctest::Approx(1000.0 * (1 - 0.6 * 0.1)));
  CHECK(ds.values(70, 0) == 1000.0);
  for (std::size_t r = 0; r < 100; ++r) CHECK(ds.values(r, 1) == 1000.0);
}

TEST_CASE("invalid cloud depth is a config error") {
  ScenarioSpec spec;
  spec.n_steps = 10;
  spec.sensors = {"S01"};
  spec.events = {{{"S01"}, 0, 5, 1.2}};
  CHECK_THROWS_AS(synth_cloud_scenario(spec, 1), ConfigError);
  spec.events = {{{"S09"}, 0, 5, 0.2}};
  CHECK_THROWS_AS(synth_cloud_scenario(spec, 1), ConfigError);
}

TEST_CASE("scenarios are deterministic and order invariant") {
  ScenarioSpec spec;
  spec.n_steps = 600;
  spec.sensors = default_sensor_ids(6);
  spec.profile = IrradianceProfile::Diurnal;
  spec.sunrise_h = -1;
  spec.sunset_h = 1;
  spec.noise_amp = 5;
  spec.random_events = {12, 20, 90, 0.2, 0.9, 1, 3, 15};
  const auto a = synth_cloud_scenario(spec, 99);
  const auto b = synth_cloud_scenario(spec, 99);
  CHECK(a.values == b.values);
  CHECK_FALSE(synth_cloud_scenario(spec, 100).values == a.values);

  auto reversed = spec;
  std::reverse(reversed.sensors.begin(), reversed.sensors.end());
  const auto r = synth_cloud_scenario(reversed, 99);
  for (std::size_t c = 0; c < 6; ++c)
    for (std::size_t t = 0; t < spec.n_steps; ++t) REQUIRE(r.values(t, 5 - c) == a.values(t, c));
}

TEST_CASE("diurnal profile is zero outside daylight") {
  ScenarioSpec spec;
  spec.n_steps = 24;
  spec.step_s = 3600;
  spec.sensors = {"S01"};
  spec.profile = IrradianceProfile::Diurnal;
  spec.sunrise_h = 6;
  spec.sunset_h = 18;
  const auto ds = synth_cloud_scenario(spec, 0);
  CHECK(ds.values(5, 0) == 0.0);
  CHECK(ds.values(6, 0) == 0.0);
  CHECK(ds.values(12, 0) == doctest::Approx(1000.0));
  CHECK(ds.values(9, 0) == doctest::Approx(1000.0 * std::sqrt(0.5)));
  CHECK(ds.values(18, 0) == 0.0);
}

TEST_CASE("regulation csv variants") {
  {
    std::istringstream in("0.5\n-0.5\n0\n");
    const auto s = load_regulation_csv(in);
    CHECK(s.value.values == std::vector<double>{0.5, -0.5, 0.0});
    CHECK_FALSE(s.value.start_time.has_value());
    CHECK(s.value.step_s == 2);
  }
  {
    std::istringstream in("value\n1.2\n-3\n");
    const auto s = load_regulation_csv(in);
    CHECK(s.clamped == 2);
    CHECK(s.value.values == std::vector<double>{1.0, -1.0});
  }
  {
    std::istringstream in("timestamp,value\n2026-06-21T09:00:00Z,0.1\n2026-06-21T09:00:04Z,0.2\n");
    const auto s = load_regulation_csv(in);
    CHECK(s.value.start_time == parse_iso8601("2026-06-21T09:00:00Z"));
    CHECK(s.value.step_s == 4);
  }
  {
    std::istringstream in("0\n0\n0\n0\n");
    CHECK(load_regulation_csv(in).value.values == std::vector<double>(4, 0.0));
  }
  std::istringstream empty("");
  CHECK_THROWS_AS(load_regulation_csv(empty), ValidationError);
  std::istringstream header_only("value\n");
  CHECK_THROWS_AS(load_regulation_csv(header_only), ValidationError);
}

TEST_CASE("synthetic regulation stays in range and is seeded") {
  RegulationSynthSpec spec;
  spec.n_values = 5000;
  const auto a = synth_regulation_signal(spec, 3);
  CHECK(a.values.size() == 5000);
  CHECK(std::all_of(a.values.begin(), a.values.end(), [](double v) { return v >= -1 && v <= 1; }));
  CHECK(synth_regulation_signal(spec, 3).values == a.values);
  CHECK_FALSE(synth_regulation_signal(spec, 4).values == a.values);
}

TEST_CASE("commitment schedule interpolation") {
  CommitmentSchedule s;
  s.breakpoints = {{3600, 100.0}, {7200, 300.0}};
  CHECK(s.at(0) == 100.0);
  CHECK(s.at(5400) == doctest::Approx(200.0));
  CHECK(s.at(9000) == 300.0);
  s.interpolation = CommitmentSchedule::Interpolation::StepHold;
  CHECK(s.at(5400) == 100.0);
  CHECK(s.at(7200) == 300.0);
  s.breakpoints = {{10, 5.0}, {10, 6.0}};
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s.breakpoints = {{10, -5.0}};
  CHECK_THROWS_AS(s.validate(), ConfigError);
}
