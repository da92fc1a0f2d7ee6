#include <doctest.h>

#include <numeric>

#include "pvctl/error.hpp"
#include "pvctl/grouping_control.hpp"

using namespace pvctl;

namespace {

double sum(std::span<const double> v) { return std::accumulate(v.begin(), v.end(), 0.0); }

}  // namespace

TEST_CASE("group order is split evenly regardless of member shading") {
  GroupingConfig cfg{{{0, 1}}};
  const std::vector<double> cap{470, 470};
  const std::vector<double> est{640};
  const auto sp = grouping_step(640, est, cfg, cap);
  CHECK(sp.group_alpha[0] == 1.0);
  CHECK(sp.setpoint_kw[0] == doctest::Approx(320));
  CHECK(sp.setpoint_kw[1] == doctest::Approx(320));
  const std::vector<double> avail{340, 300};
  const auto out = realize_output(sp.setpoint_kw, avail);
  CHECK(out[0] == doctest::Approx(320));
  CHECK(out[1] == doctest::Approx(300));
  CHECK(sum(out) < 640);
}

TEST_CASE("one ratio for every group") {
  GroupingConfig cfg{{{0, 1, 2}, {3, 4}}};
  const std::vector<double> cap(5, 100);
  const std::vector<double> est{300, 100};
  const auto sp = grouping_step(200, est, cfg, cap);
  CHECK(sp.group_alpha[0] == doctest::Approx(0.5));
  CHECK(sp.group_alpha[1] == doctest::Approx(0.5));
  for (double a : sp.member_alpha) CHECK(a == doctest::Approx(0.5));
  CHECK(sp.setpoint_kw[0] == doctest::Approx(50));
  CHECK(sp.setpoint_kw[3] == doctest::Approx(25));
  CHECK(sp.planned_kw == doctest::Approx(200));
}

TEST_CASE("uniform availability makes grouping exact") {
  GroupingConfig cfg{{{0, 1}, {2, 3}}};
  const std::vector<double> cap(4, 470);
  GroupingController ctrl(cfg, cap);
  const std::vector<double> avail(4, 400);
  ctrl.bootstrap(avail);
  const auto& sp = ctrl.step(1200);
  const auto out = realize_output(sp.setpoint_kw, avail);
  CHECK(sum(out) == doctest::Approx(1200));
}

TEST_CASE("desired output above the estimate saturates at alpha 1") {
  GroupingConfig cfg{{{0, 1}}};
  const std::vector<double> cap{100, 300};
  const std::vector<double> est{200};
  const auto sp = grouping_step(500, est, cfg, cap);
  CHECK(sp.group_alpha[0] == 1.0);
  CHECK(sp.setpoint_kw[0] == doctest::Approx(50));
  CHECK(sp.setpoint_kw[1] == doctest::Approx(150));
}

TEST_CASE("a dark group passes through") {
  GroupingConfig cfg{{{0}, {1}}};
  const std::vector<double> cap{100, 100};
  const std::vector<double> est{0, 0};
  const auto sp = grouping_step(50, est, cfg, cap);
  CHECK(sp.group_alpha[0] == 1.0);
  CHECK(sp.setpoint_kw[0] == 0.0);
  CHECK(sp.planned_kw == 0.0);
}

TEST_CASE("controller uses the previous step's availability") {
  GroupingConfig cfg{{{0, 1}}};
  GroupingController ctrl(cfg, {100, 100});
  ctrl.bootstrap(std::vector<double>{100, 100});
  CHECK(ctrl.group_estimates()[0] == 200);
  ctrl.step(150);
  ctrl.observe(std::vector<double>{100, 20});
  CHECK(ctrl.group_estimates()[0] == 120);
  const auto& sp = ctrl.step(150);
  CHECK(sp.setpoint_kw[0] == doctest::Approx(60));
}

TEST_CASE("headroom mode holds back a fraction of the estimate") {
  CHECK(headroom_target(std::vector<double>{600, 400}, 0.2) == doctest::Approx(800));
  GroupingConfig cfg{{{0}, {1}}, 0.25};
  GroupingController ctrl(cfg, {100, 100}, GroupingMode::Headroom);
  ctrl.bootstrap(std::vector<double>{80, 40});
  const auto& sp = ctrl.step(1e9);
  CHECK(sp.planned_kw == doctest::Approx(90));
}

TEST_CASE("grouping config validation") {
  CHECK_THROWS_AS((GroupingConfig{{{0, 1}}}.validate(3)), ConfigError);
  CHECK_THROWS_AS((GroupingConfig{{{0}, {1}}, 1.0}.validate(2)), ConfigError);
  CHECK_NOTHROW((GroupingConfig{{{1}, {0}}}.validate(2)));
  CHECK_THROWS_AS(GroupingController(GroupingConfig{{{0}}}, {100}).step(10), ConfigError);
}
