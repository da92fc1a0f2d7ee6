#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "pvctl/correlation.hpp"
#include "pvctl/error.hpp"
#include "support/oracles.hpp"

using namespace pvctl;

namespace {

CorrelationMatrix from_rows(const std::vector<std::vector<double>>& rows) {
  CorrelationMatrix m(rows.size(), 0);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = i + 1; j < rows.size(); ++j) m.set(i, j, rows[i][j]);
  return m;
}

bool is_partition(const Clusters& c, std::size_t n) {
  std::vector<int> seen(n, 0);
  for (const auto& g : c)
    for (auto m : g) {
      if (m >= n) return false;
      ++seen[m];
    }
  return std::all_of(seen.begin(), seen.end(), [](int s) { return s == 1; });
}

}  // namespace

TEST_CASE("pearson examples") {
  const std::vector<double> x{1, 2, 3};
  CHECK(pearson(x, x) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(pearson(x, std::vector<double>{3, 2, 1}) == doctest::Approx(-1.0).epsilon(1e-15));
  // 3 / sqrt(2 * 42/9)
  CHECK(pearson(x, std::vector<double>{1, 2, 4}) == doctest::Approx(3.0 / std::sqrt(84.0 / 9.0)).epsilon(1e-14));
  CHECK(pearson(x, std::vector<double>{1, 2, 4}) == doctest::Approx(0.982).epsilon(1e-3));
}

TEST_CASE("pearson edge cases") {
  CHECK(pearson(std::vector<double>{0, 0, 0}, std::vector<double>{1, 2, 3}) == 0.0);
  CHECK_THROWS_AS(pearson(std::vector<double>{1, 2}, std::vector<double>{1, 2, 3}), DomainError);
  CHECK_THROWS_AS(pearson(std::vector<double>{1}, std::vector<double>{1}), DomainError);
}

TEST_CASE("pearson agrees with the definitional oracle") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> z(0.0, 1.0);
  for (int k = 0; k < 200; ++k) {
    const std::size_t n = 2 + k % 50;
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = 100 + 30 * z(rng);
      y[i] = 0.3 * x[i] + 10 * z(rng);
    }
    CHECK(std::abs(pearson(x, y) - oracle::pearson(x, y)) <= 1e-12);
  }
}

TEST_CASE("matrix invariants are enforced") {
  CorrelationMatrix m(3, 7);
  CHECK(m.at(1, 1) == 1.0);
  CHECK(m.at(0, 2) == 0.0);
  m.set(0, 2, 0.4);
  CHECK(m.at(2, 0) == 0.4);
  m.set(1, 1, 0.3);
  CHECK(m.at(1, 1) == 1.0);
  CHECK_NOTHROW(m.check());
  m.set(0, 1, 1.5);
  CHECK_THROWS_AS(m.check(), DomainError);
}

TEST_CASE("hourly matrices of identical and opposed columns") {
  SeriesMatrix h(0, 3);
  for (int t = 0; t < 3600; ++t) {
    const double v = std::sin(t * 0.01);
    const std::vector<double> row{v, v, -v};
    h.append_row(row);
  }
  const auto hourly = build_hourly_matrices(h, TimeGrid{0, 1, 3600});
  REQUIRE(hourly.matrices.size() == 1);
  const auto& m = hourly.matrices[0];
  CHECK(m.hour_bucket() == 0);
  CHECK(m.at(0, 1) == doctest::Approx(1.0));
  CHECK(m.at(0, 2) == doctest::Approx(-1.0));
  CHECK(m.at(2, 2) == 1.0);
}

TEST_CASE("hourly buckets follow local time and skip thin hours") {
  SeriesMatrix h(0, 2);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> z;
  for (int t = 0; t < 7201; ++t) {
    const std::vector<double> row{z(rng), z(rng)};
    h.append_row(row);
  }
  const auto hourly = build_hourly_matrices(h, TimeGrid{0, 1, 7201}, 3 * 3600);
  REQUIRE(hourly.matrices.size() == 2);
  CHECK(hourly.matrices[0].hour_bucket() == 3);
  CHECK(hourly.matrices[1].hour_bucket() == 4);
  CHECK(hourly.skipped_hours == std::vector<int>{5});
  CHECK(hourly.find(4) == &hourly.matrices[1]);
  CHECK(hourly.find(9) == nullptr);
  for (const auto& m : hourly.matrices) CHECK_NOTHROW(m.check());
}

TEST_CASE("neighbour order examples") {
  const auto m = from_rows({{1, 0.9, -0.2, 0.5}, {0.9, 1, 0, 0}, {-0.2, 0, 1, 0}, {0.5, 0, 0, 1}});
  CHECK(neighbor_order(m).of(0) == std::vector<std::size_t>{2, 3, 1});
  const auto flat = neighbor_order(CorrelationMatrix(4, 0));
  CHECK(flat.of(2) == std::vector<std::size_t>{0, 1, 3});
  CHECK(NeighborOrder::by_id(3).of(1) == std::vector<std::size_t>{0, 2});
}

TEST_CASE("neighbour order is equivariant under relabelling") {
  std::mt19937_64 rng(8);
  const auto m = oracle::random_correlation(6, 200, rng);
  std::vector<std::size_t> perm{3, 0, 5, 1, 4, 2};
  CorrelationMatrix p(6, 0);
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = i + 1; j < 6; ++j) p.set(perm[i], perm[j], m.at(i, j));
  const auto a = neighbor_order(m);
  const auto b = neighbor_order(p);
  for (std::size_t i = 0; i < 6; ++i) {
    std::vector<std::size_t> mapped;
    for (auto j : a.of(i)) mapped.push_back(perm[j]);
    CHECK(b.of(perm[i]) == mapped);
  }
}

TEST_CASE("two correlated pairs are split across clusters") {
  const auto m = from_rows({{1, 1, 0, 0}, {1, 1, 0, 0}, {0, 0, 1, 1}, {0, 0, 1, 1}});
  const std::vector<std::size_t> sizes{2, 2};
  const auto c = cluster_assign(m, sizes);
  CHECK(c == Clusters{{0, 2}, {1, 3}});
  CHECK(intra_cluster_objective(m, c) == 0.0);
}

TEST_CASE("six six five partition covers every inverter once") {
  std::mt19937_64 rng(2);
  const auto m = oracle::random_correlation(17, 300, rng);
  const std::vector<std::size_t> sizes{6, 6, 5};
  const auto c = cluster_assign(m, sizes);
  REQUIRE(c.size() == 3);
  CHECK(c[0].size() == 6);
  CHECK(c[1].size() == 6);
  CHECK(c[2].size() == 5);
  CHECK(is_partition(c, 17));
  for (const auto& g : c) CHECK(std::is_sorted(g.begin(), g.end()));
}

TEST_CASE("clustering of the identity is deterministic") {
  const std::vector<std::size_t> sizes{2, 2, 1};
  const auto a = cluster_assign(CorrelationMatrix(5, 0), sizes);
  CHECK(is_partition(a, 5));
  CHECK(cluster_assign(CorrelationMatrix(5, 0), sizes) == a);
}

TEST_CASE("cluster size mismatch is a configuration error") {
  const std::vector<std::size_t> bad{2, 2};
  CHECK_THROWS_AS(cluster_assign(CorrelationMatrix(5, 0), bad), ConfigError);
  const std::vector<std::size_t> empty{5, 0};
  CHECK_THROWS_AS(cluster_assign(CorrelationMatrix(5, 0), empty), ConfigError);
}

TEST_CASE("greedy clustering beats random partitions") {
  std::mt19937_64 rng(21);
  for (std::size_t n : {6u, 11u, 17u}) {
    const auto m = oracle::random_correlation(n, 400, rng);
    std::vector<std::size_t> sizes{n / 3 + (n % 3 > 0), n / 3 + (n % 3 > 1), n / 3};
    const double greedy = intra_cluster_objective(m, cluster_assign(m, sizes));
    std::vector<std::size_t> ids(n);
    std::iota(ids.begin(), ids.end(), 0);
    int worse = 0;
    for (int k = 0; k < 1000; ++k) {
      std::shuffle(ids.begin(), ids.end(), rng);
      Clusters c;
      std::size_t pos = 0;
      for (auto s : sizes) {
        c.emplace_back(ids.begin() + static_cast<std::ptrdiff_t>(pos),
                       ids.begin() + static_cast<std::ptrdiff_t>(pos + s));
        pos += s;
      }
      if (intra_cluster_objective(m, c) < greedy - 1e-12) ++worse;
    }
    CHECK(worse == 0);
  }
}

TEST_CASE("clustering finds a zero-correlation optimum exactly") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> pos(0.2, 0.9);
  for (int trial = 0; trial < 50; ++trial) {
    // Members of the hidden partition are mutually uncorrelated, all other pairs positive.
    std::vector<std::size_t> label{0, 0, 1, 1, 2, 2};
    std::shuffle(label.begin(), label.end(), rng);
    CorrelationMatrix m(6, 0);
    for (std::size_t i = 0; i < 6; ++i)
      for (std::size_t j = i + 1; j < 6; ++j) m.set(i, j, label[i] == label[j] ? 0.0 : pos(rng));
    const std::vector<std::size_t> sizes{2, 2, 2};
    const auto c = cluster_assign(m, sizes);
    CHECK(intra_cluster_objective(m, c) == 0.0);
    for (const auto& g : c) CHECK(label[g[0]] == label[g[1]]);
  }
}

TEST_CASE("mean matrix averages hourly coefficients") {
  HourlyCorrelation h;
  CorrelationMatrix a(2, 9), b(2, 10);
  a.set(0, 1, 0.2);
  b.set(0, 1, -0.6);
  h.matrices = {a, b};
  CHECK(mean_matrix(h, 2).at(0, 1) == doctest::Approx(-0.2));
  CHECK(mean_matrix({}, 3).at(0, 1) == 0.0);
}

TEST_CASE("correlation csv has n rows of n values") {
  CorrelationMatrix m(2, 0);
  m.set(0, 1, -0.25);
  std::ostringstream out;
  write_correlation_csv(m, out);
  CHECK(out.str() == "1,-0.25\n-0.25,1\n");
}

TEST_CASE("hourly model falls back from history to training to previous hour to identity") {
  const std::size_t n = 3;
  HourlyCorrelation training;
  CorrelationMatrix t(n, 1);
  t.set(0, 1, -0.9);
  training.matrices = {t};
  HourlyCorrelationModel model(n, 1, 0, training);

  model.order_for(0);
  CHECK(model.source() == HourlyCorrelationModel::Source::Neutral);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> z;
  for (Timestamp ts = 0; ts < 3600; ++ts) {
    const double common = z(rng);
    const std::vector<double> row{common, common + 0.01 * z(rng), z(rng)};
    model.record(ts, row);
  }
  model.order_for(3600);
  CHECK(model.source() == HourlyCorrelationModel::Source::Training);
  CHECK(model.order_for(3601).of(0).front() == 1);

  for (Timestamp ts = 3600; ts < 7200; ++ts) {
    const std::vector<double> row{z(rng), z(rng), z(rng)};
    model.record(ts, row);
  }
  model.order_for(7200);
  CHECK(model.source() == HourlyCorrelationModel::Source::PreviousHour);

  for (Timestamp ts = 7200; ts < kSecondsPerDay; ts += 60) {
    const std::vector<double> row{z(rng), z(rng), z(rng)};
    model.record(ts, row);
  }
  model.order_for(kSecondsPerDay);
  CHECK(model.source() == HourlyCorrelationModel::Source::History);
  CHECK(model.matrix().at(0, 1) > 0.9);
  CHECK_NOTHROW(model.matrix().check());
}
