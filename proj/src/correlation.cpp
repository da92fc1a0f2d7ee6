#include "pvctl/correlation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>

#include <fmt/format.h>

#include "csv_util.hpp"
#include "pvctl/error.hpp"

namespace pvctl {

CorrelationMatrix::CorrelationMatrix(std::size_t n, int hour_bucket)
    : n_(n), hour_(hour_bucket), values_(n * n, 0.0) {
  for (std::size_t i = 0; i < n; ++i) values_[i * n + i] = 1.0;
}

void CorrelationMatrix::set(std::size_t i, std::size_t j, double c) {
  if (i == j) return;
  values_[i * n_ + j] = c;
  values_[j * n_ + i] = c;
}

void CorrelationMatrix::check() const {
  for (std::size_t i = 0; i < n_; ++i) {
    if (at(i, i) != 1.0) throw DomainError(fmt::format("diagonal entry {} is {}", i, at(i, i)));
    for (std::size_t j = 0; j < n_; ++j) {
      const double c = at(i, j);
      if (!(c >= -1.0 && c <= 1.0)) throw DomainError(fmt::format("entry ({},{}) = {} out of range", i, j, c));
      if (c != at(j, i)) throw DomainError(fmt::format("asymmetric at ({},{})", i, j));
    }
  }
}

NeighborOrder NeighborOrder::by_id(std::size_t n) {
  NeighborOrder out;
  out.order.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) out.order[i].push_back(j);
  return out;
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size())
    throw DomainError(fmt::format("pearson: length mismatch ({} vs {})", x.size(), y.size()));
  if (x.size() < 2) throw DomainError("pearson: need at least 2 samples");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

CorrelationMatrix correlation_over_rows(const SeriesMatrix& history, std::size_t row_begin,
                                        std::size_t row_end, int hour_bucket) {
  const std::size_t n = history.cols();
  CorrelationMatrix m(n, hour_bucket);
  std::vector<std::vector<double>> cols(n);
  for (std::size_t c = 0; c < n; ++c) {
    cols[c].reserve(row_end - row_begin);
    for (std::size_t r = row_begin; r < row_end; ++r) cols[c].push_back(history(r, c));
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) m.set(i, j, pearson(cols[i], cols[j]));
  return m;
}

const CorrelationMatrix* HourlyCorrelation::find(int hour) const {
  for (const auto& m : matrices)
    if (m.hour_bucket() == hour) return &m;
  return nullptr;
}

HourlyCorrelation build_hourly_matrices(const SeriesMatrix& history, const TimeGrid& grid,
                                        std::int64_t utc_offset_s) {
  if (grid.count != history.rows())
    throw DomainError(fmt::format("time grid has {} samples, history {}", grid.count, history.rows()));
  std::map<int, std::vector<std::size_t>> buckets;
  for (std::size_t r = 0; r < history.rows(); ++r)
    buckets[static_cast<int>(seconds_of_day(grid.at(r), utc_offset_s) / 3600)].push_back(r);

  HourlyCorrelation out;
  for (const auto& [hour, rows] : buckets) {
    if (rows.size() < 2) {
      out.skipped_hours.push_back(hour);
      continue;
    }
    SeriesMatrix sub;
    for (std::size_t r : rows) sub.append_row(history.row(r));
    out.matrices.push_back(correlation_over_rows(sub, 0, sub.rows(), hour));
  }
  return out;
}

CorrelationMatrix mean_matrix(const HourlyCorrelation& hourly, std::size_t n) {
  CorrelationMatrix out(n, 0);
  if (hourly.matrices.empty()) return out;
  const auto count = static_cast<double>(hourly.matrices.size());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      double sum = 0.0;
      for (const auto& m : hourly.matrices) {
        if (m.size() != n) throw DomainError("hourly matrices differ in size");
        sum += m.at(i, j);
      }
      out.set(i, j, std::clamp(sum / count, -1.0, 1.0));
    }
  return out;
}

NeighborOrder neighbor_order(const CorrelationMatrix& matrix) {
  const std::size_t n = matrix.size();
  NeighborOrder out = NeighborOrder::by_id(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::stable_sort(out.order[i].begin(), out.order[i].end(),
                     [&](std::size_t a, std::size_t b) { return matrix.at(i, a) < matrix.at(i, b); });
  }
  return out;
}

double intra_cluster_objective(const CorrelationMatrix& matrix, const Clusters& clusters) {
  double total = 0.0;
  for (const auto& c : clusters)
    for (std::size_t a = 0; a < c.size(); ++a)
      for (std::size_t b = a + 1; b < c.size(); ++b) total += matrix.at(c[a], c[b]);
  return total;
}

namespace {

/// Greedy fill from a given seed pair in cluster 0, then pairwise-swap descent.
Clusters greedy_partition(const CorrelationMatrix& matrix, std::span<const std::size_t> cluster_sizes,
                          std::size_t first, std::size_t second) {
  const std::size_t n = matrix.size();
  const std::size_t k = cluster_sizes.size();
  Clusters clusters(k);
  std::vector<int> owner(n, -1);
  auto place = [&](std::size_t inv, std::size_t c) {
    clusters[c].push_back(inv);
    owner[inv] = static_cast<int>(c);
  };

  place(first, 0);
  if (n > 1 && cluster_sizes[0] >= 2) place(second, 0);

  // Seed the remaining clusters with whichever free inverter is most
  // correlated with everything placed so far.
  for (std::size_t c = 1; c < k; ++c) {
    std::size_t best = n;
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t u = 0; u < n; ++u) {
      if (owner[u] >= 0) continue;
      double score = 0.0;
      for (std::size_t v = 0; v < n; ++v)
        if (owner[v] >= 0) score += matrix.at(u, v);
      if (score > best_score) best = u, best_score = score;
    }
    place(best, c);
  }

  auto cost = [&](std::size_t u, std::size_t c) {
    double s = 0.0;
    for (std::size_t m : clusters[c]) s += matrix.at(u, m);
    return s;
  };

  for (std::size_t placed = std::count_if(owner.begin(), owner.end(), [](int o) { return o >= 0; });
       placed < n; ++placed) {
    std::size_t bu = n, bc = k;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t u = 0; u < n; ++u) {
      if (owner[u] >= 0) continue;
      for (std::size_t c = 0; c < k; ++c) {
        if (clusters[c].size() >= cluster_sizes[c]) continue;
        const double v = cost(u, c);
        if (v < best) best = v, bu = u, bc = c;
      }
    }
    place(bu, bc);
  }

  // Best-improvement pairwise swaps until no swap lowers the objective.
  constexpr double kMinGain = 1e-12;
  for (std::size_t pass = 0; pass < n * n; ++pass) {
    double best_gain = kMinGain;
    std::size_t sa = n, sb = n;
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t b = a + 1; b < n; ++b) {
        const auto ca = static_cast<std::size_t>(owner[a]);
        const auto cb = static_cast<std::size_t>(owner[b]);
        if (ca == cb) continue;
        const double before = cost(a, ca) - 1.0 + cost(b, cb) - 1.0;
        const double after = cost(a, cb) - matrix.at(a, b) + cost(b, ca) - matrix.at(a, b);
        const double gain = before - after;
        if (gain > best_gain) best_gain = gain, sa = a, sb = b;
      }
    }
    if (sa == n) break;
    const auto ca = static_cast<std::size_t>(owner[sa]);
    const auto cb = static_cast<std::size_t>(owner[sb]);
    std::replace(clusters[ca].begin(), clusters[ca].end(), sa, sb);
    std::replace(clusters[cb].begin(), clusters[cb].end(), sb, sa);
    owner[sa] = static_cast<int>(cb);
    owner[sb] = static_cast<int>(ca);
  }

  for (auto& c : clusters) std::sort(c.begin(), c.end());
  return clusters;
}

}  // namespace

Clusters cluster_assign(const CorrelationMatrix& matrix, std::span<const std::size_t> cluster_sizes) {
  const std::size_t n = matrix.size();
  const std::size_t total = std::accumulate(cluster_sizes.begin(), cluster_sizes.end(), std::size_t{0});
  if (total != n) throw ConfigError(fmt::format("cluster sizes sum to {} for {} inverters", total, n));
  if (std::find(cluster_sizes.begin(), cluster_sizes.end(), std::size_t{0}) != cluster_sizes.end())
    throw ConfigError("cluster sizes must be positive");
  if (n == 1) return {{0}};

  auto partner = [&](std::size_t i) {
    std::size_t best = i == 0 ? 1 : 0;
    for (std::size_t j = 0; j < n; ++j)
      if (j != i && matrix.at(i, j) < matrix.at(i, best)) best = j;
    return best;
  };

  // Primary start: the globally least-correlated pair seeds cluster 0.
  std::size_t bi = 0, bj = 1;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (matrix.at(i, j) < matrix.at(bi, bj)) bi = i, bj = j;
  Clusters best = greedy_partition(matrix, cluster_sizes, bi, bj);
  double best_obj = intra_cluster_objective(matrix, best);

  // Further starts from every inverter and its least-correlated partner.
  for (std::size_t i = 0; i < n; ++i) {
    auto candidate = greedy_partition(matrix, cluster_sizes, i, partner(i));
    const double obj = intra_cluster_objective(matrix, candidate);
    if (obj < best_obj - 1e-12) best = std::move(candidate), best_obj = obj;
  }
  return best;
}

void write_correlation_csv(const CorrelationMatrix& matrix, std::ostream& out) {
  for (std::size_t i = 0; i < matrix.size(); ++i) {
    for (std::size_t j = 0; j < matrix.size(); ++j) {
      if (j > 0) out << ',';
      out << detail::format_double(matrix.at(i, j));
    }
    out << '\n';
  }
}

HourlyCorrelationModel::HourlyCorrelationModel(std::size_t n_inverters, int window_days,
                                               std::int64_t utc_offset_s,
                                               std::optional<HourlyCorrelation> training)
    : n_(n_inverters),
      window_days_(window_days),
      utc_offset_s_(utc_offset_s),
      training_(std::move(training)),
      history_(0, n_inverters),
      matrix_(n_inverters, 0),
      order_(NeighborOrder::by_id(n_inverters)) {
  if (window_days < 0) throw ConfigError("correlation window_days must be non-negative");
}

void HourlyCorrelationModel::record(Timestamp ts, std::span<const double> impp_estimates) {
  if (impp_estimates.size() != n_) throw DomainError("correlation model: wrong inverter count");
  stamps_.push_back(ts);
  history_.append_row(impp_estimates);
}

const NeighborOrder& HourlyCorrelationModel::order_for(Timestamp ts) {
  const std::int64_t local = ts + utc_offset_s_;
  const std::int64_t hour_index = local >= 0 ? local / 3600 : (local - 3599) / 3600;
  if (!hour_index_ || *hour_index_ != hour_index) {
    hour_index_ = hour_index;
    prune(ts);
    rebuild(hour_index);
  }
  return order_;
}

void HourlyCorrelationModel::rebuild(std::int64_t hour_index) {
  const int hour = static_cast<int>(((hour_index % 24) + 24) % 24);
  const Timestamp hour_start = hour_index * 3600 - utc_offset_s_;

  auto rows_between = [&](Timestamp lo, Timestamp hi) {
    const auto b = std::lower_bound(stamps_.begin(), stamps_.end(), lo) - stamps_.begin();
    const auto e = std::lower_bound(stamps_.begin(), stamps_.end(), hi) - stamps_.begin();
    return std::pair{static_cast<std::size_t>(b), static_cast<std::size_t>(e)};
  };

  SeriesMatrix same_hour(0, n_);
  for (int d = window_days_; d >= 1; --d) {
    const Timestamp lo = hour_start - static_cast<Timestamp>(d) * kSecondsPerDay;
    const auto [b, e] = rows_between(lo, lo + 3600);
    for (std::size_t r = b; r < e; ++r) same_hour.append_row(history_.row(r));
  }

  if (same_hour.rows() >= 2) {
    matrix_ = correlation_over_rows(same_hour, 0, same_hour.rows(), hour);
    source_ = Source::History;
  } else if (const CorrelationMatrix* m = training_ ? training_->find(hour) : nullptr;
             m != nullptr && m->size() == n_) {
    matrix_ = *m;
    source_ = Source::Training;
  } else if (const auto [b, e] = rows_between(hour_start - 3600, hour_start); e - b >= 2) {
    matrix_ = correlation_over_rows(history_, b, e, hour);
    source_ = Source::PreviousHour;
  } else {
    matrix_ = CorrelationMatrix(n_, hour);
    source_ = Source::Neutral;
  }
  order_ = neighbor_order(matrix_);
}

void HourlyCorrelationModel::prune(Timestamp now) {
  const Timestamp keep_from = now - static_cast<Timestamp>(window_days_ + 1) * kSecondsPerDay;
  const auto cut = static_cast<std::size_t>(std::lower_bound(stamps_.begin(), stamps_.end(), keep_from) -
                                            stamps_.begin());
  if (cut < static_cast<std::size_t>(kSecondsPerDay)) return;
  SeriesMatrix kept(0, n_);
  for (std::size_t r = cut; r < history_.rows(); ++r) kept.append_row(history_.row(r));
  history_ = std::move(kept);
  stamps_.erase(stamps_.begin(), stamps_.begin() + static_cast<std::ptrdiff_t>(cut));
}

}  // namespace pvctl
