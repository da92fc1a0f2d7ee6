#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "pvctl/series_matrix.hpp"
#include "pvctl/time_grid.hpp"

namespace pvctl {

/// Symmetric n x n Pearson matrix for one hour-of-day bucket. The diagonal
/// is exactly 1 and each off-diagonal pair is computed once.
class CorrelationMatrix {
 public:
  CorrelationMatrix() = default;
  /// Identity: no information about co-variation.
  CorrelationMatrix(std::size_t n, int hour_bucket);

  std::size_t size() const noexcept { return n_; }
  int hour_bucket() const noexcept { return hour_; }
  double at(std::size_t i, std::size_t j) const { return values_[i * n_ + j]; }
  /// Writes both (i,j) and (j,i). Ignored on the diagonal.
  void set(std::size_t i, std::size_t j, double c);

  /// Throws DomainError unless symmetric, unit diagonal, entries in [-1, 1].
  void check() const;

 private:
  std::size_t n_ = 0;
  int hour_ = 0;
  std::vector<double> values_;
};

/// Per inverter: every other inverter, least correlated first, ties by id.
struct NeighborOrder {
  std::vector<std::vector<std::size_t>> order;

  const std::vector<std::size_t>& of(std::size_t inverter) const { return order[inverter]; }
  std::size_t size() const noexcept { return order.size(); }

  /// Ascending id order for every inverter.
  static NeighborOrder by_id(std::size_t n);
};

using Clusters = std::vector<std::vector<std::size_t>>;

/// Pearson's linear correlation coefficient. Returns 0 when either series
/// is constant. Throws DomainError on length mismatch or fewer than 2 samples.
double pearson(std::span<const double> x, std::span<const double> y);

/// Matrix over rows [row_begin, row_end) of `history`.
CorrelationMatrix correlation_over_rows(const SeriesMatrix& history, std::size_t row_begin,
                                        std::size_t row_end, int hour_bucket);

struct HourlyCorrelation {
  std::vector<CorrelationMatrix> matrices;  // ascending hour bucket
  std::vector<int> skipped_hours;           // buckets with fewer than 2 samples

  const CorrelationMatrix* find(int hour) const;
};

/// One matrix per hour-of-day bucket present in `history` ([timestep x inverter]).
HourlyCorrelation build_hourly_matrices(const SeriesMatrix& history, const TimeGrid& grid,
                                        std::int64_t utc_offset_s = 0);

/// Element-wise mean of every matrix in `hourly`; the identity when it is empty.
CorrelationMatrix mean_matrix(const HourlyCorrelation& hourly, std::size_t n);

NeighborOrder neighbor_order(const CorrelationMatrix& matrix);

/// Sum over clusters of the pairwise coefficients between members.
double intra_cluster_objective(const CorrelationMatrix& matrix, const Clusters& clusters);

/// Greedy low-correlation partition into clusters of the given sizes with
/// pairwise-swap refinement, repeated from several seed pairs; the lowest
/// objective wins. Members are listed in ascending id. Throws ConfigError
/// when the sizes do not sum to the matrix size.
Clusters cluster_assign(const CorrelationMatrix& matrix, std::span<const std::size_t> cluster_sizes);

/// n rows of n comma-separated coefficients.
void write_correlation_csv(const CorrelationMatrix& matrix, std::ostream& out);

/// Trailing-window correlation model consulted by the hierarchical
/// controller. Refreshed at most once per simulated hour from, in order of
/// preference: same-hour estimated-IMPP history of the preceding
/// `window_days` days, a training matrix for the hour, the just-completed
/// hour of estimated-IMPP history, or the identity.
class HourlyCorrelationModel {
 public:
  enum class Source { History, Training, PreviousHour, Neutral };

  HourlyCorrelationModel(std::size_t n_inverters, int window_days, std::int64_t utc_offset_s,
                         std::optional<HourlyCorrelation> training = std::nullopt);

  void record(Timestamp ts, std::span<const double> impp_estimates);
  /// Current order, rebuilt when `ts` falls in a new hour.
  const NeighborOrder& order_for(Timestamp ts);

  const CorrelationMatrix& matrix() const noexcept { return matrix_; }
  Source source() const noexcept { return source_; }

 private:
  void rebuild(std::int64_t hour_index);
  void prune(Timestamp now);

  std::size_t n_;
  int window_days_;
  std::int64_t utc_offset_s_;
  std::optional<HourlyCorrelation> training_;
  std::vector<Timestamp> stamps_;
  SeriesMatrix history_;
  std::optional<std::int64_t> hour_index_;
  CorrelationMatrix matrix_;
  NeighborOrder order_;
  Source source_ = Source::Neutral;
};

}  // namespace pvctl
