#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "flowcast/csv.hpp"
#include "flowcast/tensor.hpp"

namespace flowcast::conformal {

// Residual buffer from the latest validation pass and the quantile derived from it.
struct QuantileState {
  std::vector<double> residuals;
  double alpha = 0.1;
  std::optional<double> q_adjusted;
};

// Symmetric band around each point forecast. `width` holds upper - lower as
// constructed (2 * q for conformal bands), so widths are not re-derived from
// rounded bounds.
struct IntervalBatch {
  Tensor lower;
  Tensor upper;
  Tensor width;
  double alpha = 0.1;

  static IntervalBatch from_bounds(Tensor lower, Tensor upper, double alpha);
};

// Index (1-based) of the order statistic used as the conformal quantile:
// ceil((n + 1)(1 - alpha)), clamped to n.
std::size_t conformal_rank(std::size_t n, double alpha);

// Replaces the buffer with `residuals` and recomputes q_adjusted.
QuantileState update_quantile(QuantileState state, std::span<const double> residuals);

// Absolute residuals |forecast - actual|, flattened.
std::vector<double> absolute_residuals(const Tensor& forecast, const Tensor& actual);

IntervalBatch intervals(const Tensor& forecast, const QuantileState& state);

// Fraction of actual values inside the closed intervals.
double picp(const IntervalBatch& batch, const Tensor& actual);

// Mean interval width.
double mpiw(const IntervalBatch& batch);

// One row of the interval export: `sample,station,t,forecast,lower,upper,actual,covered`.
struct IntervalRecord {
  std::size_t sample = 0;
  std::string station;
  csv::Timestamp t;
  double forecast = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double actual = 0.0;
  bool covered = false;
};

void write_intervals_csv(const std::vector<IntervalRecord>& records,
                         const std::filesystem::path& path);
std::vector<IntervalRecord> read_intervals_csv(const std::filesystem::path& path);

}  // namespace flowcast::conformal
