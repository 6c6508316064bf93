#include "flowcast/conformal.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "flowcast/errors.hpp"

namespace flowcast::conformal {

IntervalBatch IntervalBatch::from_bounds(Tensor lower, Tensor upper, double alpha) {
  require_same_shape(lower, upper, "interval bounds");
  IntervalBatch out;
  out.width = upper;
  for (std::size_t i = 0; i < out.width.size(); ++i) {
    if (lower[i] > upper[i]) throw DomainError("interval lower bound exceeds upper bound");
    out.width[i] = upper[i] - lower[i];
  }
  out.lower = std::move(lower);
  out.upper = std::move(upper);
  out.alpha = alpha;
  return out;
}

std::size_t conformal_rank(std::size_t n, double alpha) {
  if (n == 0) throw StateError("conformal rank of an empty residual set");
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("alpha must lie in (0, 1)");
  // The slack absorbs representation error when (n + 1)(1 - alpha) is an integer.
  const double k = std::ceil(static_cast<double>(n + 1) * (1.0 - alpha) - 1e-9);
  const auto rank = static_cast<std::size_t>(std::max(1.0, k));
  return std::min(rank, n);
}

QuantileState update_quantile(QuantileState state, std::span<const double> residuals) {
  if (residuals.empty()) throw StateError("cannot update quantile from an empty residual set");
  for (double r : residuals) {
    if (!(r >= 0.0) || !std::isfinite(r)) {
      throw DomainError("residuals must be finite and nonnegative");
    }
  }
  state.residuals.assign(residuals.begin(), residuals.end());
  std::vector<double> sorted = state.residuals;
  const std::size_t k = conformal_rank(sorted.size(), state.alpha);
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(k - 1), sorted.end());
  state.q_adjusted = sorted[k - 1];
  return state;
}

std::vector<double> absolute_residuals(const Tensor& forecast, const Tensor& actual) {
  require_same_shape(forecast, actual, "residuals");
  std::vector<double> out(forecast.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::abs(forecast[i] - actual[i]);
  return out;
}

IntervalBatch intervals(const Tensor& forecast, const QuantileState& state) {
  if (!state.q_adjusted) throw StateError("q_adjusted is undefined; update the quantile first");
  const double q = *state.q_adjusted;
  IntervalBatch out;
  out.alpha = state.alpha;
  out.lower = forecast;
  out.upper = forecast;
  out.width = forecast;
  for (std::size_t i = 0; i < forecast.size(); ++i) {
    out.lower[i] = forecast[i] - q;
    out.upper[i] = forecast[i] + q;
    out.width[i] = 2.0 * q;
  }
  return out;
}

double picp(const IntervalBatch& batch, const Tensor& actual) {
  require_same_shape(batch.lower, actual, "picp");
  if (actual.empty()) throw SizeError("picp of an empty batch");
  std::size_t covered = 0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    if (batch.lower[i] <= actual[i] && actual[i] <= batch.upper[i]) ++covered;
  }
  return static_cast<double>(covered) / static_cast<double>(actual.size());
}

double mpiw(const IntervalBatch& batch) {
  if (batch.width.empty()) throw SizeError("mpiw of an empty batch");
  // Running mean: exact when every width is equal.
  double mean = 0.0;
  for (std::size_t i = 0; i < batch.width.size(); ++i) {
    mean += (batch.width[i] - mean) / static_cast<double>(i + 1);
  }
  return mean;
}

void write_intervals_csv(const std::vector<IntervalRecord>& records,
                         const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out << "sample,station,t,forecast,lower,upper,actual,covered\n";
  for (const auto& r : records) {
    out << r.sample << ',' << r.station << ',' << csv::format_timestamp(r.t) << ','
        << csv::format_double(r.forecast) << ',' << csv::format_double(r.lower) << ','
        << csv::format_double(r.upper) << ',' << csv::format_double(r.actual) << ','
        << (r.covered ? 1 : 0) << '\n';
  }
  if (!out) throw InputError("failed writing " + path.string());
}

std::vector<IntervalRecord> read_intervals_csv(const std::filesystem::path& path) {
  const auto table = csv::read(path);
  csv::require_header(table,
                      {"sample", "station", "t", "forecast", "lower", "upper", "actual", "covered"});
  std::vector<IntervalRecord> out;
  out.reserve(table.rows.size());
  for (const auto& row : table.rows) {
    IntervalRecord r;
    r.sample = csv::parse_uint(table, row, 0);
    r.station = row.fields[1];
    const auto t = csv::parse_timestamp(row.fields[2]);
    if (!t) throw ParseError(table.source, row.line, "bad timestamp '" + row.fields[2] + "'");
    r.t = *t;
    r.forecast = csv::parse_double(table, row, 3);
    r.lower = csv::parse_double(table, row, 4);
    r.upper = csv::parse_double(table, row, 5);
    r.actual = csv::parse_double(table, row, 6);
    r.covered = csv::parse_uint(table, row, 7) != 0;
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace flowcast::conformal
