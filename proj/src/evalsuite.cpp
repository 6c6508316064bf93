#include "flowcast/evalsuite.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "flowcast/csv.hpp"
#include "flowcast/errors.hpp"
#include "flowcast/hash.hpp"
#include "flowcast/rng.hpp"

namespace flowcast::eval {

MetricReport mae_rmse(const Tensor& actual, const Tensor& forecast, Units units) {
  require_same_shape(actual, forecast, "mae_rmse");
  if (actual.empty()) throw SizeError("mae_rmse of an empty tensor");
  double abs_sum = 0.0, sq_sum = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    const double e = actual[i] - forecast[i];
    abs_sum += std::abs(e);
    sq_sum += e * e;
  }
  const auto n = static_cast<double>(actual.size());
  return {abs_sum / n, std::sqrt(sq_sum / n), actual.size(), units};
}

// ---------------------------------------------------------------------------

namespace {

std::size_t week_slot(data::Timestamp t) {
  return data::weekday_of(t) * data::kIntervalsPerDay + data::slot_of_day(t);
}

data::Timestamp step_time(const data::WindowedDataset& ds, std::size_t k, std::size_t h) {
  return ds.target_times[k] + std::chrono::duration_cast<std::chrono::seconds>(data::kInterval) * static_cast<long>(h);
}

void require_windows(const data::WindowedDataset& ds, const char* who) {
  if (ds.size() == 0) throw SizeError(std::string(who) + ": empty dataset");
  if (ds.target_times.size() != ds.size()) throw StructuralError(std::string(who) + ": dataset lacks target times");
}

}  // namespace

HistoricalAverage::HistoricalAverage(const data::WindowedDataset& train) {
  require_windows(train, "HA");
  stations_ = train.stations();
  sums_.assign(stations_ * kSlots, 0.0);
  counts_.assign(stations_ * kSlots, 0.0);
  std::vector<double> total(stations_, 0.0), n(stations_, 0.0);
  // Each frame row appears as the first target of exactly one window, so using
  // horizon step 0 counts every training observation once.
  for (std::size_t k = 0; k < train.size(); ++k) {
    const std::size_t slot = week_slot(train.target_times[k]);
    for (std::size_t s = 0; s < stations_; ++s) {
      const double y = train.targets(k, 0, s);
      sums_[s * kSlots + slot] += y;
      counts_[s * kSlots + slot] += 1.0;
      total[s] += y;
      n[s] += 1.0;
    }
  }
  station_mean_.resize(stations_);
  for (std::size_t s = 0; s < stations_; ++s) station_mean_[s] = total[s] / n[s];
}

double HistoricalAverage::mean_for(std::size_t station, data::Timestamp t) const {
  const std::size_t i = station * kSlots + week_slot(t);
  return counts_[i] > 0.0 ? sums_[i] / counts_[i] : station_mean_[station];
}

Tensor HistoricalAverage::forecast(const data::WindowedDataset& ds) const {
  require_windows(ds, "HA");
  if (ds.stations() != stations_) throw StructuralError("HA: station count differs from training");
  Tensor out({ds.size(), ds.horizon, stations_});
  for (std::size_t k = 0; k < ds.size(); ++k)
    for (std::size_t h = 0; h < ds.horizon; ++h) {
      const auto t = step_time(ds, k, h);
      for (std::size_t s = 0; s < stations_; ++s) out(k, h, s) = mean_for(s, t);
    }
  return out;
}

// ---------------------------------------------------------------------------

std::vector<double> fit_ar_coefficients(const std::vector<std::vector<double>>& lags,
                                        const std::vector<double>& targets) {
  if (lags.empty() || lags.size() != targets.size()) throw SizeError("AR fit needs matching rows");
  const std::size_t p = lags.front().size();
  const std::size_t m = p + 1;
  // Normal equations X'X beta = X'y with X = [1, lags].
  std::vector<double> xtx(m * m, 0.0), xty(m, 0.0), row(m);
  for (std::size_t r = 0; r < lags.size(); ++r) {
    row[0] = 1.0;
    std::copy(lags[r].begin(), lags[r].end(), row.begin() + 1);
    for (std::size_t i = 0; i < m; ++i) {
      xty[i] += row[i] * targets[r];
      for (std::size_t j = 0; j <= i; ++j) xtx[i * m + j] += row[i] * row[j];
    }
  }
  double diag_max = 0.0;
  for (std::size_t i = 0; i < m; ++i) diag_max = std::max(diag_max, xtx[i * m + i]);

  // Cholesky, lower triangle in place.
  std::vector<double> l(m * m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double s = xtx[i * m + j];
      for (std::size_t k = 0; k < j; ++k) s -= l[i * m + k] * l[j * m + k];
      if (i == j) {
        if (!(s > 1e-12 * std::max(diag_max, 1.0))) throw FitError("AR normal equations are singular");
        l[i * m + i] = std::sqrt(s);
      } else {
        l[i * m + j] = s / l[j * m + j];
      }
    }
  }
  std::vector<double> z(m), beta(m);
  for (std::size_t i = 0; i < m; ++i) {
    double s = xty[i];
    for (std::size_t k = 0; k < i; ++k) s -= l[i * m + k] * z[k];
    z[i] = s / l[i * m + i];
  }
  for (std::size_t i = m; i-- > 0;) {
    double s = z[i];
    for (std::size_t k = i + 1; k < m; ++k) s -= l[k * m + i] * beta[k];
    beta[i] = s / l[i * m + i];
  }
  return beta;
}

AutoRegressive::AutoRegressive(const data::WindowedDataset& train, std::size_t order) : order_(order) {
  require_windows(train, "AR");
  if (order == 0 || order > train.look_back) {
    throw DomainError("AR order must be between 1 and the look-back length");
  }
  const std::size_t n = train.stations();
  const std::size_t L = train.look_back;
  coef_.resize(n);
  for (std::size_t s = 0; s < n; ++s) {
    std::vector<std::vector<double>> lags(train.size(), std::vector<double>(order));
    std::vector<double> y(train.size());
    for (std::size_t k = 0; k < train.size(); ++k) {
      for (std::size_t j = 0; j < order; ++j) lags[k][j] = train.inputs(k, L - 1 - j, s);
      y[k] = train.targets(k, 0, s);
    }
    try {
      coef_[s] = fit_ar_coefficients(lags, y);
    } catch (const FitError&) {
      fallback_stations_.push_back(s);
    }
  }
  if (!fallback_stations_.empty()) fallback_ = std::make_unique<HistoricalAverage>(train);
}

Tensor AutoRegressive::forecast(const data::WindowedDataset& ds) const {
  require_windows(ds, "AR");
  if (ds.stations() != coef_.size()) throw StructuralError("AR: station count differs from training");
  if (ds.look_back < order_) throw StructuralError("AR: look-back shorter than the model order");
  const std::size_t n = coef_.size();
  Tensor out({ds.size(), ds.horizon, n});
  std::vector<double> hist;
  for (std::size_t s = 0; s < n; ++s) {
    const bool fallback = std::ranges::find(fallback_stations_, s) != fallback_stations_.end();
    for (std::size_t k = 0; k < ds.size(); ++k) {
      if (fallback) {
        for (std::size_t h = 0; h < ds.horizon; ++h) out(k, h, s) = fallback_->mean_for(s, step_time(ds, k, h));
        continue;
      }
      hist.clear();
      for (std::size_t l = 0; l < ds.look_back; ++l) hist.push_back(ds.inputs(k, l, s));
      for (std::size_t h = 0; h < ds.horizon; ++h) {
        double y = coef_[s][0];
        for (std::size_t j = 0; j < order_; ++j) y += coef_[s][j + 1] * hist[hist.size() - 1 - j];
        out(k, h, s) = y;
        hist.push_back(y);
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

FeedForwardModel::FeedForwardModel(std::size_t stations, std::size_t look_back, std::size_t horizon,
                                   std::size_t hidden, std::uint64_t seed)
    : stations_(stations), look_back_(look_back), horizon_(horizon) {
  if (stations == 0 || look_back == 0 || horizon == 0 || hidden == 0) {
    throw DomainError("FNN dimensions must be positive");
  }
  Rng rng(seed);
  hidden_ = nn::init_dense(stations * look_back, hidden, rng);
  out_ = nn::init_dense(hidden, stations * horizon, rng);
}

std::vector<nn::ParamRef> FeedForwardModel::parameters() {
  return {{"hidden.weight", &hidden_.weight},
          {"hidden.bias", &hidden_.bias},
          {"out.weight", &out_.weight},
          {"out.bias", &out_.bias}};
}

void FeedForwardModel::predict_sample(std::span<const double> window, std::span<double> out) const {
  std::vector<double> h(hidden_.bias.size());
  nn::dense_forward(hidden_, window, h);
  for (double& v : h) v = std::max(0.0, v);
  nn::dense_forward(out_, h, out);
}

double FeedForwardModel::accumulate_gradient(std::span<const double> window, std::span<const double> target,
                                             std::span<Tensor> grads, double scale) const {
  std::vector<double> pre(hidden_.bias.size()), h(pre.size()), y(output_size());
  nn::dense_forward(hidden_, window, pre);
  for (std::size_t i = 0; i < pre.size(); ++i) h[i] = std::max(0.0, pre[i]);
  nn::dense_forward(out_, h, y);
  double sse = 0.0;
  std::vector<double> d_y(y.size());
  for (std::size_t k = 0; k < y.size(); ++k) {
    const double r = y[k] - target[k];
    sse += r * r;
    d_y[k] = 2.0 * scale * r;
  }
  nn::DenseParams g_hidden{std::move(grads[0]), std::move(grads[1])};
  nn::DenseParams g_out{std::move(grads[2]), std::move(grads[3])};
  std::vector<double> d_h(h.size());
  nn::dense_backward(out_, h, d_y, g_out, d_h);
  for (std::size_t i = 0; i < d_h.size(); ++i)
    if (pre[i] <= 0.0) d_h[i] = 0.0;
  nn::dense_backward(hidden_, window, d_h, g_hidden, {});
  grads[0] = std::move(g_hidden.weight);
  grads[1] = std::move(g_hidden.bias);
  grads[2] = std::move(g_out.weight);
  grads[3] = std::move(g_out.bias);
  return sse;
}

// ---------------------------------------------------------------------------

PlainLstmModel::PlainLstmModel(std::size_t stations, std::size_t look_back, std::size_t horizon,
                               std::size_t hidden, std::uint64_t seed, bool per_station)
    : stations_(stations), look_back_(look_back), horizon_(horizon), per_station_(per_station) {
  if (stations == 0 || look_back == 0 || horizon == 0 || hidden == 0) {
    throw DomainError("LSTM dimensions must be positive");
  }
  Rng rng(seed);
  lstm_ = nn::init_lstm(lstm_inputs(), hidden, rng);
  head_ = nn::init_dense(hidden, head_outputs(), rng);
}

std::vector<nn::ParamRef> PlainLstmModel::parameters() {
  return {{"lstm.weight", &lstm_.weight},
          {"lstm.bias", &lstm_.bias},
          {"head.weight", &head_.weight},
          {"head.bias", &head_.bias}};
}

namespace {

// Column `s` of a [steps x stations] window.
void station_series(std::span<const double> window, std::size_t steps, std::size_t stations, std::size_t s,
                    std::vector<double>& out) {
  out.resize(steps);
  for (std::size_t t = 0; t < steps; ++t) out[t] = window[t * stations + s];
}

}  // namespace

void PlainLstmModel::predict_sample(std::span<const double> window, std::span<double> out) const {
  thread_local nn::LstmTrace tr;
  thread_local std::vector<double> series, y;
  const std::size_t H = lstm_.hidden();
  if (!per_station_) {
    nn::lstm_forward_cached(lstm_, window, look_back_, tr);
    nn::dense_forward(head_, std::span<const double>(tr.hidden).subspan((look_back_ - 1) * H, H), out);
    return;
  }
  y.resize(horizon_);
  for (std::size_t s = 0; s < stations_; ++s) {
    station_series(window, look_back_, stations_, s, series);
    nn::lstm_forward_cached(lstm_, series, look_back_, tr);
    nn::dense_forward(head_, std::span<const double>(tr.hidden).subspan((look_back_ - 1) * H, H), y);
    for (std::size_t h = 0; h < horizon_; ++h) out[h * stations_ + s] = y[h];
  }
}

double PlainLstmModel::accumulate_gradient(std::span<const double> window, std::span<const double> target,
                                           std::span<Tensor> grads, double scale) const {
  thread_local nn::LstmTrace tr;
  thread_local std::vector<double> series;
  const std::size_t H = lstm_.hidden();
  nn::LstmParams g_lstm{std::move(grads[0]), std::move(grads[1])};
  nn::DenseParams g_head{std::move(grads[2]), std::move(grads[3])};
  std::vector<double> y(head_outputs()), d_y(y.size()), d_hidden(look_back_ * H);
  double sse = 0.0;

  // One backward pass per LSTM run: once for the multivariate model, once per station otherwise.
  const std::size_t runs = per_station_ ? stations_ : 1;
  for (std::size_t s = 0; s < runs; ++s) {
    std::span<const double> in = window;
    if (per_station_) {
      station_series(window, look_back_, stations_, s, series);
      in = series;
    }
    nn::lstm_forward_cached(lstm_, in, look_back_, tr);
    const auto last = std::span<const double>(tr.hidden).subspan((look_back_ - 1) * H, H);
    nn::dense_forward(head_, last, y);
    for (std::size_t k = 0; k < y.size(); ++k) {
      const double r = y[k] - (per_station_ ? target[k * stations_ + s] : target[k]);
      sse += r * r;
      d_y[k] = 2.0 * scale * r;
    }
    std::fill(d_hidden.begin(), d_hidden.end(), 0.0);
    nn::dense_backward(head_, last, d_y, g_head, std::span<double>(d_hidden).subspan((look_back_ - 1) * H, H));
    nn::lstm_backward(lstm_, tr, d_hidden, g_lstm, {});
  }

  grads[0] = std::move(g_lstm.weight);
  grads[1] = std::move(g_lstm.bias);
  grads[2] = std::move(g_head.weight);
  grads[3] = std::move(g_head.bias);
  return sse;
}

// ---------------------------------------------------------------------------

std::string to_string(BaselineVariant v) {
  switch (v) {
    case BaselineVariant::HA: return "HA";
    case BaselineVariant::AR: return "AR";
    case BaselineVariant::FNN: return "FNN";
    case BaselineVariant::LSTM: return "LSTM";
  }
  return "?";
}

BaselineVariant parse_baseline(const std::string& text) {
  std::string t = text;
  std::ranges::transform(t, t.begin(), [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  if (t == "HA") return BaselineVariant::HA;
  if (t == "AR" || t == "ARIMA") return BaselineVariant::AR;
  if (t == "FNN") return BaselineVariant::FNN;
  if (t == "LSTM") return BaselineVariant::LSTM;
  throw InputError("unknown baseline '" + text + "' (expected HA, AR, FNN or LSTM)");
}

BaselineModel fit_baseline(BaselineVariant variant, const data::DatasetSplits& splits,
                           const BaselineConfig& config, std::uint64_t seed) {
  if (splits.train.size() == 0) throw SizeError("baseline fit needs a nonempty training split");
  BaselineModel out;
  out.variant = variant;
  const auto& tr = splits.train;
  switch (variant) {
    case BaselineVariant::HA:
      out.forecaster = std::make_shared<HistoricalAverage>(tr);
      break;
    case BaselineVariant::AR: {
      auto ar = std::make_shared<AutoRegressive>(tr, std::min(config.ar_order, tr.look_back));
      for (std::size_t s : ar->fallback_stations()) {
        out.notes.push_back("station " + std::to_string(s) + ": singular AR fit, using HA");
      }
      out.forecaster = std::move(ar);
      break;
    }
    case BaselineVariant::FNN:
    case BaselineVariant::LSTM: {
      std::shared_ptr<nn::SequenceModel> model;
      if (variant == BaselineVariant::FNN) {
        model = std::make_shared<FeedForwardModel>(tr.stations(), tr.look_back, tr.horizon, config.fnn_hidden, seed);
      } else {
        model = std::make_shared<PlainLstmModel>(tr.stations(), tr.look_back, tr.horizon, config.lstm_hidden, seed,
                                                 config.lstm_per_station);
      }
      nn::TrainConfig tc = config.train;
      tc.seed = seed;
      out.report = nn::fit(*model, tr, splits.val, tc).report;
      out.forecaster = std::make_shared<SequenceForecaster>(std::move(model));
      break;
    }
  }
  return out;
}

std::vector<ComparisonRow> compare(const std::vector<std::shared_ptr<const Forecaster>>& models,
                                   const data::WindowedDataset& test) {
  std::vector<ComparisonRow> rows;
  rows.reserve(models.size());
  for (const auto& m : models) {
    if (!m) throw StateError("compare: model is not fitted");
    rows.push_back({m->name(), mae_rmse(test.targets, m->forecast(test))});
  }
  return rows;
}

std::uint64_t dataset_fingerprint(const data::WindowedDataset& ds) {
  Fnv1a h;
  for (const Tensor* t : {&ds.inputs, &ds.targets}) {
    for (std::size_t d : t->shape()) h.value(static_cast<std::uint64_t>(d));
    h.doubles(t->data());
  }
  for (std::size_t o : ds.origins) h.value(static_cast<std::uint64_t>(o));
  return h.digest();
}

void write_comparison_csv(const std::vector<ComparisonRow>& rows, std::uint64_t seed,
                          std::uint64_t fingerprint, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  char fp[17];
  std::snprintf(fp, sizeof fp, "%016llx", static_cast<unsigned long long>(fingerprint));
  out << "model,mae,rmse,seed,dataset_fingerprint\n";
  for (const auto& r : rows) {
    out << r.model << ',' << csv::format_double(r.metrics.mae) << ',' << csv::format_double(r.metrics.rmse)
        << ',' << seed << ',' << fp << '\n';
  }
  if (!out) throw InputError("failed writing " + path.string());
}

}  // namespace flowcast::eval
