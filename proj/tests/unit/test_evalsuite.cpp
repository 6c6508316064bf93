#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "flowcast/errors.hpp"
#include "flowcast/evalsuite.hpp"
#include "flowcast/rng.hpp"
#include "gradcheck.hpp"
#include "support.hpp"

using namespace flowcast;
using namespace flowcast::eval;

namespace {

Tensor random_tensor(std::initializer_list<std::size_t> shape, Rng& rng, double lo = 0.0, double hi = 1.0) {
  Tensor t(shape);
  for (auto& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

// Two weeks of 15-minute rows starting Monday 2019-01-07 00:00.
data::FlowFrame two_weeks(std::size_t stations, Rng& rng) {
  data::FlowFrame f;
  const auto start = *csv::parse_timestamp("2019-01-07T00:00");
  const std::size_t rows = 14 * data::kIntervalsPerDay;
  f.values = Tensor({rows, stations});
  for (std::size_t t = 0; t < rows; ++t) {
    f.timestamps.push_back(start + std::chrono::duration_cast<std::chrono::seconds>(data::kInterval) * static_cast<long>(t));
    for (std::size_t s = 0; s < stations; ++s) f.values(t, s) = rng.uniform(0.0, 100.0);
  }
  for (std::size_t s = 0; s < stations; ++s) f.station_ids.push_back("S" + std::to_string(s));
  return f;
}

// Windows with random lags whose target follows an exact linear recursion.
data::WindowedDataset linear_windows(std::size_t samples, std::size_t look_back, double intercept,
                                     const std::vector<double>& phi, Rng& rng, std::size_t horizon = 1) {
  data::WindowedDataset ds;
  ds.look_back = look_back;
  ds.horizon = horizon;
  ds.inputs = Tensor({samples, look_back, 1});
  ds.targets = Tensor({samples, horizon, 1});
  for (std::size_t k = 0; k < samples; ++k) {
    std::vector<double> hist;
    for (std::size_t l = 0; l < look_back; ++l) hist.push_back(ds.inputs(k, l, 0) = rng.uniform(-1.0, 1.0));
    for (std::size_t h = 0; h < horizon; ++h) {
      double y = intercept;
      for (std::size_t j = 0; j < phi.size(); ++j) y += phi[j] * hist[hist.size() - 1 - j];
      ds.targets(k, h, 0) = y;
      hist.push_back(y);
    }
    ds.origins.push_back(k);
  }
  ds.target_times.assign(samples, *csv::parse_timestamp("2019-01-07T00:00"));
  return ds;
}

data::WindowedDataset permute(const data::WindowedDataset& ds, const std::vector<std::size_t>& order) {
  data::WindowedDataset out = ds;
  for (std::size_t k = 0; k < order.size(); ++k) {
    std::ranges::copy(ds.inputs.slab(order[k]), out.inputs.slab(k).begin());
    std::ranges::copy(ds.targets.slab(order[k]), out.targets.slab(k).begin());
    out.origins[k] = ds.origins[order[k]];
    out.target_times[k] = ds.target_times[order[k]];
  }
  return out;
}

data::DatasetSplits small_splits(std::uint64_t seed) {
  data::SynthOptions opt;
  opt.n_stations = 3;
  opt.days = 4;
  opt.seed = seed;
  return data::prepare(data::synth_corpus(opt).frame, 4, 1).splits;
}

}  // namespace

TEST_CASE("mae_rmse examples") {
  const Tensor zero = Tensor::vector({0.0, 0.0});
  auto r = mae_rmse(zero, zero);
  CHECK(r.mae == 0.0);
  CHECK(r.rmse == 0.0);
  r = mae_rmse(zero, Tensor::vector({1.0, 3.0}));
  CHECK(r.mae == 2.0);
  CHECK(r.rmse == doctest::Approx(std::sqrt(5.0)).epsilon(1e-15));
  CHECK(r.n == 2);

  const Tensor a = Tensor::vector({0.3, -1.2, 4.0, 7.5});
  Tensor b = a;
  for (auto& v : b.data()) v -= 0.25;
  r = mae_rmse(a, b, Units::Vehicles);
  CHECK(r.mae == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(r.rmse == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(r.units == Units::Vehicles);

  CHECK_THROWS_AS(mae_rmse(zero, Tensor::vector({1.0, 2.0, 3.0})), StructuralError);
  CHECK_THROWS_AS(mae_rmse(Tensor(), Tensor()), SizeError);
}

TEST_CASE("mae never exceeds rmse") {
  Rng rng(21);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.index(40);
    const Tensor a = random_tensor({n}, rng, -5.0, 5.0), b = random_tensor({n}, rng, -5.0, 5.0);
    const auto r = mae_rmse(a, b);
    CHECK(r.mae <= r.rmse * (1.0 + 1e-12));
  }
}

TEST_CASE("HA: constant slot value and fallback to the station mean") {
  Rng rng(1);
  auto f = two_weeks(2, rng);
  for (std::size_t t = 0; t < f.timesteps(); ++t)
    if (data::weekday_of(f.timestamps[t]) == 1 && data::slot_of_day(f.timestamps[t]) == 32) f.values(t, 0) = 40.0;
  const auto ds = data::window(f, 4, 1);
  const HistoricalAverage ha(ds);
  CHECK(ha.mean_for(0, *csv::parse_timestamp("2019-01-14T08:00")) == 40.0);
  CHECK(ha.mean_for(0, *csv::parse_timestamp("2030-06-03T08:00")) == 40.0);  // another Monday

  // Windows start at row 4, so Monday 00:00..00:45 of the first week is only an input.
  // Drop the second week and the slot is never a target.
  const auto first = ds.slice(0, 96 * 7 - 4);
  const HistoricalAverage short_ha(first);
  double mean = 0.0;
  for (std::size_t k = 0; k < first.size(); ++k) mean += first.targets(k, 0, 1);
  mean /= static_cast<double>(first.size());
  CHECK(short_ha.mean_for(1, *csv::parse_timestamp("2019-01-07T00:15")) == doctest::Approx(mean).epsilon(1e-12));
}

TEST_CASE("HA: invariant to the order of training windows") {
  Rng rng(2);
  const auto ds = data::window(two_weeks(3, rng), 4, 2);
  std::vector<std::size_t> order(ds.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);
  const HistoricalAverage a(ds), b(permute(ds, order));
  const Tensor fa = a.forecast(ds), fb = b.forecast(ds);
  REQUIRE(fa.same_shape(fb));
  for (std::size_t i = 0; i < fa.size(); ++i) CHECK(fa[i] == doctest::Approx(fb[i]).epsilon(1e-12));
}

TEST_CASE("AR: recovers x_t = 0.5 x_{t-1}") {
  Rng rng(3);
  const auto ds = linear_windows(200, 3, 0.0, {0.5}, rng);
  const AutoRegressive ar(ds, 1);
  CHECK(std::abs(ar.coefficients(0)[1] - 0.5) < 1e-9);
  CHECK(std::abs(ar.coefficients(0)[0]) < 1e-9);
}

TEST_CASE("AR: noiseless AR(p) recovers coefficients and forecasts recursively") {
  Rng rng(4);
  const std::vector<double> phi{0.4, -0.2, 0.15, 0.05};
  const auto train = linear_windows(300, 6, 0.3, phi, rng);
  const AutoRegressive ar(train, 4);
  CHECK(std::abs(ar.coefficients(0)[0] - 0.3) < 1e-9);
  for (std::size_t j = 0; j < phi.size(); ++j) CHECK(std::abs(ar.coefficients(0)[j + 1] - phi[j]) < 1e-9);

  const auto test = linear_windows(50, 6, 0.3, phi, rng, 3);
  CHECK(mae_rmse(test.targets, ar.forecast(test)).mae < 1e-6);
  CHECK(ar.fallback_stations().empty());
}

TEST_CASE("AR: singular fit falls back to HA for that station") {
  CHECK_THROWS_AS(fit_ar_coefficients({{1.0}, {1.0}, {1.0}}, {2.0, 2.0, 2.0}), FitError);

  Rng rng(5);
  auto f = two_weeks(2, rng);
  for (std::size_t t = 0; t < f.timesteps(); ++t) f.values(t, 1) = 7.0;
  const auto ds = data::window(f, 4, 1);
  const AutoRegressive ar(ds, 2);
  REQUIRE(ar.fallback_stations() == std::vector<std::size_t>{1});
  const Tensor out = ar.forecast(ds);
  for (std::size_t k = 0; k < ds.size(); ++k) CHECK(out(k, 0, 1) == 7.0);

  data::DatasetSplits splits;
  splits.train = ds;
  const auto fitted = fit_baseline(BaselineVariant::AR, splits, {}, 0);
  CHECK(fitted.notes.size() == 1);
  CHECK_THROWS_AS(AutoRegressive(ds, 5), DomainError);
}

TEST_CASE("baseline networks: analytic gradients match central differences") {
  Rng rng(6);
  const Tensor x = random_tensor({3, 4, 2}, rng), y = random_tensor({3, 2, 2}, rng);
  FeedForwardModel fnn(2, 4, 2, 3, 0);
  PlainLstmModel per_station(2, 4, 2, 3, 0, true);
  PlainLstmModel multivariate(2, 4, 2, 3, 0, false);
  for (nn::SequenceModel* m : std::initializer_list<nn::SequenceModel*>{&fnn, &per_station, &multivariate}) {
    for (const auto& p : m->parameters())
      for (auto& v : p.tensor->data()) v += rng.uniform(-0.2, 0.2);
    const auto check = oracles::finite_difference_check(*m, x, y);
    INFO(m->name() << " worst " << check.worst_param);
    CHECK(check.max_rel_error < 1e-4);
    CHECK(check.checked > 0);
  }
}

TEST_CASE("per-station LSTM treats stations alike") {
  PlainLstmModel m(3, 5, 1, 4, 9, true);
  Rng rng(7);
  Tensor x = random_tensor({1, 5, 3}, rng);
  for (std::size_t l = 0; l < 5; ++l) x(0, l, 2) = x(0, l, 0);
  const Tensor y = nn::predict(m, x);
  CHECK(y(0, 0, 0) == y(0, 0, 2));
  CHECK(y(0, 0, 0) != y(0, 0, 1));
}

TEST_CASE("fit_baseline: seeded networks are reproducible") {
  const auto splits = small_splits(3);
  BaselineConfig cfg;
  cfg.train.epochs = 3;
  cfg.fnn_hidden = 8;
  for (auto variant : {BaselineVariant::FNN, BaselineVariant::LSTM}) {
    const auto a = fit_baseline(variant, splits, cfg, 11), b = fit_baseline(variant, splits, cfg, 11);
    CHECK(a.forecaster->forecast(splits.test) == b.forecaster->forecast(splits.test));
    CHECK(a.report.train_losses() == b.report.train_losses());
    CHECK(a.report.epochs.size() == 3);
    const auto c = fit_baseline(variant, splits, cfg, 12);
    CHECK_FALSE(a.forecaster->forecast(splits.test) == c.forecaster->forecast(splits.test));
  }
  data::DatasetSplits empty;
  CHECK_THROWS_AS(fit_baseline(BaselineVariant::HA, empty, cfg, 0), SizeError);
}

TEST_CASE("compare: stable rows and CSV export") {
  const auto splits = small_splits(4);
  const auto ha = fit_baseline(BaselineVariant::HA, splits, {}, 0).forecaster;
  const auto ar = fit_baseline(BaselineVariant::AR, splits, {}, 0).forecaster;
  const auto rows = compare({ha, ar, ha}, splits.test);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].model == "HA");
  CHECK(rows[1].model == "AR");
  CHECK(rows[0].metrics.mae == rows[2].metrics.mae);
  CHECK(rows[0].metrics.rmse == rows[2].metrics.rmse);
  CHECK_THROWS_AS(compare({nullptr}, splits.test), StateError);

  const auto fp = dataset_fingerprint(splits.test);
  CHECK(fp == dataset_fingerprint(splits.test));
  CHECK(fp != dataset_fingerprint(splits.val));

  testing::TempDir dir;
  write_comparison_csv(rows, 42, fp, dir / "cmp.csv");
  const auto text = testing::slurp(dir / "cmp.csv");
  CHECK(text.rfind("model,mae,rmse,seed,dataset_fingerprint\nHA,", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 4);
}

TEST_CASE("parse_baseline") {
  CHECK(parse_baseline("ha") == BaselineVariant::HA);
  CHECK(parse_baseline("ARIMA") == BaselineVariant::AR);
  CHECK(parse_baseline("lstm") == BaselineVariant::LSTM);
  CHECK(to_string(BaselineVariant::FNN) == "FNN");
  CHECK_THROWS_AS(parse_baseline("stgcn"), InputError);
}
