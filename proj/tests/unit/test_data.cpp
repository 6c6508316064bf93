#include <doctest.h>

#include <cmath>
#include <string>

#include "flowcast/data.hpp"
#include "flowcast/errors.hpp"
#include "support.hpp"

using namespace flowcast;
using namespace flowcast::data;

namespace {

const char* kStations =
    "station_id,kind,lat,lon,record_count\n"
    "S1,CCS,44.9,-123.0,35040\n"
    "S2,NCCS,44.8,-123.1,500\n"
    "S3,NCCS,44.7,-123.2,250\n";

std::string counts_csv(bool drop_s2_0815) {
  std::string out = "station_id,timestamp,count\n";
  const char* times[] = {"2019-01-07T08:00:00", "2019-01-07T08:15:00", "2019-01-07T08:30:00",
                         "2019-01-07T08:45:00"};
  int v = 10;
  for (const char* t : times) {
    for (const char* s : {"S1", "S2", "S3"}) {
      ++v;
      if (drop_s2_0815 && std::string(s) == "S2" && std::string(t).find("08:15") != std::string::npos) continue;
      out += std::string(s) + "," + t + "," + std::to_string(v) + "\n";
    }
  }
  return out;
}

FlowFrame ramp_frame(std::size_t steps, std::size_t stations) {
  FlowFrame f;
  f.values = Tensor({steps, stations});
  const auto start = *csv::parse_timestamp("2019-01-07T00:00:00");
  for (std::size_t t = 0; t < steps; ++t) {
    f.timestamps.push_back(start + kInterval * static_cast<long>(t));
    for (std::size_t s = 0; s < stations; ++s) f.values(t, s) = static_cast<double>(t * (s + 1));
  }
  for (std::size_t s = 0; s < stations; ++s) f.station_ids.push_back("S" + std::to_string(s));
  return f;
}

}  // namespace

TEST_CASE("load_counts: complete 3x4 input") {
  testing::TempDir dir;
  const auto meta = dir.write("stations.csv", kStations);
  const auto counts = dir.write("counts.csv", counts_csv(false));
  const auto loaded = load_counts(counts, meta);
  CHECK(loaded.frame.timesteps() == 4);
  CHECK(loaded.frame.stations() == 3);
  CHECK(loaded.frame.at(0, 0) == 11);
  CHECK(loaded.frame.at(3, 2) == 22);
  REQUIRE(loaded.stations.size() == 3);
  CHECK(loaded.stations[1].kind == StationKind::NCCS);
  CHECK(loaded.stations[2].record_count == 250);
}

TEST_CASE("load_counts: unknown station is named") {
  testing::TempDir dir;
  const auto meta = dir.write("stations.csv", kStations);
  const auto counts = dir.write("counts.csv", counts_csv(false) + "S9,2019-01-07T09:00:00,4\n");
  try {
    load_counts(counts, meta);
    FAIL("expected UnknownStationError");
  } catch (const UnknownStationError& e) {
    CHECK(e.station() == "S9");
    CHECK(std::string(e.what()).find("S9") != std::string::npos);
  }
}

TEST_CASE("load_counts: missing interval becomes a sentinel") {
  testing::TempDir dir;
  const auto meta = dir.write("stations.csv", kStations);
  const auto counts = dir.write("counts.csv", counts_csv(true));
  const auto loaded = load_counts(counts, meta);
  CHECK(loaded.frame.timesteps() == 4);
  CHECK(loaded.frame.stations() == 3);
  CHECK(is_sentinel(loaded.frame.at(1, 1)));
  CHECK_FALSE(is_sentinel(loaded.frame.at(1, 0)));
}

TEST_CASE("load_counts: empty count cell is a sentinel") {
  testing::TempDir dir;
  const auto meta = dir.write("stations.csv", kStations);
  const auto counts = dir.write("counts.csv",
                                "station_id,timestamp,count\nS1,2019-01-07T08:00:00,\n"
                                "S1,2019-01-07T08:15:00,3\n");
  const auto loaded = load_counts(counts, meta);
  CHECK(loaded.frame.stations() == 1);
  CHECK(is_sentinel(loaded.frame.at(0, 0)));
  CHECK(loaded.frame.at(1, 0) == 3);
}

TEST_CASE("load_counts: error taxonomy") {
  testing::TempDir dir;
  const auto meta = dir.write("stations.csv", kStations);

  SUBCASE("malformed row reports its line") {
    const auto counts = dir.write("c.csv", "station_id,timestamp,count\nS1,2019-01-07T08:00:00,1\nS1,garbage,2\n");
    try {
      load_counts(counts, meta);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.line() == 3);
    }
  }
  SUBCASE("decreasing timestamps") {
    const auto counts = dir.write("c.csv", "station_id,timestamp,count\nS1,2019-01-07T08:15:00,1\nS1,2019-01-07T08:00:00,2\n");
    CHECK_THROWS_AS(load_counts(counts, meta), OrderError);
  }
  SUBCASE("duplicate record") {
    const auto counts = dir.write("c.csv", "station_id,timestamp,count\nS1,2019-01-07T08:00:00,1\nS1,2019-01-07T08:00:00,2\n");
    CHECK_THROWS_AS(load_counts(counts, meta), DuplicationError);
  }
  SUBCASE("wrong header") {
    const auto counts = dir.write("c.csv", "station,time,count\nS1,2019-01-07T08:00:00,1\n");
    CHECK_THROWS_AS(load_counts(counts, meta), ParseError);
  }
  SUBCASE("missing file is an input error") {
    CHECK_THROWS_AS(load_counts(dir / "nope.csv", meta), InputError);
  }
}

TEST_CASE("normalize: min-max arithmetic and degenerate range") {
  FlowFrame f = ramp_frame(3, 2);
  f.values(0, 0) = 0;
  f.values(1, 0) = 50;
  f.values(2, 0) = 100;
  for (std::size_t t = 0; t < 3; ++t) f.values(t, 1) = 7;
  const auto [n, params] = normalize(f);
  CHECK(n.at(0, 0) == 0.0);
  CHECK(n.at(1, 0) == 0.5);
  CHECK(n.at(2, 0) == 1.0);
  for (std::size_t t = 0; t < 3; ++t) CHECK(n.at(t, 1) == 0.0);
  CHECK(params.min[0] == 0.0);
  CHECK(params.max[0] == 100.0);
}

TEST_CASE("normalize: round trip, monotone, sentinel passthrough") {
  FlowFrame f = ramp_frame(20, 3);
  f.values(4, 1) = kSentinel;
  f.values(7, 2) = 123.456;
  const auto [n, params] = normalize(f);
  const FlowFrame back = denormalize(n, params);
  CHECK(is_sentinel(n.at(4, 1)));
  CHECK(is_sentinel(back.at(4, 1)));
  for (std::size_t t = 0; t < 20; ++t) {
    for (std::size_t s = 0; s < 3; ++s) {
      const double x = f.at(t, s);
      if (is_sentinel(x)) continue;
      CHECK(std::abs(back.at(t, s) - x) <= 1e-9 * std::max(1.0, std::abs(x)));
      CHECK(n.at(t, s) >= 0.0);
      CHECK(n.at(t, s) <= 1.0);
      for (std::size_t u = 0; u < 20; ++u) {
        const double y = f.at(u, s);
        if (!is_sentinel(y) && x <= y) CHECK(n.at(t, s) <= n.at(u, s));
      }
    }
  }
}

TEST_CASE("window: sample counts") {
  CHECK(window(ramp_frame(100, 2), 96, 1).size() == 4);
  CHECK(window(ramp_frame(97, 2), 96, 1).size() == 1);
  CHECK_THROWS_AS(window(ramp_frame(96, 2), 96, 1), SizeError);
}

TEST_CASE("window: sentinel drops every covering window") {
  FlowFrame f = ramp_frame(200, 2);
  f.values(50, 1) = kSentinel;
  const auto ds = window(f, 96, 1);
  // windows with origin o cover rows [o, o + 97); those with o <= 50 all touch row 50
  CHECK(ds.size() == 200 - 96 - 1 + 1 - 51);
  for (std::size_t k = 0; k < ds.size(); ++k) CHECK(ds.origins[k] > 50);
}

TEST_CASE("window: targets immediately follow inputs") {
  const FlowFrame f = ramp_frame(40, 3);
  const auto ds = window(f, 8, 3);
  REQUIRE(ds.size() == 40 - 8 - 3 + 1);
  for (std::size_t k = 0; k < ds.size(); ++k) {
    const std::size_t o = ds.origins[k];
    CHECK(ds.target_times[k] == f.timestamps[o + 7] + kInterval);
    for (std::size_t s = 0; s < 3; ++s) {
      for (std::size_t l = 0; l < 8; ++l) CHECK(ds.inputs(k, l, s) == f.at(o + l, s));
      for (std::size_t h = 0; h < 3; ++h) CHECK(ds.targets(k, h, s) == f.at(o + 8 + h, s));
    }
  }
}

TEST_CASE("split: sizes and errors") {
  const auto ds100 = window(ramp_frame(100 + 4, 1), 4, 1);
  REQUIRE(ds100.size() == 100);
  auto s = split(ds100, {0.7, 0.15, 0.15});
  CHECK(s.train.size() == 70);
  CHECK(s.val.size() == 15);
  CHECK(s.test.size() == 15);

  const auto ds10 = window(ramp_frame(10 + 4, 1), 4, 1);
  s = split(ds10, {0.8, 0.1, 0.1});
  CHECK(s.train.size() == 8);
  CHECK(s.val.size() == 1);
  CHECK(s.test.size() == 1);

  CHECK_THROWS_AS(split(ds10, {0.5, 0.5, 0.0}), SizeError);
  CHECK_THROWS_AS(split(ds10, {0.5, 0.2, 0.2}), DomainError);
}

TEST_CASE("split: preserves order and covers every sample") {
  const auto ds = window(ramp_frame(257, 2), 6, 2);
  const auto s = split(ds);
  CHECK(s.train.size() + s.val.size() + s.test.size() == ds.size());
  std::vector<std::size_t> joined;
  for (const auto* part : {&s.train, &s.val, &s.test}) {
    joined.insert(joined.end(), part->origins.begin(), part->origins.end());
  }
  CHECK(joined == ds.origins);
  CHECK(s.val.inputs == ds.slice(s.train.size(), s.train.size() + s.val.size()).inputs);
}

TEST_CASE("prepare: scaler sees only training rows") {
  FlowFrame f = ramp_frame(120, 2);
  const auto p = prepare(f, 4, 1);
  const std::size_t train_rows = p.splits.train.origins.back() + 4 + 1;
  for (std::size_t s = 0; s < 2; ++s) {
    double mx = 0.0;
    for (std::size_t t = 0; t < train_rows; ++t) mx = std::max(mx, f.at(t, s));
    CHECK(p.norm.max[s] == mx);
  }
  // later rows exceed the training max, so scaled values go above 1
  CHECK(p.splits.test.targets[p.splits.test.targets.size() - 1] > 1.0);
}

TEST_CASE("synth_corpus: shape and determinism") {
  SynthOptions opt;
  opt.n_stations = 5;
  opt.days = 30;
  opt.seed = 1;
  const auto a = synth_corpus(opt);
  const auto b = synth_corpus(opt);
  CHECK(a.frame.values.dim(0) == 2880);
  CHECK(a.frame.values.dim(1) == 5);
  CHECK(a.frame.values == b.frame.values);
  CHECK(a.travel_seconds == b.travel_seconds);
  CHECK(a.stations.size() == 5);
  CHECK(a.stations[0].kind == StationKind::CCS);
  for (const auto& s : a.stations) CHECK(s.record_count >= 1);
  CHECK(weekday_of(a.frame.timestamps[0]) == 1);

  opt.seed = 2;
  CHECK_FALSE(synth_corpus(opt).frame.values == a.frame.values);
}

TEST_CASE("synth_corpus: zero noise gives exact lagged copies") {
  SynthOptions opt;
  opt.n_stations = 4;
  opt.days = 3;
  opt.noise_amplitude = 0.0;
  opt.seed = 9;
  const auto c = synth_corpus(opt);
  const auto& v = c.frame.values;
  CHECK(c.lags[0] == 0);
  for (std::size_t i = 1; i < 4; ++i) {
    CHECK(c.lags[i] >= c.lags[i - 1]);
    const std::size_t shift = c.lags[i] - c.lags[i - 1];
    for (std::size_t t = shift; t < c.frame.timesteps(); ++t) {
      CHECK(v(t, i) == v(t - shift, i - 1));
    }
  }
}

TEST_CASE("synth_corpus: rejects tiny corridors") {
  SynthOptions opt;
  opt.n_stations = 1;
  CHECK_THROWS_AS(synth_corpus(opt), DomainError);
  opt.n_stations = 3;
  opt.days = 1;
  CHECK_THROWS_AS(synth_corpus(opt), DomainError);
}

TEST_CASE("csv writers round-trip through the loaders") {
  SynthOptions opt;
  opt.n_stations = 3;
  opt.days = 2;
  const auto c = synth_corpus(opt);
  testing::TempDir dir;
  write_counts_csv(c.frame, dir / "counts.csv");
  write_stations_csv(c.stations, dir / "stations.csv");
  const auto loaded = load_counts(dir / "counts.csv", dir / "stations.csv");
  CHECK(loaded.frame.values == c.frame.values);
  CHECK(loaded.frame.timestamps == c.frame.timestamps);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(loaded.stations[i].record_count == c.stations[i].record_count);
    CHECK(loaded.stations[i].kind == c.stations[i].kind);
  }
}
