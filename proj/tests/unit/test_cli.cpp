#include <doctest.h>

#include <algorithm>
#include <sstream>

#include "flowcast/cli.hpp"
#include "flowcast/conformal.hpp"
#include "flowcast/csv.hpp"
#include "flowcast/graph.hpp"
#include "flowcast/io.hpp"
#include "support.hpp"

using namespace flowcast;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "flowcast");
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::vector<std::string> data_args(const testing::TempDir& dir) {
  return {"--counts", (dir / "corpus/counts.csv").string(), "--stations", (dir / "corpus/stations.csv").string(),
          "--travel-times", (dir / "corpus/travel_times.csv").string()};
}

std::vector<std::string> count_args(const testing::TempDir& dir) {
  return {"--counts", (dir / "corpus/counts.csv").string(), "--stations", (dir / "corpus/stations.csv").string()};
}

std::vector<std::string> cat(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

void make_corpus(const testing::TempDir& dir) {
  REQUIRE(run({"synth", "--days", "4", "--out", (dir / "corpus").string(), "--quiet"}).code == 0);
}

const std::vector<std::string> kFastTrain{"--look-back", "8", "--epochs", "3", "--lstm-hidden", "4", "--quiet"};

}  // namespace

TEST_CASE("synth writes the three corpus files deterministically") {
  testing::TempDir dir;
  REQUIRE(run({"synth", "--seed", "7", "--days", "3", "--out", (dir / "a").string()}).code == 0);
  REQUIRE(run({"--seed", "7", "synth", "--days", "3", "--out", (dir / "b").string()}).code == 0);
  for (const char* f : {"counts.csv", "stations.csv", "travel_times.csv"}) {
    CHECK(io::read_text(dir / "a" / f) == io::read_text(dir / "b" / f));
  }
  CHECK(testing::slurp(dir / "a/counts.csv").rfind("station_id,timestamp,count\n", 0) == 0);
  CHECK(testing::slurp(dir / "a/stations.csv").rfind("station_id,kind,lat,lon,record_count\n", 0) == 0);
  CHECK(testing::slurp(dir / "a/travel_times.csv").rfind("from_id,to_id,distance_m,speed_mps\n", 0) == 0);

  const auto bad = run({"synth", "--stations", "1", "--out", (dir / "c").string()});
  CHECK(bad.code == 2);
  CHECK(bad.err.find("at least 2 stations") != std::string::npos);
  CHECK_FALSE(std::filesystem::exists(dir / "c"));
}

TEST_CASE("build-adj matches the graph module and keeps asymmetry") {
  testing::TempDir dir;
  make_corpus(dir);
  const auto r = run(cat({"build-adj", "--out", (dir / "adj").string()}, data_args(dir)));
  REQUIRE(r.code == 0);
  CHECK(std::filesystem::exists(dir / "adj/adjacency.svg"));

  const auto stations = data::load_stations(dir / "corpus/stations.csv");
  std::vector<std::string> ids;
  for (const auto& s : stations) ids.push_back(s.station_id);
  const auto expected = graph::build_adjacency(graph::load_travel_times(dir / "corpus/travel_times.csv", ids),
                                               graph::availability_scores(stations));
  const auto table = csv::read(dir / "adj/adjacency.csv");
  REQUIRE(table.rows.size() == ids.size());
  REQUIRE(table.header.size() == ids.size() + 1);
  bool asymmetric = false;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    CHECK(table.rows[i].fields[0] == ids[i]);
    for (std::size_t j = 0; j < ids.size(); ++j) {
      CHECK(csv::parse_double(table, table.rows[i], j + 1) == expected.modified(i, j));
      asymmetric |= expected.modified(i, j) != expected.modified(j, i);
    }
  }
  CHECK(asymmetric);
}

TEST_CASE("missing inputs exit with code 2 and write nothing") {
  testing::TempDir dir;
  make_corpus(dir);
  auto r = run({"build-adj", "--stations", (dir / "none.csv").string(), "--travel-times",
                (dir / "corpus/travel_times.csv").string(), "--out", (dir / "adj").string()});
  CHECK(r.code == 2);
  CHECK_FALSE(std::filesystem::exists(dir / "adj"));

  r = run({"predict", "--out", (dir / "p").string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("--checkpoint") != std::string::npos);

  CHECK(run({"train", "--no-such-flag"}).code == 2);
  CHECK(run({}).code == 2);
  CHECK(run({"--help"}).code == 0);
}

TEST_CASE("config file is overridden by flags") {
  testing::TempDir dir;
  dir.write("cfg.json", R"({"seed": 7, "days": 3, "n_stations": 3})");
  REQUIRE(run({"--config", (dir / "cfg.json").string(), "synth", "--seed", "9", "--out", (dir / "a").string()}).code == 0);
  REQUIRE(run({"synth", "--seed", "9", "--days", "3", "--stations", "3", "--out", (dir / "b").string()}).code == 0);
  CHECK(io::read_text(dir / "a/counts.csv") == io::read_text(dir / "b/counts.csv"));

  dir.write("bad.json", R"({"seeds": 7})");
  CHECK(run({"--config", (dir / "bad.json").string(), "synth"}).code == 2);
  dir.write("wrong.json", R"({"seed": "seven"})");
  CHECK(run({"--config", (dir / "wrong.json").string(), "synth"}).code == 2);
  dir.write("broken.json", "{");
  CHECK(run({"--config", (dir / "broken.json").string(), "synth"}).code == 2);
  CHECK(run({"synth", "--quiet", "--out", (dir / "c").string(), "--seed", "1", "--days", "2"}).out.empty());
}

TEST_CASE("train, predict and eval are reproducible and consistent") {
  testing::TempDir dir;
  make_corpus(dir);
  for (const char* run_dir : {"r1", "r2"}) {
    const auto out = dir / run_dir;
    REQUIRE(run(cat(cat({"train", "--out", out.string()}, data_args(dir)), kFastTrain)).code == 0);
    const auto p = run(cat({"predict", "--out", out.string(), "--checkpoint", (out / "model.ckpt").string()},
                           count_args(dir)));
    REQUIRE(p.code == 0);
    dir.write(std::string(run_dir) + ".stdout", p.out);
    REQUIRE(run(cat(cat({"eval", "--out", out.string(), "--models", "proposed,HA,AR", "--checkpoint",
                         (out / "model.ckpt").string()},
                        data_args(dir)),
                    kFastTrain))
                .code == 0);
  }
  for (const char* f : {"train_report.csv", "intervals.csv", "comparison.csv", "model.ckpt", "loss.svg", "bounds.svg"}) {
    INFO(f);
    CHECK(io::read_text(dir / "r1" / f) == io::read_text(dir / "r2" / f));
  }

  // Printed PICP equals the share of covered rows in the exported intervals.
  const auto records = conformal::read_intervals_csv(dir / "r1/intervals.csv");
  const auto covered = std::ranges::count_if(records, [](const auto& r) { return r.covered; });
  const std::string printed = testing::slurp(dir / "r1.stdout");
  const double picp = std::stod(printed.substr(printed.find("PICP ") + 5));
  CHECK(picp == doctest::Approx(static_cast<double>(covered) / static_cast<double>(records.size())).epsilon(1e-15));
  for (const auto& r : records) CHECK(r.upper - r.lower > 0.0);

  const auto table = csv::read(dir / "r1/comparison.csv");
  REQUIRE(table.rows.size() == 3);
  CHECK(table.rows[0].fields[0] == "proposed");
  CHECK(table.rows[2].fields[0] == "AR");
}

TEST_CASE("predict rejects a checkpoint for other stations without partial output") {
  testing::TempDir dir;
  make_corpus(dir);
  REQUIRE(run(cat(cat({"train", "--out", (dir / "m").string()}, data_args(dir)), kFastTrain)).code == 0);
  REQUIRE(run({"synth", "--stations", "3", "--days", "4", "--out", (dir / "other").string(), "--quiet"}).code == 0);
  const auto r = run({"predict", "--checkpoint", (dir / "m/model.ckpt").string(), "--counts",
                      (dir / "other/counts.csv").string(), "--stations", (dir / "other/stations.csv").string(),
                      "--out", (dir / "p").string()});
  CHECK(r.code == 2);
  CHECK_FALSE(std::filesystem::exists(dir / "p/intervals.csv"));
}

TEST_CASE("simulate: run count, free flow and interval demand") {
  testing::TempDir dir;
  auto r = run({"simulate", "--demand", "300", "--runs", "10", "--out", (dir / "s").string(), "--quiet"});
  REQUIRE(r.code == 0);
  CHECK(csv::read(dir / "s/travel_time_samples.csv").rows.size() == 10);
  CHECK(std::filesystem::exists(dir / "s/travel_time_summary.json"));
  CHECK(std::filesystem::exists(dir / "s/travel_time_hist.svg"));

  r = run({"simulate", "--demand", "1e-9", "--runs", "20", "--out", (dir / "free").string(), "--quiet"});
  REQUIRE(r.code == 0);
  const auto t = csv::read(dir / "free/travel_time_samples.csv");
  for (const auto& row : t.rows) CHECK(std::abs(csv::parse_double(t, row, 2) - 4000.0 / 16.67 / 60.0) * 60.0 <= 0.5);

  dir.write("iv.csv",
            "sample,station,t,forecast,lower,upper,actual,covered\n"
            "0,S1,2019-01-07T07:30:00,90,80,100,90,1\n"
            "1,S1,2019-01-07T07:45:00,90,80,110,90,1\n"
            "2,S1,2019-01-07T08:00:00,90,80,120,90,1\n"
            "3,S1,2019-01-07T08:15:00,90,80,130,90,1\n");
  r = run({"simulate", "--intervals", (dir / "iv.csv").string(), "--runs", "3", "--out", (dir / "iv").string()});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("demand 460 veh/h") != std::string::npos);

  r = run({"simulate", "--intervals", (dir / "iv.csv").string(), "--window-start", "09:00", "--window-end", "10:00",
           "--out", (dir / "iv2").string()});
  CHECK(r.code == 2);
  CHECK(run({"simulate", "--out", (dir / "none").string()}).code == 2);
}
