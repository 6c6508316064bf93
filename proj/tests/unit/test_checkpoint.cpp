#include <doctest.h>

#include <fstream>

#include "flowcast/errors.hpp"
#include "flowcast/io.hpp"
#include "flowcast/nn/checkpoint.hpp"
#include "flowcast/rng.hpp"
#include "support.hpp"

using namespace flowcast;
using namespace flowcast::nn;

namespace {

Checkpoint sample_checkpoint() {
  Checkpoint ck;
  ck.config.stations = 3;
  ck.config.look_back = 5;
  ck.config.horizon = 2;
  ck.config.gcn_dims = {4};
  ck.config.lstm_hidden = {3};
  ck.config.seed = 9;
  ck.params = ModelParams::init(ck.config);
  Rng rng(1);
  for (auto& t : ck.params.tensors())
    for (auto& v : t.tensor->data()) v += rng.uniform(-0.1, 0.1);
  ck.adjacency.modified = Tensor({3, 3}, {1.0, 0.5, 0.0, 0.25, 0.8, 0.1, 0.0, 0.3, 0.6});
  ck.adjacency.mode = graph::KernelMode::InverseTime;
  ck.adjacency.epsilon = 1e-3;
  ck.station_ids = {"A", "B", "C"};
  ck.norm.min = {0.0, 1.0, 2.0};
  ck.norm.max = {10.0, 20.0, 30.5};
  ck.alpha = 0.1;
  ck.q_adjusted = 0.0625;
  ck.config_echo = R"({"seed":9})";
  return ck;
}

void flip_byte(const std::filesystem::path& p, std::size_t offset) {
  auto bytes = io::read_text(p);
  bytes[offset] = static_cast<char>(bytes[offset] ^ 0x40);
  std::ofstream(p, std::ios::binary) << bytes;
}

}  // namespace

TEST_CASE("checkpoint round trip preserves predictions bit for bit") {
  testing::TempDir dir;
  const auto ck = sample_checkpoint();
  save_checkpoint(ck, dir / "m.ckpt");
  const auto back = load_checkpoint(dir / "m.ckpt");

  CHECK(back.station_ids == ck.station_ids);
  CHECK(back.norm.min == ck.norm.min);
  CHECK(back.norm.max == ck.norm.max);
  CHECK(back.q_adjusted == ck.q_adjusted);
  CHECK(back.alpha == ck.alpha);
  CHECK(back.config.gcn_dims == ck.config.gcn_dims);
  CHECK(back.config.seed == 9);
  CHECK(back.adjacency.mode == graph::KernelMode::InverseTime);
  CHECK(back.adjacency.fingerprint() == ck.adjacency.fingerprint());
  CHECK(back.config_echo == ck.config_echo);

  Rng rng(2);
  Tensor x({4, 5, 3});
  for (auto& v : x.data()) v = rng.uniform();
  CHECK(predict(back.model(), x) == predict(ck.model(), x));

  save_checkpoint(back, dir / "again.ckpt");
  CHECK(io::read_text(dir / "again.ckpt") == io::read_text(dir / "m.ckpt"));
}

TEST_CASE("checkpoint without a quantile") {
  testing::TempDir dir;
  auto ck = sample_checkpoint();
  ck.q_adjusted.reset();
  save_checkpoint(ck, dir / "m.ckpt");
  CHECK_FALSE(load_checkpoint(dir / "m.ckpt").q_adjusted.has_value());
}

TEST_CASE("damaged checkpoints are rejected") {
  testing::TempDir dir;
  save_checkpoint(sample_checkpoint(), dir / "m.ckpt");
  const auto good = io::read_text(dir / "m.ckpt");

  SUBCASE("flipped payload byte") {
    flip_byte(dir / "m.ckpt", good.size() / 2);
    CHECK_THROWS_AS(load_checkpoint(dir / "m.ckpt"), FormatError);
  }
  SUBCASE("bad magic") {
    flip_byte(dir / "m.ckpt", 0);
    CHECK_THROWS_WITH_AS(load_checkpoint(dir / "m.ckpt"), doctest::Contains("not a checkpoint"), FormatError);
  }
  SUBCASE("truncated") {
    std::ofstream(dir / "m.ckpt", std::ios::binary) << good.substr(0, good.size() - 20);
    CHECK_THROWS_AS(load_checkpoint(dir / "m.ckpt"), FormatError);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_checkpoint(dir / "none.ckpt"), InputError);
  }
}

TEST_CASE("atomic_write leaves no partial output") {
  testing::TempDir dir;
  CHECK_THROWS_AS(io::atomic_write(dir / "out.csv",
                                   [](const std::filesystem::path& tmp) {
                                     std::ofstream(tmp) << "half";
                                     throw NumericError("boom");
                                   }),
                  NumericError);
  CHECK(std::filesystem::is_empty(dir.path()));

  io::atomic_write_text(dir / "out.csv", "a,b\n");
  CHECK(testing::slurp(dir / "out.csv") == "a,b\n");
  CHECK(std::distance(std::filesystem::directory_iterator(dir.path()), {}) == 1);
}
