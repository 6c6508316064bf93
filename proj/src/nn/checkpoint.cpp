#include "flowcast/nn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <string_view>

#include "flowcast/errors.hpp"
#include "flowcast/hash.hpp"
#include "flowcast/io.hpp"

namespace flowcast::nn {

static_assert(std::endian::native == std::endian::little, "checkpoint layout assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'F', 'L', 'O', 'W', 'C', 'K', 'P', 'T'};

class Writer {
 public:
  void raw(const void* p, std::size_t n) { buf_.append(static_cast<const char*>(p), n); }
  template <class T>
  void put(T v) { raw(&v, sizeof v); }
  void str(std::string_view s) {
    put(static_cast<std::uint32_t>(s.size()));
    raw(s.data(), s.size());
  }
  void doubles(const std::vector<double>& v) {
    put(static_cast<std::uint64_t>(v.size()));
    raw(v.data(), v.size() * sizeof(double));
  }
  void tensor(const Tensor& t) {
    put(static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) put(static_cast<std::uint64_t>(d));
    raw(t.data().data(), t.size() * sizeof(double));
  }
  std::string& buffer() { return buf_; }

 private:
  std::string buf_;
};

class Reader {
 public:
  Reader(std::string_view data, std::string source) : data_(data), source_(std::move(source)) {}

  void raw(void* p, std::size_t n) {
    if (n > data_.size() - pos_) fail("truncated file");
    std::memcpy(p, data_.data() + pos_, n);
    pos_ += n;
  }
  template <class T>
  T get() {
    T v;
    raw(&v, sizeof v);
    return v;
  }
  std::string str() {
    const auto n = get<std::uint32_t>();
    if (n > data_.size() - pos_) fail("truncated file");
    std::string s(data_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  std::vector<double> doubles() {
    const auto n = get<std::uint64_t>();
    if (n > (data_.size() - pos_) / sizeof(double)) fail("truncated file");
    std::vector<double> v(n);
    raw(v.data(), n * sizeof(double));
    return v;
  }
  Tensor tensor() {
    const auto rank = get<std::uint32_t>();
    if (rank == 0 || rank > Tensor::kMaxRank) fail("bad tensor rank");
    std::vector<std::size_t> shape(rank);
    std::size_t count = 1;
    for (auto& d : shape) {
      d = get<std::uint64_t>();
      if (d == 0 || d > (data_.size() - pos_) / sizeof(double) / count) fail("bad tensor shape");
      count *= d;
    }
    Tensor t{std::span<const std::size_t>(shape)};
    raw(t.data().data(), t.size() * sizeof(double));
    return t;
  }
  std::size_t pos() const { return pos_; }
  [[noreturn]] void fail(const std::string& why) const { throw FormatError(source_ + ": " + why); }

 private:
  std::string_view data_;
  std::string source_;
  std::size_t pos_ = 0;
};

std::vector<std::uint64_t> widths(const std::vector<std::size_t>& v) { return {v.begin(), v.end()}; }

}  // namespace

GcnLstmModel Checkpoint::model() const {
  return GcnLstmModel(config, params, adjacency.row_normalized());
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  Writer w;
  w.raw(kMagic, sizeof kMagic);
  w.put(kCheckpointVersion);
  w.put(ckpt.config.seed);
  w.put(ckpt.adjacency.fingerprint());

  const auto& c = ckpt.config;
  w.put(static_cast<std::uint64_t>(c.stations));
  w.put(static_cast<std::uint64_t>(c.look_back));
  w.put(static_cast<std::uint64_t>(c.horizon));
  w.put(static_cast<std::uint8_t>(c.gcn_activation == Activation::ReLU ? 0 : 1));
  for (const auto& dims : {c.gcn_dims, c.lstm_hidden}) {
    w.put(static_cast<std::uint32_t>(dims.size()));
    for (auto d : widths(dims)) w.put(d);
  }

  w.put(static_cast<std::uint8_t>(ckpt.adjacency.mode == graph::KernelMode::Gaussian ? 0 : 1));
  w.put(ckpt.adjacency.sigma2);
  w.put(ckpt.adjacency.epsilon);
  w.tensor(ckpt.adjacency.modified);

  w.put(static_cast<std::uint32_t>(ckpt.station_ids.size()));
  for (const auto& id : ckpt.station_ids) w.str(id);
  w.doubles(ckpt.norm.min);
  w.doubles(ckpt.norm.max);

  w.put(ckpt.alpha);
  w.put(static_cast<std::uint8_t>(ckpt.q_adjusted.has_value()));
  w.put(ckpt.q_adjusted.value_or(0.0));
  w.str(ckpt.config_echo);

  const auto tensors = ckpt.params.tensors();
  w.put(static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    w.str(t.name);
    w.tensor(*t.tensor);
  }

  Fnv1a h;
  h.bytes(w.buffer().data(), w.buffer().size());
  w.put(h.digest());
  io::atomic_write_text(path, w.buffer());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const std::string bytes = io::read_text(path);
  Reader r(bytes, path.string());
  char magic[8];
  r.raw(magic, sizeof magic);
  if (std::memcmp(magic, kMagic, sizeof kMagic) != 0) r.fail("not a checkpoint file");
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) r.fail("unsupported checkpoint version " + std::to_string(version));
  if (bytes.size() < sizeof(std::uint64_t) + 12) r.fail("truncated file");
  {
    const std::size_t body = bytes.size() - sizeof(std::uint64_t);
    Fnv1a h;
    h.bytes(bytes.data(), body);
    std::uint64_t stored;
    std::memcpy(&stored, bytes.data() + body, sizeof stored);
    if (stored != h.digest()) r.fail("checksum mismatch");
  }

  Checkpoint ck;
  auto& c = ck.config;
  c.seed = r.get<std::uint64_t>();
  const auto fingerprint = r.get<std::uint64_t>();
  c.stations = r.get<std::uint64_t>();
  c.look_back = r.get<std::uint64_t>();
  c.horizon = r.get<std::uint64_t>();
  c.gcn_activation = r.get<std::uint8_t>() == 0 ? Activation::ReLU : Activation::Linear;
  for (auto* dims : {&c.gcn_dims, &c.lstm_hidden}) {
    const auto n = r.get<std::uint32_t>();
    if (n > 64) r.fail("bad layer count");
    dims->resize(n);
    for (auto& d : *dims) d = r.get<std::uint64_t>();
  }

  ck.adjacency.mode = r.get<std::uint8_t>() == 0 ? graph::KernelMode::Gaussian : graph::KernelMode::InverseTime;
  ck.adjacency.sigma2 = r.get<double>();
  ck.adjacency.epsilon = r.get<double>();
  ck.adjacency.modified = r.tensor();
  if (ck.adjacency.fingerprint() != fingerprint) r.fail("adjacency fingerprint mismatch");
  if (ck.adjacency.size() != c.stations) r.fail("adjacency size does not match the station count");

  const auto n_ids = r.get<std::uint32_t>();
  if (n_ids != c.stations) r.fail("station list does not match the station count");
  for (std::uint32_t i = 0; i < n_ids; ++i) ck.station_ids.push_back(r.str());
  ck.norm.min = r.doubles();
  ck.norm.max = r.doubles();
  if (ck.norm.min.size() != c.stations || ck.norm.max.size() != c.stations) r.fail("normalization size mismatch");

  ck.alpha = r.get<double>();
  const bool has_q = r.get<std::uint8_t>() != 0;
  const double q = r.get<double>();
  if (has_q) ck.q_adjusted = q;
  ck.config_echo = r.str();

  try {
    ck.params = ModelParams::init(c);
  } catch (const Error& e) {
    r.fail(std::string("invalid model configuration: ") + e.what());
  }
  auto slots = ck.params.tensors();
  const auto n_tensors = r.get<std::uint32_t>();
  if (n_tensors != slots.size()) r.fail("tensor count does not match the configuration");
  for (auto& slot : slots) {
    const auto name = r.str();
    if (name != slot.name) r.fail("expected tensor " + slot.name + ", found " + name);
    Tensor t = r.tensor();
    if (!t.same_shape(*slot.tensor)) r.fail("tensor " + name + " has shape " + t.shape_string());
    *slot.tensor = std::move(t);
  }
  if (r.pos() != bytes.size() - sizeof(std::uint64_t)) r.fail("trailing bytes before checksum");
  return ck;
}

}  // namespace flowcast::nn
