#include "flowcast/cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <type_traits>

#include <CLI11.hpp>

#include "flowcast/conformal.hpp"
#include "flowcast/csv.hpp"
#include "flowcast/data.hpp"
#include "flowcast/errors.hpp"
#include "flowcast/evalsuite.hpp"
#include "flowcast/graph.hpp"
#include "flowcast/io.hpp"
#include "flowcast/microsim.hpp"
#include "flowcast/nn/checkpoint.hpp"
#include "flowcast/nn/trainer.hpp"
#include "flowcast/svg.hpp"

namespace flowcast::cli {

using json = nlohmann::json;

namespace {

template <class T>
struct is_vector : std::false_type {};
template <class T>
struct is_vector<std::vector<T>> : std::true_type {};

struct Field {
  std::string key;
  std::string help;
  std::function<void(RunConfig&, const json&)> set;
  std::function<json(const RunConfig&)> get;
  std::function<CLI::Option*(CLI::App&, const std::string& flag, json& overrides)> add;
};

template <class M>
Field field(std::string key, std::string help, M RunConfig::*member) {
  constexpr bool is_path = std::is_same_v<M, std::filesystem::path>;
  using Arg = std::conditional_t<is_path, std::string, M>;
  Field f;
  f.key = key;
  f.help = help;
  f.set = [member, key](RunConfig& c, const json& v) {
    try {
      c.*member = v.get<Arg>();
    } catch (const json::exception&) {
      throw InputError("config key '" + key + "' has the wrong type");
    }
  };
  f.get = [member](const RunConfig& c) {
    if constexpr (is_path) return json((c.*member).string());
    else return json(c.*member);
  };
  f.add = [key, help](CLI::App& app, const std::string& flag, json& overrides) {
    auto* opt = app.add_option_function<Arg>(
        flag, [&overrides, key](const Arg& v) { overrides[key] = v; }, help);
    if constexpr (is_vector<Arg>::value) opt->delimiter(',');
    return opt;
  };
  return f;
}

const std::vector<Field>& fields() {
  static const std::vector<Field> all = {
      field("counts", "15-minute counts CSV", &RunConfig::counts),
      field("stations", "station metadata CSV", &RunConfig::stations),
      field("travel_times", "pairwise travel-time CSV", &RunConfig::travel_times),
      field("checkpoint", "model checkpoint", &RunConfig::checkpoint),
      field("intervals", "interval CSV written by predict", &RunConfig::intervals),
      field("out", "output directory", &RunConfig::out),
      field("seed", "random seed", &RunConfig::seed),
      field("quiet", "suppress progress output", &RunConfig::quiet),
      field("look_back", "input window length in 15-minute steps", &RunConfig::look_back),
      field("horizon", "forecast steps", &RunConfig::horizon),
      field("gcn_dims", "graph-convolution widths, comma separated", &RunConfig::gcn_dims),
      field("gcn_activation", "relu or linear", &RunConfig::gcn_activation),
      field("lstm_hidden", "LSTM widths, comma separated", &RunConfig::lstm_hidden),
      field("epochs", "maximum training epochs", &RunConfig::epochs),
      field("batch_size", "mini-batch size", &RunConfig::batch_size),
      field("patience", "early-stopping patience in epochs", &RunConfig::patience),
      field("min_delta", "smallest validation improvement that resets patience", &RunConfig::min_delta),
      field("learning_rate", "RMSprop learning rate", &RunConfig::learning_rate),
      field("alpha", "miscoverage level of the intervals", &RunConfig::alpha),
      field("train_fraction", "share of windows used for training", &RunConfig::train_fraction),
      field("val_fraction", "share of windows used for validation", &RunConfig::val_fraction),
      field("kernel_mode", "gaussian or inverse-time", &RunConfig::kernel_mode),
      field("sigma2", "gaussian kernel variance", &RunConfig::sigma2),
      field("epsilon", "inverse-time kernel offset", &RunConfig::epsilon),
      field("models", "models to compare: proposed, LSTM, HA, AR, FNN", &RunConfig::models),
      field("ar_order", "AR order", &RunConfig::ar_order),
      field("fnn_hidden", "FNN hidden width", &RunConfig::fnn_hidden),
      field("baseline_lstm_hidden", "plain LSTM hidden width", &RunConfig::baseline_lstm_hidden),
      field("split", "windows to forecast: test or all", &RunConfig::split),
      field("station", "station id for charts and demand", &RunConfig::station),
      field("runs", "Monte-Carlo runs", &RunConfig::runs),
      field("dt", "simulation time step in seconds", &RunConfig::dt),
      field("demand_vph", "demand in vehicles per hour, overrides the interval file", &RunConfig::demand_vph),
      field("date", "day of the demand window, YYYY-MM-DD", &RunConfig::date),
      field("window_start", "start of the demand window, HH:MM", &RunConfig::window_start),
      field("window_end", "end of the demand window, HH:MM", &RunConfig::window_end),
      field("corridor_length", "corridor length in metres", &RunConfig::corridor_length),
      field("v_desired", "desired speed in m/s", &RunConfig::v_desired),
      field("max_horizon_s", "runs whose VUT has not exited after this many seconds are excluded",
            &RunConfig::max_horizon_s),
      field("n_stations", "stations in the synthetic corpus", &RunConfig::n_stations),
      field("days", "days in the synthetic corpus", &RunConfig::days),
  };
  return all;
}

const Field& field_for(const std::string& key) {
  for (const auto& f : fields())
    if (f.key == key) return f;
  throw std::logic_error("no config field " + key);
}

std::string flag_of(std::string key) {
  std::ranges::replace(key, '_', '-');
  return "--" + key;
}

// ---------------------------------------------------------------------------

class Context {
 public:
  Context(const RunConfig& c, std::ostream& out) : c(c), out_(out) {}
  const RunConfig& c;

  template <class... A>
  void say(const A&... parts) {
    if (c.quiet) return;
    (out_ << ... << parts) << '\n';
  }
  std::ostream& out() { return out_; }

  std::filesystem::path output(const std::string& name) const { return c.out / name; }

  void prepare_out() const {
    std::error_code ec;
    std::filesystem::create_directories(c.out, ec);
    if (ec || !std::filesystem::is_directory(c.out)) throw InputError("cannot create output directory " + c.out.string());
  }

 private:
  std::ostream& out_;
};

const std::filesystem::path& require_file(const std::filesystem::path& p, const char* what) {
  if (p.empty()) throw InputError(std::string("missing --") + what);
  if (!std::filesystem::is_regular_file(p)) throw InputError(std::string(what) + " file not found: " + p.string());
  return p;
}

template <class Writer>
void write_with(const std::filesystem::path& path, Writer&& w) {
  io::atomic_write(path, [&](const std::filesystem::path& tmp) { w(tmp); });
}

data::SplitFractions fractions(const RunConfig& c) {
  return {c.train_fraction, c.val_fraction, 1.0 - c.train_fraction - c.val_fraction};
}

nn::ModelConfig model_config(const RunConfig& c, std::size_t stations) {
  nn::ModelConfig m;
  m.stations = stations;
  m.look_back = c.look_back;
  m.horizon = c.horizon;
  m.gcn_dims = c.gcn_dims;
  m.gcn_activation = c.gcn_activation == "linear" ? nn::Activation::Linear : nn::Activation::ReLU;
  m.lstm_hidden = c.lstm_hidden;
  m.seed = c.seed;
  return m;
}

nn::TrainConfig train_config(const RunConfig& c) {
  nn::TrainConfig t;
  t.epochs = c.epochs;
  t.batch_size = c.batch_size;
  t.patience = c.patience;
  t.min_delta = c.min_delta;
  t.optimizer.learning_rate = c.learning_rate;
  t.alpha = c.alpha;
  t.seed = c.seed;
  return t;
}

graph::WeightedAdjacency adjacency_for(const RunConfig& c, const std::vector<data::StationMeta>& stations) {
  std::vector<std::string> ids;
  for (const auto& s : stations) ids.push_back(s.station_id);
  const auto travel = graph::load_travel_times(require_file(c.travel_times, "travel-times"), ids);
  graph::AdjacencyOptions opt;
  opt.mode = graph::parse_kernel_mode(c.kernel_mode);
  opt.sigma2 = c.sigma2;
  opt.epsilon = c.epsilon;
  return graph::build_adjacency(travel, graph::availability_scores(stations), opt);
}

data::LoadedCounts load_counts(const RunConfig& c) {
  return data::load_counts(require_file(c.counts, "counts"), require_file(c.stations, "stations"));
}

std::string echo(const RunConfig& c) {
  auto j = to_json(c);
  j.erase("out");
  j.erase("quiet");
  return j.dump();
}

std::string adjacency_csv(const std::vector<std::string>& ids, const Tensor& m) {
  std::ostringstream s;
  s << "station_id";
  for (const auto& id : ids) s << ',' << id;
  s << '\n';
  for (std::size_t i = 0; i < ids.size(); ++i) {
    s << ids[i];
    for (std::size_t j = 0; j < ids.size(); ++j) s << ',' << csv::format_double(m(i, j));
    s << '\n';
  }
  return s.str();
}

std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// ---------------------------------------------------------------------------

int cmd_synth(Context& ctx) {
  const auto& c = ctx.c;
  data::SynthOptions opt;
  opt.n_stations = c.n_stations;
  opt.days = c.days;
  opt.seed = c.seed;
  const auto corpus = data::synth_corpus(opt);
  ctx.prepare_out();
  write_with(ctx.output("counts.csv"), [&](const auto& p) { data::write_counts_csv(corpus.frame, p); });
  write_with(ctx.output("stations.csv"), [&](const auto& p) { data::write_stations_csv(corpus.stations, p); });
  write_with(ctx.output("travel_times.csv"), [&](const auto& p) { data::write_travel_csv(corpus, p); });
  ctx.say("wrote ", corpus.frame.stations(), " stations x ", corpus.frame.timesteps(), " intervals to ", c.out.string());
  return 0;
}

int cmd_build_adj(Context& ctx) {
  const auto& c = ctx.c;
  const auto stations = c.counts.empty() ? data::load_stations(require_file(c.stations, "stations"))
                                         : load_counts(c).stations;
  const auto adj = adjacency_for(c, stations);
  std::vector<std::string> ids;
  for (const auto& s : stations) ids.push_back(s.station_id);
  const auto svg_text = svg::heatmap("Adjacency (" + graph::to_string(adj.mode) + ")", ids, adj.modified);
  ctx.prepare_out();
  io::atomic_write_text(ctx.output("adjacency.csv"), adjacency_csv(ids, adj.modified));
  io::atomic_write_text(ctx.output("adjacency.svg"), svg_text);
  ctx.say("adjacency ", ids.size(), "x", ids.size(), " fingerprint ", hex(adj.fingerprint()));
  return 0;
}

struct Trained {
  nn::GcnLstmTraining training;
  data::PreparedData prepared;
  data::LoadedCounts loaded;
  graph::WeightedAdjacency adjacency;
};

Trained train_proposed(Context& ctx) {
  const auto& c = ctx.c;
  auto loaded = load_counts(c);
  auto adjacency = adjacency_for(c, loaded.stations);
  auto prepared = data::prepare(loaded.frame, c.look_back, c.horizon, fractions(c));
  auto tc = train_config(c);
  tc.on_epoch = [&ctx](const nn::EpochRecord& r) {
    if (r.epoch % 10 == 0 || r.epoch == 1)
      ctx.say("epoch ", r.epoch, " train ", r.train_loss, " val ", r.val_loss, " q ", r.q_adjusted);
  };
  auto training = nn::train(prepared.splits, adjacency, model_config(c, loaded.frame.stations()), tc);
  return {std::move(training), std::move(prepared), std::move(loaded), std::move(adjacency)};
}

int cmd_train(Context& ctx) {
  const auto& c = ctx.c;
  auto t = train_proposed(ctx);
  const auto& report = t.training.report;

  nn::Checkpoint ck;
  ck.config = t.training.model.config();
  ck.params = t.training.model.params();
  ck.adjacency = t.adjacency;
  ck.station_ids = t.loaded.frame.station_ids;
  ck.norm = t.prepared.norm;
  ck.alpha = t.training.quantile.alpha;
  ck.q_adjusted = t.training.quantile.q_adjusted;
  ck.config_echo = echo(c);

  std::vector<double> epochs, train_loss, val_loss, val_mae, q;
  for (const auto& r : report.epochs) {
    epochs.push_back(static_cast<double>(r.epoch));
    train_loss.push_back(r.train_loss);
    val_loss.push_back(r.val_loss);
    val_mae.push_back(r.val_mae);
    q.push_back(r.q_adjusted);
  }
  const auto loss_svg = svg::line_chart({"Loss versus epochs", "epoch", "MSE (normalized)"},
                                        {{"train", epochs, train_loss, "#1f77b4"},
                                         {"validation", epochs, val_loss, "#ff7f0e", true}});
  const auto mae_svg = svg::line_chart({"Validation MAE and conformal quantile", "epoch", "normalized flow"},
                                       {{"val MAE", epochs, val_mae, "#2ca02c"},
                                        {"q_adjusted", epochs, q, "#d62728", true}});
  ctx.prepare_out();
  nn::save_checkpoint(ck, ctx.output("model.ckpt"));
  write_with(ctx.output("train_report.csv"), [&](const auto& p) { report.write_csv(p); });
  io::atomic_write_text(ctx.output("loss.svg"), loss_svg);
  io::atomic_write_text(ctx.output("val_mae.svg"), mae_svg);
  const auto& best = report.epochs[report.best_epoch - 1];
  ctx.say("stopped after ", report.stopped_epoch, " epochs, best ", report.best_epoch, " val_mae ", best.val_mae,
          " q_adjusted ", ck.q_adjusted.value_or(NAN));
  return 0;
}

int cmd_predict(Context& ctx) {
  const auto& c = ctx.c;
  const auto ck = nn::load_checkpoint(require_file(c.checkpoint, "checkpoint"));
  const auto loaded = load_counts(c);
  if (loaded.frame.station_ids != ck.station_ids) {
    throw InputError("counts stations do not match the checkpoint's stations");
  }
  if (!ck.q_adjusted) throw StateError("checkpoint has no conformal quantile");
  const auto normalized = data::apply_normalization(loaded.frame, ck.norm);
  auto ds = data::window(normalized, ck.config.look_back, ck.config.horizon);
  if (c.split == "test") ds = data::split(ds, fractions(c)).test;
  if (ds.size() == 0) throw SizeError("no windows to forecast");

  const auto model = ck.model();
  const Tensor forecast = nn::predict(model, ds.inputs);
  conformal::QuantileState state;
  state.alpha = ck.alpha;
  state.q_adjusted = ck.q_adjusted;
  const auto batch = conformal::intervals(forecast, state);
  const double coverage = conformal::picp(batch, ds.targets);
  const double width = conformal::mpiw(batch);

  const std::size_t n = ds.stations();
  std::vector<conformal::IntervalRecord> records;
  records.reserve(forecast.size());
  for (std::size_t k = 0; k < ds.size(); ++k)
    for (std::size_t h = 0; h < ds.horizon; ++h)
      for (std::size_t s = 0; s < n; ++s) {
        const double y = ds.targets(k, h, s), lo = batch.lower(k, h, s), hi = batch.upper(k, h, s);
        conformal::IntervalRecord r;
        r.sample = k;
        r.station = ck.station_ids[s];
        r.t = ds.target_times[k] + std::chrono::duration_cast<std::chrono::seconds>(data::kInterval) * static_cast<long>(h);
        r.forecast = ck.norm.denormalize(s, forecast(k, h, s));
        r.lower = ck.norm.denormalize(s, lo);
        r.upper = ck.norm.denormalize(s, hi);
        r.actual = ck.norm.denormalize(s, y);
        r.covered = lo <= y && y <= hi;
        records.push_back(std::move(r));
      }

  std::size_t station = 0;
  if (!c.station.empty()) {
    const auto it = std::ranges::find(ck.station_ids, c.station);
    if (it == ck.station_ids.end()) throw UnknownStationError(c.station);
    station = static_cast<std::size_t>(it - ck.station_ids.begin());
  }
  const std::size_t shown = std::min<std::size_t>(ds.size(), 2 * data::kIntervalsPerDay);
  svg::Series actual{"actual", {}, {}, "#333333"}, predicted{"forecast", {}, {}, "#1f77b4", true};
  svg::Band band{{}, {}, {}, "#1f77b4"};
  for (std::size_t k = ds.size() - shown; k < ds.size(); ++k) {
    const double x = static_cast<double>(k - (ds.size() - shown)) / 4.0;
    const auto& r = records[(k * ds.horizon) * n + station];
    actual.xs.push_back(x);
    actual.ys.push_back(r.actual);
    predicted.xs.push_back(x);
    predicted.ys.push_back(r.forecast);
    band.xs.push_back(x);
    band.lower.push_back(r.lower);
    band.upper.push_back(r.upper);
  }
  const auto chart = svg::line_chart(
      {"Prediction with uncertainty bounds, station " + ck.station_ids[station], "hours", "vehicles per 15 min"},
      {actual, predicted}, band);

  ctx.prepare_out();
  write_with(ctx.output("intervals.csv"), [&](const auto& p) { conformal::write_intervals_csv(records, p); });
  io::atomic_write_text(ctx.output("bounds.svg"), chart);
  ctx.out() << "PICP " << csv::format_double(coverage) << " MPIW " << csv::format_double(width) << " q_adjusted "
            << csv::format_double(*ck.q_adjusted) << " points " << forecast.size() << '\n';
  return 0;
}

int cmd_eval(Context& ctx) {
  const auto& c = ctx.c;
  if (c.models.empty()) throw InputError("no models requested");
  std::vector<std::shared_ptr<const eval::Forecaster>> models;
  auto loaded = load_counts(c);
  auto prepared = data::prepare(loaded.frame, c.look_back, c.horizon, fractions(c));
  const auto& splits = prepared.splits;

  eval::BaselineConfig bc;
  bc.ar_order = c.ar_order;
  bc.fnn_hidden = c.fnn_hidden;
  bc.lstm_hidden = c.baseline_lstm_hidden;
  bc.train = train_config(c);

  for (const auto& name : c.models) {
    std::string lower = name;
    std::ranges::transform(lower, lower.begin(), [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
    if (lower == "proposed") {
      std::shared_ptr<nn::GcnLstmModel> model;
      if (!c.checkpoint.empty()) {
        const auto ck = nn::load_checkpoint(require_file(c.checkpoint, "checkpoint"));
        if (ck.station_ids != loaded.frame.station_ids || ck.config.look_back != c.look_back ||
            ck.config.horizon != c.horizon) {
          throw InputError("checkpoint does not match the counts file or the look-back/horizon settings");
        }
        model = std::make_shared<nn::GcnLstmModel>(ck.model());
      } else {
        ctx.say("training proposed model");
        model = std::make_shared<nn::GcnLstmModel>(train_proposed(ctx).training.model);
      }
      models.push_back(std::make_shared<eval::SequenceForecaster>(model, "proposed"));
    } else {
      const auto variant = eval::parse_baseline(name);
      ctx.say("fitting ", eval::to_string(variant));
      const auto fitted = eval::fit_baseline(variant, splits, bc, c.seed);
      for (const auto& note : fitted.notes) ctx.say("  ", note);
      models.push_back(fitted.forecaster);
    }
  }
  const auto rows = eval::compare(models, splits.test);
  ctx.prepare_out();
  write_with(ctx.output("comparison.csv"), [&](const auto& p) {
    eval::write_comparison_csv(rows, c.seed, eval::dataset_fingerprint(splits.test), p);
  });
  for (const auto& r : rows) ctx.say(r.model, "  MAE ", r.metrics.mae, "  RMSE ", r.metrics.rmse);
  return 0;
}

csv::Timestamp at_clock(const std::string& date, const std::string& hhmm) {
  const auto t = csv::parse_timestamp(date + "T" + hhmm);
  if (!t) throw InputError("bad date or time '" + date + " " + hhmm + "'");
  return *t;
}

double demand_from_intervals(Context& ctx) {
  const auto& c = ctx.c;
  const auto records = conformal::read_intervals_csv(require_file(c.intervals, "intervals"));
  if (records.empty()) throw SizeError("interval file has no rows");
  const std::string station = c.station.empty() ? records.front().station : c.station;
  std::map<csv::Timestamp, std::pair<double, double>> by_time;
  for (const auto& r : records)
    if (r.station == station) {
      auto& [sum, n] = by_time[r.t];
      sum += r.upper;
      n += 1.0;
    }
  if (by_time.empty()) throw UnknownStationError(station);
  std::vector<csv::Timestamp> times;
  std::vector<double> upper;
  for (const auto& [t, acc] : by_time) {
    times.push_back(t);
    upper.push_back(acc.first / acc.second);
  }

  std::string date = c.date;
  if (date.empty()) {
    // First day whose window is fully covered.
    for (const auto& t : times) {
      const std::string day = csv::format_timestamp(t).substr(0, 10);
      const auto s = at_clock(day, c.window_start), e = at_clock(day, c.window_end);
      std::size_t have = 0;
      for (auto u = s; u < e; u += data::kInterval) have += by_time.count(u);
      if (e > s && have == static_cast<std::size_t>((e - s) / data::kInterval)) {
        date = day;
        break;
      }
    }
    if (date.empty()) throw DomainError("no day in the interval file covers " + c.window_start + "-" + c.window_end);
  }
  const double demand = sim::demand_from_flows(upper, times, at_clock(date, c.window_start), at_clock(date, c.window_end));
  ctx.say("demand ", demand, " veh/h from station ", station, " on ", date, " ", c.window_start, "-", c.window_end);
  return demand;
}

int cmd_simulate(Context& ctx) {
  const auto& c = ctx.c;
  sim::SimConfig cfg;
  cfg.dt = c.dt;
  cfg.n_runs = c.runs;
  cfg.max_horizon_s = c.max_horizon_s;
  cfg.seed = c.seed;
  cfg.demand_vph = c.demand_vph > 0 ? c.demand_vph : demand_from_intervals(ctx);
  sim::Corridor corridor;
  corridor.length = c.corridor_length;
  corridor.speed_limit = c.v_desired;
  sim::IdmParams p;
  p.v_desired = c.v_desired;

  const auto dist = sim::monte_carlo(corridor, p, cfg);
  const auto s = dist.summary();
  const auto chart = svg::histogram({"VUT travel time", "travel time (min)", "density"}, dist.samples);
  ctx.prepare_out();
  write_with(ctx.output("travel_time_samples.csv"), [&](const auto& path) { dist.write_csv(path); });
  write_with(ctx.output("travel_time_summary.json"), [&](const auto& path) { dist.write_summary_json(path); });
  io::atomic_write_text(ctx.output("travel_time_hist.svg"), chart);
  ctx.say("runs ", dist.samples.size(), " excluded ", dist.excluded.size(), " mean ", s.mean, " min  p5 ", s.p5,
          "  p50 ", s.p50, "  p95 ", s.p95);
  return 0;
}

struct Command {
  const char* name;
  const char* help;
  std::vector<std::pair<std::string, std::string>> options;  // flag, key
  int (*fn)(Context&);
};

std::vector<std::pair<std::string, std::string>> keys(std::initializer_list<const char*> ks) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const char* k : ks) out.emplace_back(flag_of(k), k);
  return out;
}

std::vector<Command> commands() {
  const auto data_keys = {"counts", "stations", "travel_times", "kernel_mode", "sigma2", "epsilon"};
  auto train_keys = keys(data_keys);
  for (auto& k : keys({"look_back", "horizon", "gcn_dims", "gcn_activation", "lstm_hidden", "epochs", "batch_size",
                       "patience", "min_delta", "learning_rate", "alpha", "train_fraction", "val_fraction"}))
    train_keys.push_back(k);
  auto eval_keys = train_keys;
  for (auto& k : keys({"checkpoint", "models", "ar_order", "fnn_hidden", "baseline_lstm_hidden"})) eval_keys.push_back(k);
  auto sim_keys = keys({"intervals", "station", "runs", "dt", "date", "window_start", "window_end", "corridor_length",
                        "v_desired", "max_horizon_s"});
  sim_keys.emplace_back("--demand", "demand_vph");
  return {
      {"synth", "write a synthetic corridor corpus", {{"--stations", "n_stations"}, {"--days", "days"}}, cmd_synth},
      {"build-adj", "build the weighted adjacency matrix", keys(data_keys), cmd_build_adj},
      {"train", "train the graph model and calibrate intervals", train_keys, cmd_train},
      {"predict", "forecast with conformal intervals",
       keys({"counts", "stations", "checkpoint", "split", "station", "train_fraction", "val_fraction"}), cmd_predict},
      {"eval", "compare the model with baselines", eval_keys, cmd_eval},
      {"simulate", "Monte-Carlo travel-time simulation", sim_keys, cmd_simulate},
  };
}

json read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw InputError("config " + path.string() + ": " + e.what());
  }
}

}  // namespace

void RunConfig::validate() const {
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("alpha must be in (0, 1)");
  if (look_back == 0 || horizon == 0) throw DomainError("look-back and horizon must be at least 1");
  if (epochs == 0 || batch_size == 0) throw DomainError("epochs and batch size must be at least 1");
  if (!(learning_rate > 0.0)) throw DomainError("learning rate must be positive");
  if (!(train_fraction > 0.0 && val_fraction > 0.0 && train_fraction + val_fraction < 1.0)) {
    throw DomainError("train and validation fractions must be positive and leave room for a test split");
  }
  if (gcn_activation != "relu" && gcn_activation != "linear") throw DomainError("gcn-activation must be relu or linear");
  graph::parse_kernel_mode(kernel_mode);
  if (split != "test" && split != "all") throw DomainError("split must be test or all");
  if (runs == 0) throw DomainError("runs must be at least 1");
  if (!(dt > 0.0)) throw DomainError("dt must be positive");
  if (demand_vph < 0.0) throw DomainError("demand must not be negative");
}

void apply_json(RunConfig& config, const json& j) {
  if (!j.is_object()) throw InputError("config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    const auto it = std::ranges::find_if(fields(), [&](const Field& f) { return f.key == key; });
    if (it == fields().end()) throw InputError("unknown config key '" + key + "'");
    it->set(config, value);
  }
}

nlohmann::ordered_json to_json(const RunConfig& config) {
  nlohmann::ordered_json j;
  for (const auto& f : fields()) j[f.key] = f.get(config);
  return j;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Traffic flow forecasting with graph networks, conformal intervals and corridor simulation",
               "flowcast"};
  app.require_subcommand(1);
  app.fallthrough();
  json overrides = json::object();
  std::string config_path;
  app.add_option("--config", config_path, "JSON config file; flags override it");
  field_for("seed").add(app, "--seed", overrides);
  field_for("out").add(app, "--out", overrides);
  app.add_flag_function("--quiet", [&](std::int64_t) { overrides["quiet"] = true; }, "suppress progress output");

  const auto cmds = commands();
  std::vector<CLI::App*> subs;
  for (const auto& cmd : cmds) {
    auto* sub = app.add_subcommand(cmd.name, cmd.help);
    for (const auto& [flag, key] : cmd.options) {
      const auto& f = field_for(key);
      f.add(*sub, flag, overrides);
    }
    subs.push_back(sub);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    RunConfig config;
    if (!config_path.empty()) apply_json(config, read_config_file(config_path));
    apply_json(config, overrides);
    config.validate();
    Context ctx(config, out);
    for (std::size_t i = 0; i < cmds.size(); ++i)
      if (subs[i]->parsed()) return cmds[i].fn(ctx);
    return 2;
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 3;
  }
}

}  // namespace flowcast::cli
