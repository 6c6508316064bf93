#include "flowcast/data.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <unordered_map>

#include "flowcast/errors.hpp"
#include "flowcast/rng.hpp"

namespace flowcast::data {

double NormalizationParams::normalize(std::size_t station, double x) const {
  if (is_sentinel(x)) return x;
  const double range = max[station] - min[station];
  if (range <= 0.0) return 0.0;
  return (x - min[station]) / range;
}

double NormalizationParams::denormalize(std::size_t station, double y) const {
  if (is_sentinel(y)) return y;
  return y * (max[station] - min[station]) + min[station];
}

WindowedDataset WindowedDataset::slice(std::size_t begin, std::size_t end) const {
  if (begin > end || end > size()) throw SizeError("dataset slice out of range");
  const std::size_t n = end - begin;
  const std::size_t stations_n = stations();
  WindowedDataset out;
  out.look_back = look_back;
  out.horizon = horizon;
  out.inputs = Tensor({n, look_back, stations_n});
  out.targets = Tensor({n, horizon, stations_n});
  for (std::size_t k = 0; k < n; ++k) {
    std::ranges::copy(inputs.slab(begin + k), out.inputs.slab(k).begin());
    std::ranges::copy(targets.slab(begin + k), out.targets.slab(k).begin());
  }
  out.origins.assign(origins.begin() + static_cast<std::ptrdiff_t>(begin),
                     origins.begin() + static_cast<std::ptrdiff_t>(end));
  out.target_times.assign(target_times.begin() + static_cast<std::ptrdiff_t>(begin),
                          target_times.begin() + static_cast<std::ptrdiff_t>(end));
  return out;
}

std::string to_string(StationKind kind) { return kind == StationKind::CCS ? "CCS" : "NCCS"; }

std::size_t slot_of_day(Timestamp t) {
  using namespace std::chrono;
  const auto since_midnight = t - floor<days>(t);
  return static_cast<std::size_t>(duration_cast<minutes>(since_midnight) / kInterval);
}

unsigned weekday_of(Timestamp t) {
  return std::chrono::weekday{std::chrono::floor<std::chrono::days>(t)}.c_encoding();
}

std::vector<StationMeta> load_stations(const std::filesystem::path& meta_path) {
  const auto table = csv::read(meta_path);
  csv::require_header(table, {"station_id", "kind", "lat", "lon", "record_count"});
  std::vector<StationMeta> out;
  std::set<std::string> seen;
  for (const auto& row : table.rows) {
    StationMeta meta;
    meta.station_id = row.fields[0];
    if (meta.station_id.empty()) throw ParseError(table.source, row.line, "empty station_id");
    if (!seen.insert(meta.station_id).second) {
      throw DuplicationError(table.source + ":" + std::to_string(row.line) +
                             ": duplicate station '" + meta.station_id + "'");
    }
    if (row.fields[1] == "CCS") {
      meta.kind = StationKind::CCS;
    } else if (row.fields[1] == "NCCS") {
      meta.kind = StationKind::NCCS;
    } else {
      throw ParseError(table.source, row.line, "kind must be CCS or NCCS, got '" + row.fields[1] + "'");
    }
    meta.position.latitude_deg = csv::parse_double(table, row, 2);
    meta.position.longitude_deg = csv::parse_double(table, row, 3);
    meta.record_count = csv::parse_uint(table, row, 4);
    out.push_back(std::move(meta));
  }
  return out;
}

LoadedCounts load_counts(const std::filesystem::path& counts_path,
                         const std::filesystem::path& meta_path) {
  const auto meta = load_stations(meta_path);
  std::unordered_map<std::string, std::size_t> meta_index;
  for (std::size_t i = 0; i < meta.size(); ++i) meta_index.emplace(meta[i].station_id, i);

  const auto table = csv::read(counts_path);
  csv::require_header(table, {"station_id", "timestamp", "count"});

  struct Cell {
    std::size_t station;
    Timestamp time;
    double value;
  };
  std::vector<Cell> cells;
  cells.reserve(table.rows.size());
  std::vector<std::set<Timestamp>> seen(meta.size());
  std::vector<std::optional<Timestamp>> last(meta.size());
  for (const auto& row : table.rows) {
    const auto it = meta_index.find(row.fields[0]);
    if (it == meta_index.end()) throw UnknownStationError(row.fields[0]);
    const std::size_t s = it->second;
    const auto t = csv::parse_timestamp(row.fields[1]);
    if (!t) {
      throw ParseError(table.source, row.line, "bad timestamp '" + row.fields[1] + "'");
    }
    const auto count = csv::parse_optional_double(table, row, 2);
    if (count && *count < 0.0) {
      throw ParseError(table.source, row.line, "negative count");
    }
    if (!seen[s].insert(*t).second) {
      throw DuplicationError(table.source + ":" + std::to_string(row.line) + ": duplicate record for station '" +
                             row.fields[0] + "' at " + row.fields[1]);
    }
    if (last[s] && *t < *last[s]) {
      throw OrderError(table.source + ":" + std::to_string(row.line) +
                       ": timestamps for station '" + row.fields[0] + "' are not increasing");
    }
    last[s] = *t;
    cells.push_back({s, *t, count ? *count : kSentinel});
  }
  if (cells.empty()) throw SizeError(table.source + ": no count records");

  Timestamp t0 = cells.front().time;
  Timestamp t1 = t0;
  for (const auto& c : cells) {
    t0 = std::min(t0, c.time);
    t1 = std::max(t1, c.time);
  }
  const auto step = std::chrono::duration_cast<std::chrono::seconds>(kInterval);
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if ((cells[i].time - t0) % step != std::chrono::seconds{0}) {
      throw ParseError(table.source, table.rows[i].line, "timestamp is off the 15-minute grid");
    }
  }

  // Columns: metadata order, stations that have at least one record.
  std::vector<std::size_t> column_of(meta.size(), meta.size());
  LoadedCounts out;
  for (std::size_t i = 0; i < meta.size(); ++i) {
    if (seen[i].empty()) continue;
    column_of[i] = out.stations.size();
    out.stations.push_back(meta[i]);
    out.frame.station_ids.push_back(meta[i].station_id);
  }
  const auto rows = static_cast<std::size_t>((t1 - t0) / step) + 1;
  out.frame.values = Tensor({rows, out.stations.size()}, kSentinel);
  out.frame.timestamps.reserve(rows);
  for (std::size_t r = 0; r < rows; ++r) out.frame.timestamps.push_back(t0 + step * static_cast<long>(r));
  for (const auto& c : cells) {
    const auto r = static_cast<std::size_t>((c.time - t0) / step);
    out.frame.values(r, column_of[c.station]) = c.value;
  }
  return out;
}

NormalizationParams fit_normalization(const FlowFrame& frame, std::size_t row_end) {
  row_end = std::min(row_end, frame.timesteps());
  NormalizationParams p;
  const std::size_t n = frame.stations();
  p.min.assign(n, 0.0);
  p.max.assign(n, 0.0);
  for (std::size_t s = 0; s < n; ++s) {
    bool any = false;
    for (std::size_t t = 0; t < row_end; ++t) {
      const double v = frame.at(t, s);
      if (is_sentinel(v)) continue;
      if (!any) {
        p.min[s] = p.max[s] = v;
        any = true;
      } else {
        p.min[s] = std::min(p.min[s], v);
        p.max[s] = std::max(p.max[s], v);
      }
    }
  }
  return p;
}

FlowFrame apply_normalization(const FlowFrame& frame, const NormalizationParams& params) {
  if (params.stations() != frame.stations()) {
    throw StructuralError("normalization has " + std::to_string(params.stations()) +
                          " stations, frame has " + std::to_string(frame.stations()));
  }
  FlowFrame out = frame;
  for (std::size_t t = 0; t < frame.timesteps(); ++t) {
    for (std::size_t s = 0; s < frame.stations(); ++s) {
      out.values(t, s) = params.normalize(s, frame.at(t, s));
    }
  }
  return out;
}

FlowFrame denormalize(const FlowFrame& frame, const NormalizationParams& params) {
  if (params.stations() != frame.stations()) {
    throw StructuralError("normalization/frame station count mismatch");
  }
  FlowFrame out = frame;
  for (std::size_t t = 0; t < frame.timesteps(); ++t) {
    for (std::size_t s = 0; s < frame.stations(); ++s) {
      out.values(t, s) = params.denormalize(s, frame.at(t, s));
    }
  }
  return out;
}

std::pair<FlowFrame, NormalizationParams> normalize(const FlowFrame& frame) {
  auto params = fit_normalization(frame, frame.timesteps());
  return {apply_normalization(frame, params), std::move(params)};
}

WindowedDataset window(const FlowFrame& frame, std::size_t look_back, std::size_t horizon) {
  if (look_back == 0 || horizon == 0) throw SizeError("look_back and horizon must be positive");
  const std::size_t span = look_back + horizon;
  const std::size_t steps = frame.timesteps();
  if (steps < span) {
    throw SizeError("frame has " + std::to_string(steps) + " timesteps, need at least " +
                    std::to_string(span));
  }
  const std::size_t n_st = frame.stations();

  // A row is clean when it has no sentinel; a window survives when all its rows are clean.
  std::vector<std::size_t> dirty_prefix(steps + 1, 0);
  for (std::size_t t = 0; t < steps; ++t) {
    bool dirty = false;
    for (std::size_t s = 0; s < n_st; ++s) dirty = dirty || is_sentinel(frame.at(t, s));
    dirty_prefix[t + 1] = dirty_prefix[t] + (dirty ? 1 : 0);
  }
  std::vector<std::size_t> origins;
  for (std::size_t o = 0; o + span <= steps; ++o) {
    if (dirty_prefix[o + span] == dirty_prefix[o]) origins.push_back(o);
  }

  WindowedDataset ds;
  ds.look_back = look_back;
  ds.horizon = horizon;
  ds.inputs = Tensor({origins.size(), look_back, n_st});
  ds.targets = Tensor({origins.size(), horizon, n_st});
  ds.target_times.reserve(origins.size());
  for (std::size_t k = 0; k < origins.size(); ++k) {
    const std::size_t o = origins[k];
    for (std::size_t l = 0; l < look_back; ++l) {
      for (std::size_t s = 0; s < n_st; ++s) ds.inputs(k, l, s) = frame.at(o + l, s);
    }
    for (std::size_t h = 0; h < horizon; ++h) {
      for (std::size_t s = 0; s < n_st; ++s) ds.targets(k, h, s) = frame.at(o + look_back + h, s);
    }
    ds.target_times.push_back(frame.timestamps[o + look_back]);
  }
  ds.origins = std::move(origins);
  return ds;
}

DatasetSplits split(const WindowedDataset& ds, SplitFractions f) {
  if (!(f.train >= 0.0 && f.val >= 0.0 && f.test >= 0.0) ||
      std::abs(f.train + f.val + f.test - 1.0) > 1e-9) {
    throw DomainError("split fractions must be nonnegative and sum to 1");
  }
  const std::size_t n = ds.size();
  // The small slack keeps products such as 0.7 * 100 from flooring to 69.
  const auto n_train = static_cast<std::size_t>(std::floor(static_cast<double>(n) * f.train + 1e-9));
  const auto n_val = static_cast<std::size_t>(std::floor(static_cast<double>(n) * f.val + 1e-9));
  const std::size_t used = std::min(n, n_train + n_val);
  const std::size_t n_test = n - used;
  if (n_train == 0 || n_val == 0 || n_test == 0 || f.test <= 0.0) {
    throw SizeError("split of " + std::to_string(n) + " samples leaves an empty partition (" +
                    std::to_string(n_train) + "/" + std::to_string(n_val) + "/" +
                    std::to_string(n_test) + ")");
  }
  return {ds.slice(0, n_train), ds.slice(n_train, n_train + n_val), ds.slice(n_train + n_val, n)};
}

PreparedData prepare(const FlowFrame& raw, std::size_t look_back, std::size_t horizon,
                     SplitFractions fractions) {
  const auto raw_windows = window(raw, look_back, horizon);
  const auto raw_splits = split(raw_windows, fractions);
  const std::size_t fit_end = raw_splits.train.origins.back() + look_back + horizon;
  PreparedData out;
  out.norm = fit_normalization(raw, fit_end);
  out.normalized = apply_normalization(raw, out.norm);
  out.splits = split(window(out.normalized, look_back, horizon), fractions);
  return out;
}

namespace {

// Smooth bump centred at `centre_h` hours with half-width `width_h`.
double peak(double hour, double centre_h, double width_h) {
  const double d = (hour - centre_h) / width_h;
  if (std::abs(d) >= 1.0) return 0.0;
  return 0.5 * (1.0 + std::cos(std::numbers::pi * d));
}

}  // namespace

SyntheticCorpus synth_corpus(const SynthOptions& opt) {
  if (opt.n_stations < 2) throw DomainError("synthetic corpus needs at least 2 stations");
  if (opt.days < 2) throw DomainError("synthetic corpus needs at least 2 days");
  const std::size_t n = opt.n_stations;
  Rng rng(opt.seed);

  SyntheticCorpus out;
  std::vector<double> seg_dist(n - 1), seg_speed(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    seg_dist[i] = std::round(rng.uniform(18000.0, 30000.0));
    seg_speed[i] = rng.uniform(20.0, 28.0);
  }
  out.distances_m = Tensor({n, n});
  out.speeds_mps = Tensor({n, n});
  out.travel_seconds = Tensor({n, n});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) {
        out.speeds_mps(i, j) = 1.0;
        continue;
      }
      const std::size_t lo = std::min(i, j), hi = std::max(i, j);
      double dist = 0.0, secs = 0.0;
      for (std::size_t k = lo; k < hi; ++k) {
        dist += seg_dist[k];
        secs += seg_dist[k] / seg_speed[k];
      }
      // Travel against the corridor direction is slower.
      if (i > j) secs /= 0.8;
      out.distances_m(i, j) = dist;
      out.speeds_mps(i, j) = dist / secs;
      out.travel_seconds(i, j) = out.distances_m(i, j) / out.speeds_mps(i, j);
    }
  }
  const double interval_s = std::chrono::duration<double>(kInterval).count();
  out.lags.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.lags[i] = static_cast<std::size_t>(std::llround(out.travel_seconds(0, i) / interval_s));
  }
  const std::size_t max_lag = *std::ranges::max_element(out.lags);

  // Demand at station 0, extended back by max_lag intervals so every station has history.
  const std::size_t steps = opt.days * kIntervalsPerDay;
  const std::size_t total = steps + max_lag;
  const Timestamp start = std::chrono::sys_days{std::chrono::year{2019} / 1 / 7};  // a Monday
  const auto step = std::chrono::duration_cast<std::chrono::seconds>(kInterval);
  const Timestamp ext_start = start - step * static_cast<long>(max_lag);
  std::vector<double> source(total);
  double fluct = 0.0;
  double day_scale = 1.0;
  const double stationary_sd = opt.fluctuation / std::sqrt(1.0 - opt.persistence * opt.persistence);
  fluct = stationary_sd * rng.normal();
  for (std::size_t t = 0; t < total; ++t) {
    const Timestamp ts = ext_start + step * static_cast<long>(t);
    const std::size_t slot = slot_of_day(ts);
    if (t == 0 || slot == 0) day_scale = std::max(0.3, 1.0 + 0.12 * rng.normal());
    const unsigned wd = weekday_of(ts);
    const double week = (wd == 0 || wd == 6) ? opt.weekend_factor : 1.0;
    const double hour = static_cast<double>(slot) / 4.0;
    const double shape = opt.base_level + week * (opt.morning_peak * peak(hour, 8.0, 2.5) +
                                                  opt.evening_peak * peak(hour, 17.0, 3.0));
    fluct = opt.persistence * fluct + opt.fluctuation * rng.normal();
    source[t] = shape * day_scale * std::exp(fluct);
  }

  out.frame.values = Tensor({steps, n});
  out.frame.timestamps.reserve(steps);
  for (std::size_t t = 0; t < steps; ++t) out.frame.timestamps.push_back(start + step * static_cast<long>(t));
  for (std::size_t i = 0; i < n; ++i) out.frame.station_ids.push_back("S" + std::to_string(i + 1));
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      const double upstream = source[t + max_lag - out.lags[i]];
      const double noise = opt.noise_amplitude > 0.0 ? opt.noise_amplitude * rng.normal() : 0.0;
      out.frame.values(t, i) = std::round(std::max(0.0, upstream + noise));
    }
  }

  // Station metadata: positions along a line heading east from a fixed origin.
  std::vector<std::size_t> candidates;
  for (std::size_t i = 1; i < n; ++i) candidates.push_back(i);
  rng.shuffle(candidates.begin(), candidates.end());
  const auto n_nccs = std::min(candidates.size(),
                               static_cast<std::size_t>(std::floor(opt.nccs_fraction * static_cast<double>(n))));
  std::vector<bool> is_nccs(n, false);
  for (std::size_t k = 0; k < n_nccs; ++k) is_nccs[candidates[k]] = true;
  const double lat0 = 39.9612, lon0 = -82.9988;
  const double metres_per_deg_lon = 111320.0 * std::cos(lat0 * std::numbers::pi / 180.0);
  for (std::size_t i = 0; i < n; ++i) {
    StationMeta m;
    m.station_id = out.frame.station_ids[i];
    m.kind = is_nccs[i] ? StationKind::NCCS : StationKind::CCS;
    m.position = {lat0, lon0 + out.distances_m(0, i) / metres_per_deg_lon};
    m.record_count = is_nccs[i]
                         ? 7 * kIntervalsPerDay + rng.index((opt.days - 1) * kIntervalsPerDay)
                         : steps;
    out.stations.push_back(std::move(m));
  }
  return out;
}

void write_counts_csv(const FlowFrame& frame, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out << "station_id,timestamp,count\n";
  for (std::size_t t = 0; t < frame.timesteps(); ++t) {
    const auto ts = csv::format_timestamp(frame.timestamps[t]);
    for (std::size_t s = 0; s < frame.stations(); ++s) {
      out << frame.station_ids[s] << ',' << ts << ',';
      const double v = frame.at(t, s);
      if (!is_sentinel(v)) out << csv::format_double(v);
      out << '\n';
    }
  }
  if (!out) throw InputError("failed writing " + path.string());
}

void write_stations_csv(const std::vector<StationMeta>& stations, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out << "station_id,kind,lat,lon,record_count\n";
  for (const auto& m : stations) {
    out << m.station_id << ',' << to_string(m.kind) << ',' << csv::format_double(m.position.latitude_deg)
        << ',' << csv::format_double(m.position.longitude_deg) << ',' << m.record_count << '\n';
  }
  if (!out) throw InputError("failed writing " + path.string());
}

void write_travel_csv(const SyntheticCorpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out << "from_id,to_id,distance_m,speed_mps\n";
  const auto& ids = corpus.frame.station_ids;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    for (std::size_t j = 0; j < ids.size(); ++j) {
      if (i == j) continue;
      out << ids[i] << ',' << ids[j] << ',' << csv::format_double(corpus.distances_m(i, j)) << ','
          << csv::format_double(corpus.speeds_mps(i, j)) << '\n';
    }
  }
  if (!out) throw InputError("failed writing " + path.string());
}

}  // namespace flowcast::data
