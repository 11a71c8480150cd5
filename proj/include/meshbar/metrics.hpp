/*
 * Copyright 2026 The meshbar Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/**
 * @file metrics.hpp
 * @brief Evaluation quantities: per-channel congestion, heatmaps, delivered bandwidth,
 *        latency histograms and per-core accounting, plus report serialization.
 *
 * A channel is one unidirectional mesh link of one router plane. Its congestion is the
 * fraction of cycles with a flit ready at the link stage that did not move.
 */

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "config.hpp"
#include "endpoints.hpp"
#include "router.hpp"

namespace meshbar {

using Json = nlohmann::json;

struct ChannelId {
  NetworkKind network = NetworkKind::Request;
  std::uint32_t plane = 0;  // k * Q + router slot
  std::uint32_t group = 0;  // source router's group
  Port direction = Port::North;
  bool operator==(const ChannelId&) const = default;
};

struct ChannelStats {
  ChannelId id;
  std::uint64_t valid_cycles = 0;
  std::uint64_t stall_cycles = 0;
  std::uint64_t moved_flits = 0;
  bool operator==(const ChannelStats&) const = default;
};

inline double congestion(const ChannelStats& s) {
  if (s.valid_cycles == 0) return 0.0;
  return static_cast<double>(s.stall_cycles) / static_cast<double>(s.valid_cycles);
}

struct CongestionSummary {
  double mean = 0.0;         // over all channels, idle ones count as 0
  double peak = 0.0;
  double mean_active = 0.0;  // over channels with valid_cycles > 0
  double weighted = 0.0;     // total stalls / total valid cycles
  std::uint64_t channels = 0;
  std::uint64_t active_channels = 0;
  bool operator==(const CongestionSummary&) const = default;
};

/// Summary over the channels of one network, or of both when `network` is empty.
inline CongestionSummary summarize(const std::vector<ChannelStats>& chans, std::optional<NetworkKind> network) {
  CongestionSummary s;
  double sum = 0.0;
  std::uint64_t valid = 0, stall = 0;
  for (const auto& c : chans) {
    if (network && c.id.network != *network) continue;
    const double r = congestion(c);
    ++s.channels;
    sum += r;
    s.peak = std::max(s.peak, r);
    valid += c.valid_cycles;
    stall += c.stall_cycles;
    if (c.valid_cycles > 0) ++s.active_channels;
  }
  if (s.channels > 0) s.mean = sum / static_cast<double>(s.channels);
  if (s.active_channels > 0) s.mean_active = sum / static_cast<double>(s.active_channels);
  if (valid > 0) s.weighted = static_cast<double>(stall) / static_cast<double>(valid);
  return s;
}

class LatencyHistogram {
 public:
  void add(std::uint64_t latency, std::uint64_t n = 1) {
    if (n == 0) return;
    bins_[latency] += n;
    count_ += n;
    sum_ += latency * n;
  }
  void merge(const LatencyHistogram& o) {
    for (const auto& [lat, n] : o.bins_) add(lat, n);
  }
  std::uint64_t count() const { return count_; }
  double mean() const { return count_ ? static_cast<double>(sum_) / static_cast<double>(count_) : 0.0; }
  std::uint64_t min() const { return bins_.empty() ? 0 : bins_.begin()->first; }
  std::uint64_t max() const { return bins_.empty() ? 0 : bins_.rbegin()->first; }
  const std::map<std::uint64_t, std::uint64_t>& bins() const { return bins_; }
  bool operator==(const LatencyHistogram& o) const { return bins_ == o.bins_; }

 private:
  std::map<std::uint64_t, std::uint64_t> bins_;
  std::uint64_t count_ = 0;
  std::uint64_t sum_ = 0;
};

inline constexpr std::size_t kNumDestClasses = 3;

struct SimReport {
  Json run_spec = Json::object();
  NetworkConfig config;
  std::uint64_t warmup = 0;
  std::uint64_t window = 0;
  bool drained = false;
  std::uint64_t drain_cycles = 0;

  // raw counters
  std::vector<ChannelStats> channels;
  std::array<LatencyHistogram, kNumDestClasses> latency;  // indexed by DestClass
  std::vector<CoreCounters> cores;                        // window counters per core
  std::uint64_t read_words = 0;                           // read data retired in the window
  std::uint64_t write_words = 0;                          // write data acknowledged in the window
  std::uint64_t latency_floor_violations = 0;
  std::uint64_t max_fifo_occupancy = 0;

  // aggregates, recomputable from the counters above
  CongestionSummary congestion_request;
  CongestionSummary congestion_response;
  CongestionSummary congestion_combined;
  double bytes_per_cycle = 0.0;

  void recompute() {
    congestion_request = summarize(channels, NetworkKind::Request);
    congestion_response = summarize(channels, NetworkKind::Response);
    congestion_combined = summarize(channels, std::nullopt);
    bytes_per_cycle = window ? static_cast<double>((read_words + write_words) * config.word_bytes) /
                                   static_cast<double>(window)
                             : 0.0;
  }

  bool operator==(const SimReport&) const = default;
};

struct Bandwidth {
  double bytes_per_cycle = 0.0;
  std::optional<double> bytes_per_second;
  std::optional<double> gib_per_second;
};

inline Bandwidth delivered_bandwidth(const SimReport& r, std::uint32_t word_bytes, std::optional<double> freq_hz = {}) {
  Bandwidth b;
  if (r.window > 0)
    b.bytes_per_cycle = static_cast<double>((r.read_words + r.write_words) * word_bytes) / static_cast<double>(r.window);
  if (freq_hz) {
    b.bytes_per_second = b.bytes_per_cycle * *freq_hz;
    b.gib_per_second = *b.bytes_per_second / (1024.0 * 1024.0 * 1024.0);
  }
  return b;
}

// ---------------------------------------------------------------------------
// Heatmaps

/// Per link direction, a mesh_y by mesh_x matrix indexed by the link's source group.
/// Entries aggregate the Q*K channels bundled on that link; links leaving the mesh are absent.
struct Heatmap {
  std::uint32_t mesh_x = 0, mesh_y = 0;
  std::array<std::vector<double>, kNumDirections> mean;  // row-major, row = y
  std::array<std::vector<double>, kNumDirections> max;
  std::array<std::vector<bool>, kNumDirections> present;

  double at_mean(Port d, std::uint32_t x, std::uint32_t y) const { return mean[idx(d)][y * mesh_x + x]; }
  double at_max(Port d, std::uint32_t x, std::uint32_t y) const { return max[idx(d)][y * mesh_x + x]; }
  bool has(Port d, std::uint32_t x, std::uint32_t y) const { return present[idx(d)][y * mesh_x + x]; }

 private:
  static std::size_t idx(Port d) { return static_cast<std::size_t>(d); }
};

inline Heatmap heatmap(const SimReport& r, std::optional<NetworkKind> network = std::nullopt) {
  Heatmap h;
  h.mesh_x = r.config.mesh_x;
  h.mesh_y = r.config.mesh_y;
  const std::size_t cells = static_cast<std::size_t>(h.mesh_x) * h.mesh_y;
  std::array<std::vector<std::uint64_t>, kNumDirections> count;
  for (std::size_t d = 0; d < kNumDirections; ++d) {
    h.mean[d].assign(cells, 0.0);
    h.max[d].assign(cells, 0.0);
    h.present[d].assign(cells, false);
    count[d].assign(cells, 0);
  }
  for (const auto& c : r.channels) {
    if (network && c.id.network != *network) continue;
    const auto d = static_cast<std::size_t>(c.id.direction);
    const std::size_t cell = c.id.group;
    const double v = congestion(c);
    h.present[d][cell] = true;
    h.mean[d][cell] += v;
    h.max[d][cell] = std::max(h.max[d][cell], v);
    ++count[d][cell];
  }
  for (std::size_t d = 0; d < kNumDirections; ++d)
    for (std::size_t i = 0; i < cells; ++i)
      if (count[d][i]) h.mean[d][i] /= static_cast<double>(count[d][i]);
  return h;
}

/// Long-form CSV: one row per existing link direction.
inline void write_heatmap_csv(std::ostream& os, const SimReport& r, const std::string& comment = {}) {
  if (!comment.empty()) os << "# " << comment << "\n";
  os << "network,direction,x,y,mean,max\n";
  const std::array<std::pair<const char*, std::optional<NetworkKind>>, 3> nets{
      {{"request", NetworkKind::Request}, {"response", NetworkKind::Response}, {"combined", std::nullopt}}};
  os << std::setprecision(6) << std::fixed;
  for (const auto& [name, net] : nets) {
    const Heatmap h = heatmap(r, net);
    for (std::size_t d = 0; d < kNumDirections; ++d)
      for (std::uint32_t y = 0; y < h.mesh_y; ++y)
        for (std::uint32_t x = 0; x < h.mesh_x; ++x) {
          const auto p = static_cast<Port>(d);
          if (!h.has(p, x, y)) continue;
          os << name << "," << to_string(p) << "," << x << "," << y << "," << h.at_mean(p, x, y) << ","
             << h.at_max(p, x, y) << "\n";
        }
  }
}

/// Binary PGM: the four direction matrices side by side (N, E, S, W), `scale` pixels per
/// cell, one dark pixel column between panels. Gray level = 255 * congestion.
inline void write_heatmap_pgm(std::ostream& os, const Heatmap& h, bool use_max, const std::string& comment = {},
                              std::uint32_t scale = 16) {
  const std::uint32_t pw = h.mesh_x * scale;
  const std::uint32_t width = pw * kNumDirections + (kNumDirections - 1);
  const std::uint32_t height = h.mesh_y * scale;
  os << "P5\n";
  if (!comment.empty()) os << "# " << comment << "\n";
  os << width << " " << height << "\n255\n";
  std::vector<unsigned char> row(width);
  for (std::uint32_t py = 0; py < height; ++py) {
    // north (+y) at the top
    const std::uint32_t y = h.mesh_y - 1 - py / scale;
    std::fill(row.begin(), row.end(), 0);
    for (std::size_t d = 0; d < kNumDirections; ++d) {
      const auto p = static_cast<Port>(d);
      for (std::uint32_t px = 0; px < pw; ++px) {
        const std::uint32_t x = px / scale;
        const double v = h.has(p, x, y) ? (use_max ? h.at_max(p, x, y) : h.at_mean(p, x, y)) : 0.0;
        row[d * (pw + 1) + px] = static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
      }
    }
    os.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
  }
}

inline void write_latency_csv(std::ostream& os, const SimReport& r, const std::string& comment = {}) {
  if (!comment.empty()) os << "# " << comment << "\n";
  os << "class,latency,count\n";
  for (std::size_t c = 0; c < kNumDestClasses; ++c)
    for (const auto& [lat, n] : r.latency[c].bins())
      os << to_string(static_cast<DestClass>(c)) << "," << lat << "," << n << "\n";
}

// ---------------------------------------------------------------------------
// JSON

inline Json summary_json(const CongestionSummary& s) {
  return {{"mean", s.mean},
          {"peak", s.peak},
          {"mean_active", s.mean_active},
          {"weighted", s.weighted},
          {"channels", s.channels},
          {"active_channels", s.active_channels}};
}

inline CongestionSummary summary_from_json(const Json& j) {
  CongestionSummary s;
  s.mean = j.at("mean").get<double>();
  s.peak = j.at("peak").get<double>();
  s.mean_active = j.at("mean_active").get<double>();
  s.weighted = j.at("weighted").get<double>();
  s.channels = j.at("channels").get<std::uint64_t>();
  s.active_channels = j.at("active_channels").get<std::uint64_t>();
  return s;
}

inline Json heatmap_json(const Heatmap& h) {
  Json j = Json::object();
  for (std::size_t d = 0; d < kNumDirections; ++d) {
    Json mean = Json::array(), mx = Json::array();
    for (std::uint32_t y = 0; y < h.mesh_y; ++y) {
      Json rm = Json::array(), rx = Json::array();
      for (std::uint32_t x = 0; x < h.mesh_x; ++x) {
        const auto p = static_cast<Port>(d);
        rm.push_back(h.has(p, x, y) ? Json(h.at_mean(p, x, y)) : Json(nullptr));
        rx.push_back(h.has(p, x, y) ? Json(h.at_max(p, x, y)) : Json(nullptr));
      }
      mean.push_back(std::move(rm));
      mx.push_back(std::move(rx));
    }
    j[std::string(to_string(static_cast<Port>(d)))] = {{"mean", std::move(mean)}, {"max", std::move(mx)}};
  }
  return j;
}

inline Json to_json(const SimReport& r) {
  Json j;
  j["run_spec"] = r.run_spec;
  j["config"] = to_config_text(r.config);
  j["cycles"] = {{"warmup", r.warmup}, {"window", r.window}, {"drained", r.drained}, {"drain", r.drain_cycles}};

  Json ch = Json::array();
  for (const auto& c : r.channels)
    ch.push_back({c.id.network == NetworkKind::Request ? 0 : 1, c.id.plane, c.id.group,
                  static_cast<int>(c.id.direction), c.valid_cycles, c.stall_cycles, c.moved_flits});
  j["channel_fields"] = {"network", "plane", "group", "direction", "valid", "stall", "moved"};
  j["channels"] = std::move(ch);

  Json lat = Json::object();
  for (std::size_t c = 0; c < kNumDestClasses; ++c) {
    Json bins = Json::array();
    for (const auto& [l, n] : r.latency[c].bins()) bins.push_back({l, n});
    const auto& h = r.latency[c];
    lat[std::string(to_string(static_cast<DestClass>(c)))] = {
        {"bins", std::move(bins)}, {"count", h.count()}, {"mean", h.mean()}, {"min", h.min()}, {"max", h.max()}};
  }
  j["latency"] = std::move(lat);

  Json cores = Json::array();
  for (const auto& c : r.cores)
    cores.push_back({c.issued, c.retired, c.reads_retired, c.writes_retired, c.stall_table_full, c.stall_backpressure,
                     c.idle_cycles});
  j["core_fields"] = {"issued",           "retired", "reads_retired", "writes_retired", "stall_table_full",
                      "stall_backpressure", "idle"};
  j["cores"] = std::move(cores);

  j["words"] = {{"read", r.read_words}, {"write", r.write_words}};
  j["checks"] = {{"latency_floor_violations", r.latency_floor_violations},
                 {"max_fifo_occupancy", r.max_fifo_occupancy}};
  j["congestion"] = {{"request", summary_json(r.congestion_request)},
                     {"response", summary_json(r.congestion_response)},
                     {"combined", summary_json(r.congestion_combined)}};
  j["bandwidth"] = {{"bytes_per_cycle", r.bytes_per_cycle}};
  if (r.run_spec.contains("freq_mhz") && r.run_spec["freq_mhz"].is_number()) {
    const auto b = delivered_bandwidth(r, r.config.word_bytes, r.run_spec["freq_mhz"].get<double>() * 1e6);
    j["bandwidth"]["bytes_per_second"] = *b.bytes_per_second;
    j["bandwidth"]["gib_per_second"] = *b.gib_per_second;
  }
  j["heatmap"] = {{"request", heatmap_json(heatmap(r, NetworkKind::Request))},
                  {"response", heatmap_json(heatmap(r, NetworkKind::Response))},
                  {"combined", heatmap_json(heatmap(r, std::nullopt))}};
  return j;
}

inline SimReport report_from_json(const Json& j) {
  SimReport r;
  r.run_spec = j.at("run_spec");
  r.config = parse_config_text(j.at("config").get<std::string>());
  const Json& cy = j.at("cycles");
  r.warmup = cy.at("warmup").get<std::uint64_t>();
  r.window = cy.at("window").get<std::uint64_t>();
  r.drained = cy.at("drained").get<bool>();
  r.drain_cycles = cy.at("drain").get<std::uint64_t>();
  for (const auto& c : j.at("channels")) {
    ChannelStats s;
    s.id.network = c.at(0).get<int>() == 0 ? NetworkKind::Request : NetworkKind::Response;
    s.id.plane = c.at(1).get<std::uint32_t>();
    s.id.group = c.at(2).get<std::uint32_t>();
    s.id.direction = static_cast<Port>(c.at(3).get<int>());
    s.valid_cycles = c.at(4).get<std::uint64_t>();
    s.stall_cycles = c.at(5).get<std::uint64_t>();
    s.moved_flits = c.at(6).get<std::uint64_t>();
    r.channels.push_back(s);
  }
  for (std::size_t c = 0; c < kNumDestClasses; ++c)
    for (const auto& b : j.at("latency").at(std::string(to_string(static_cast<DestClass>(c)))).at("bins"))
      r.latency[c].add(b.at(0).get<std::uint64_t>(), b.at(1).get<std::uint64_t>());
  for (const auto& c : j.at("cores")) {
    CoreCounters k;
    k.issued = c.at(0).get<std::uint64_t>();
    k.retired = c.at(1).get<std::uint64_t>();
    k.reads_retired = c.at(2).get<std::uint64_t>();
    k.writes_retired = c.at(3).get<std::uint64_t>();
    k.stall_table_full = c.at(4).get<std::uint64_t>();
    k.stall_backpressure = c.at(5).get<std::uint64_t>();
    k.idle_cycles = c.at(6).get<std::uint64_t>();
    r.cores.push_back(k);
  }
  r.read_words = j.at("words").at("read").get<std::uint64_t>();
  r.write_words = j.at("words").at("write").get<std::uint64_t>();
  r.latency_floor_violations = j.at("checks").at("latency_floor_violations").get<std::uint64_t>();
  r.max_fifo_occupancy = j.at("checks").at("max_fifo_occupancy").get<std::uint64_t>();
  r.congestion_request = summary_from_json(j.at("congestion").at("request"));
  r.congestion_response = summary_from_json(j.at("congestion").at("response"));
  r.congestion_combined = summary_from_json(j.at("congestion").at("combined"));
  r.bytes_per_cycle = j.at("bandwidth").at("bytes_per_cycle").get<double>();
  return r;
}

inline std::string report_json_text(const SimReport& r) { return to_json(r).dump(2) + "\n"; }

// ---------------------------------------------------------------------------
// Text tables

inline void print_report_table(std::ostream& os, const SimReport& r, std::optional<double> freq_hz = {}) {
  const auto bw = delivered_bandwidth(r, r.config.word_bytes, freq_hz);
  std::uint64_t issued = 0, retired = 0, tf = 0, bp = 0;
  for (const auto& c : r.cores) {
    issued += c.issued;
    retired += c.retired;
    tf += c.stall_table_full;
    bp += c.stall_backpressure;
  }
  auto row = [&](const std::string& k, const std::string& v) { os << "  " << std::left << std::setw(30) << k << v << "\n"; };
  auto num = [](double v, int prec = 4) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(prec) << v;
    return s.str();
  };
  os << "window " << r.window << " cycles (warmup " << r.warmup << ")\n";
  row("delivered bytes/cycle", num(bw.bytes_per_cycle, 2));
  if (bw.gib_per_second) row("delivered GiB/s", num(*bw.gib_per_second, 2));
  row("requests issued", std::to_string(issued));
  row("requests retired", std::to_string(retired));
  row("stall cycles (table full)", std::to_string(tf));
  row("stall cycles (backpressure)", std::to_string(bp));
  for (const auto& [name, s] : {std::pair{"request", r.congestion_request}, std::pair{"response", r.congestion_response},
                                std::pair{"combined", r.congestion_combined}}) {
    row(std::string("congestion ") + name + " mean/peak", num(s.mean) + " / " + num(s.peak));
  }
  for (std::size_t c = 0; c < kNumDestClasses; ++c) {
    const auto& h = r.latency[c];
    row(std::string("latency ") + std::string(to_string(static_cast<DestClass>(c))) + " n/mean/max",
        std::to_string(h.count()) + " / " + num(h.mean(), 2) + " / " + std::to_string(h.max()));
  }
}

}  // namespace meshbar
