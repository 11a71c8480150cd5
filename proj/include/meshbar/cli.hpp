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
 * @file cli.hpp
 * @brief Command-line front end: analyze, describe, run, ab-remap and sweep.
 *
 * Exit codes: 0 success, 2 configuration or usage error, 3 deadlock during drain,
 * 1 anything else. Every output file carries the run spec that produced it.
 */

#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "analytic.hpp"
#include "config.hpp"
#include "endpoints.hpp"
#include "engine.hpp"
#include "metrics.hpp"

namespace meshbar {

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitDeadlock = 3;

struct RunSpec {
  std::string preset = "TERANOC_1024";
  std::string config_path;  // overrides on top of the preset
  std::string trace_path;   // replaces the pattern when set
  std::string pattern = "uniform";
  std::uint32_t hotspot_group = 0;
  double injection = 1.0;
  std::optional<double> store_fraction;
  std::uint64_t warmup = 0;
  std::uint64_t window = 1000;
  bool drain = true;
  std::optional<std::string> remap;
  std::optional<bool> stride;
  std::optional<std::uint64_t> seed;
  std::optional<double> freq_mhz;
  std::string out = "meshbar-out";
  unsigned workers = 1;
};

inline Json spec_json(const RunSpec& s) {
  Json j;
  j["preset"] = s.preset;
  j["config"] = s.config_path;
  j["trace"] = s.trace_path;
  j["pattern"] = s.pattern;
  j["hotspot_group"] = s.hotspot_group;
  j["injection"] = s.injection;
  j["store_fraction"] = s.store_fraction ? Json(*s.store_fraction) : Json(nullptr);
  j["warmup"] = s.warmup;
  j["window"] = s.window;
  j["drain"] = s.drain;
  j["remap"] = s.remap ? Json(*s.remap) : Json(nullptr);
  j["stride"] = s.stride ? Json(*s.stride) : Json(nullptr);
  j["seed"] = s.seed ? Json(*s.seed) : Json(nullptr);
  j["freq_mhz"] = s.freq_mhz ? Json(*s.freq_mhz) : Json(nullptr);
  return j;
}

/// Preset, then config file overrides, then flag overrides.
inline NetworkConfig resolve_config(const RunSpec& s) {
  const auto base = preset(s.preset);
  if (!base) throw ConfigError("unknown preset '" + s.preset + "' (expected TERANOC_1024 or TINY_2x2)");
  NetworkConfig cfg = s.config_path.empty() ? *base : load_config_file(s.config_path, *base);
  if (s.remap) {
    const auto m = parse_remap_mode(*s.remap);
    if (!m) throw ConfigError("unknown remap mode '" + *s.remap + "'");
    cfg.remap_mode = *m;
  }
  if (s.stride) cfg.tile_stride_assignment = *s.stride;
  if (s.seed) cfg.remap_seed = static_cast<std::uint32_t>(*s.seed & 0xFFFFFFFFu);
  cfg.validate();
  return cfg;
}

inline TrafficPattern resolve_pattern(const RunSpec& s, const NetworkConfig& cfg) {
  const auto kind = parse_pattern_kind(s.pattern);
  if (!kind) throw ConfigError("unknown pattern '" + s.pattern + "'");
  TrafficPattern p;
  p.kind = *kind;
  p.hotspot_group = s.hotspot_group;
  p.store_ratio = s.store_fraction;
  p.injection_rate = s.injection;
  p.seed = s.seed.value_or(1);
  p.validate(cfg);
  return p;
}

inline std::unique_ptr<Simulation> make_simulation(const RunSpec& s, const NetworkConfig& cfg) {
  SimOptions opt;
  opt.workers = s.workers;
  if (!s.trace_path.empty()) return Simulation::with_intents(cfg, load_trace_file(s.trace_path, cfg), opt);
  return Simulation::with_pattern(cfg, resolve_pattern(s, cfg), opt);
}

inline SimReport execute(const RunSpec& s, const NetworkConfig& cfg) {
  if (s.window < 1) throw ConfigError("window must be at least 1 cycle");
  auto sim = make_simulation(s, cfg);
  SimReport r = run(*sim, s.warmup, s.window, s.drain);
  r.run_spec = spec_json(s);
  return r;
}

inline std::filesystem::path prepare_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir))
    throw ConfigError("cannot create output directory '" + dir.string() + "'");
  return dir;
}

inline void write_file(const std::filesystem::path& p, const std::string& content) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw ConfigError("cannot write '" + p.string() + "'");
  f << content;
  if (!f) throw ConfigError("cannot write '" + p.string() + "'");
}

/// report.json, heatmap.csv, one PGM per network and statistic, latency_histogram.csv.
inline void write_run_outputs(const std::filesystem::path& dir, const SimReport& r) {
  prepare_dir(dir);
  const std::string echo = "run_spec " + r.run_spec.dump();
  write_file(dir / "report.json", report_json_text(r));
  std::ostringstream hm, lat;
  write_heatmap_csv(hm, r, echo);
  write_file(dir / "heatmap.csv", hm.str());
  write_latency_csv(lat, r, echo);
  write_file(dir / "latency_histogram.csv", lat.str());
  const std::array<std::pair<const char*, std::optional<NetworkKind>>, 3> nets{
      {{"request", NetworkKind::Request}, {"response", NetworkKind::Response}, {"combined", std::nullopt}}};
  for (const auto& [name, net] : nets) {
    const Heatmap h = heatmap(r, net);
    for (bool use_max : {false, true}) {
      std::ostringstream pgm;
      write_heatmap_pgm(pgm, h, use_max, echo);
      write_file(dir / (std::string("heatmap_") + name + (use_max ? "_max" : "_mean") + ".pgm"), pgm.str());
    }
  }
}

inline std::optional<double> freq_hz(const RunSpec& s) {
  if (!s.freq_mhz) return std::nullopt;
  return *s.freq_mhz * 1e6;
}

// ---------------------------------------------------------------------------
// analyze / describe

inline Json analyze_json(const NetworkConfig& cfg) {
  const auto inv = xbar_inventory(cfg);
  const auto sc = structural_counts(cfg);
  Json j;
  j["config"] = to_config_text(cfg);
  Json xb = Json::array();
  for (const auto& x : inv) xb.push_back({{"name", x.name}, {"inputs", x.n_inputs}, {"outputs", x.n_outputs}});
  j["crossbars"] = std::move(xb);
  j["critical_complexity"] = critical_complexity(inv);
  const auto hier = hierarchical_model(cfg);
  const auto flat = flat_mesh_model(cfg);
  auto lat_json = [](const LatencyModel& m) -> Json {
    Json o{{"n_top", m.n_top}, {"hop_latency", m.hop_latency}, {"spill_const", m.spill_const}};
    try {
      const auto z = zero_load_latency(m);
      o["max_cycles"] = z.max_cycles;
      o["avg_cycles"] = z.avg_cycles;
      o["avg_exact"] = z.avg_exact;
    } catch (const AnalyticError& e) {
      o["error"] = e.what();
    }
    return o;
  };
  j["hierarchical"] = lat_json(hier);
  j["flat_mesh"] = lat_json(flat);
  j["flat_mesh"]["critical_complexity"] =
      critical_complexity({{"flat crossbar", cfg.total_cores(), cfg.total_banks()}});
  j["round_trip"] = {{"local", kLocalRoundTrip},
                     {"intra_group", kIntraGroupRoundTrip},
                     {"one_hop", hop_round_trip(1, hier, kIntraGroupRoundTrip)}};
  j["structural"] = {{"link_directions", sc.link_directions},
                     {"channels_per_link_direction", sc.channels_per_link_direction},
                     {"response_channels", sc.response_channels_total},
                     {"bisection_bytes_per_cycle", sc.bisection_bytes_per_cycle},
                     {"peak_local_bytes_per_cycle", sc.peak_local_bytes_per_cycle},
                     {"remote_read_rate", sc.remote_read_rate},
                     {"remote_write_rate", sc.remote_write_rate},
                     {"local_rate", sc.local_rate},
                     {"intra_group_rate", sc.intra_group_rate},
                     {"remote_response_bytes_per_core", sc.remote_response_bytes_per_core}};
  return j;
}

inline void print_analyze_table(std::ostream& os, const Json& j) {
  auto fmt = [](const Json& v) {
    std::ostringstream s;
    if (v.is_number_float()) s << v.get<double>();
    else if (v.is_string()) s << v.get<std::string>();
    else s << v.dump();
    return s.str();
  };
  auto lat = [&](const Json& o, const char* key) { return o.contains(key) ? fmt(o[key]) : std::string("n/a"); };
  os << std::left << std::setw(14) << "topology" << std::setw(8) << "n_top" << std::setw(10) << "max" << std::setw(10)
     << "avg" << "critical complexity\n";
  os << std::setw(14) << "hierarchical" << std::setw(8) << j["hierarchical"]["n_top"].dump() << std::setw(10)
     << lat(j["hierarchical"], "max_cycles") << std::setw(10) << lat(j["hierarchical"], "avg_cycles")
     << j["critical_complexity"].dump() << "\n";
  os << std::setw(14) << "flat mesh" << std::setw(8) << j["flat_mesh"]["n_top"].dump() << std::setw(10)
     << lat(j["flat_mesh"], "max_cycles") << std::setw(10) << lat(j["flat_mesh"], "avg_cycles")
     << j["flat_mesh"]["critical_complexity"].dump() << "\n\n";
  os << "round trip (cycles): local " << j["round_trip"]["local"].dump() << ", intra-group "
     << j["round_trip"]["intra_group"].dump() << ", 1-hop " << j["round_trip"]["one_hop"].dump() << "\n\n";
  os << "crossbars:\n";
  for (const auto& x : j["crossbars"])
    os << "  " << std::setw(58) << x["name"].get<std::string>() << x["inputs"].dump() << " x " << x["outputs"].dump()
       << "\n";
  os << "\nstructural:\n";
  for (const auto& [k, v] : j["structural"].items()) os << "  " << std::setw(34) << k << fmt(v) << "\n";
}

inline int cmd_analyze(const RunSpec& s, bool as_json, bool write_out, std::ostream& out) {
  const NetworkConfig cfg = resolve_config(s);
  Json j = analyze_json(cfg);
  j["run_spec"] = spec_json(s);
  if (as_json) out << j.dump(2) << "\n";
  else print_analyze_table(out, j);
  if (write_out) write_file(prepare_dir(s.out) / "analyze.json", j.dump(2) + "\n");
  return kExitOk;
}

inline int cmd_describe(const RunSpec& s, std::ostream& out) {
  const NetworkConfig cfg = resolve_config(s);
  const BuildCounts c = build_counts(cfg);
  out << to_config_text(cfg) << "\n";
  const std::vector<std::pair<const char*, std::uint64_t>> rows{
      {"cores", c.cores},
      {"banks", c.banks},
      {"tiles", c.tiles},
      {"groups", c.groups},
      {"tile crossbars", c.tile_crossbars},
      {"intra-group crossbars", c.intra_group_crossbars},
      {"receive crossbars", c.receive_crossbars},
      {"remappers", c.remappers},
      {"routers", c.routers},
      {"mesh planes per network", c.mesh_planes},
      {"link directions per plane", c.link_directions},
      {"channels per network", c.channels_per_network},
      {"capacity (bytes)", cfg.capacity_bytes()},
  };
  for (const auto& [k, v] : rows) out << std::left << std::setw(28) << k << v << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// run / ab-remap

inline int cmd_run(const RunSpec& s, std::ostream& out) {
  const NetworkConfig cfg = resolve_config(s);
  const SimReport r = execute(s, cfg);
  write_run_outputs(s.out, r);
  print_report_table(out, r, freq_hz(s));
  out << "outputs written to " << s.out << "\n";
  return kExitOk;
}

struct AbDelta {
  double mean_congestion_off = 0, mean_congestion_on = 0;
  double peak_congestion_off = 0, peak_congestion_on = 0;
  double bytes_per_cycle_off = 0, bytes_per_cycle_on = 0;

  double mean_delta() const { return mean_congestion_on - mean_congestion_off; }
  double peak_delta() const { return peak_congestion_on - peak_congestion_off; }
  double bandwidth_delta() const { return bytes_per_cycle_on - bytes_per_cycle_off; }
  std::optional<double> mean_reduction() const {
    if (mean_congestion_off == 0) return std::nullopt;
    return 1.0 - mean_congestion_on / mean_congestion_off;
  }
  std::optional<double> bandwidth_ratio() const {
    if (bytes_per_cycle_off == 0) return std::nullopt;
    return bytes_per_cycle_on / bytes_per_cycle_off;
  }
};

/// Congestion figures use the request and response networks combined.
inline AbDelta ab_delta(const SimReport& off, const SimReport& on) {
  return {off.congestion_combined.mean, on.congestion_combined.mean, off.congestion_combined.peak,
          on.congestion_combined.peak,  off.bytes_per_cycle,         on.bytes_per_cycle};
}

inline Json ab_json(const AbDelta& d) {
  auto opt = [](std::optional<double> v) { return v ? Json(*v) : Json(nullptr); };
  return {{"mean_congestion", {{"off", d.mean_congestion_off}, {"on", d.mean_congestion_on}, {"delta", d.mean_delta()}}},
          {"peak_congestion", {{"off", d.peak_congestion_off}, {"on", d.peak_congestion_on}, {"delta", d.peak_delta()}}},
          {"bytes_per_cycle", {{"off", d.bytes_per_cycle_off}, {"on", d.bytes_per_cycle_on}, {"delta", d.bandwidth_delta()}}},
          {"mean_congestion_reduction", opt(d.mean_reduction())},
          {"bandwidth_ratio", opt(d.bandwidth_ratio())}};
}

inline int cmd_ab_remap(const RunSpec& s, bool stride_axis, std::ostream& out) {
  struct Variant {
    std::string name;
    RunSpec spec;
  };
  std::vector<Variant> vs;
  const std::vector<std::optional<bool>> strides =
      stride_axis ? std::vector<std::optional<bool>>{true, false} : std::vector<std::optional<bool>>{s.stride};
  for (const auto& st : strides)
    for (const char* mode : {"off", "percycle"}) {
      RunSpec v = s;
      v.remap = mode;
      v.stride = st;
      std::string name = mode;
      if (stride_axis) name = std::string(*st ? "stride_" : "block_") + mode;
      vs.push_back({name, v});
    }
  std::vector<SimReport> reports;
  for (const auto& v : vs) {
    const NetworkConfig cfg = resolve_config(v.spec);
    reports.push_back(execute(v.spec, cfg));
    write_run_outputs(std::filesystem::path(s.out) / v.name, reports.back());
  }
  Json j;
  j["run_spec"] = spec_json(s);
  j["stride_axis"] = stride_axis;
  Json rows = Json::array();
  out << std::left << std::setw(18) << "variant" << std::setw(14) << "mean cong" << std::setw(14) << "peak cong"
      << std::setw(14) << "bytes/cycle" << "\n";
  for (std::size_t i = 0; i < vs.size(); ++i) {
    const auto& r = reports[i];
    rows.push_back({{"variant", vs[i].name},
                    {"mean_congestion", r.congestion_combined.mean},
                    {"peak_congestion", r.congestion_combined.peak},
                    {"request_mean_congestion", r.congestion_request.mean},
                    {"response_mean_congestion", r.congestion_response.mean},
                    {"bytes_per_cycle", r.bytes_per_cycle}});
    out << std::setw(18) << vs[i].name << std::fixed << std::setprecision(4) << std::setw(14)
        << r.congestion_combined.mean << std::setw(14) << r.congestion_combined.peak << std::setprecision(2)
        << std::setw(14) << r.bytes_per_cycle << "\n";
  }
  j["variants"] = std::move(rows);
  Json deltas = Json::object();
  for (std::size_t i = 0; i + 1 < vs.size(); i += 2) {
    const AbDelta d = ab_delta(reports[i], reports[i + 1]);
    const std::string key = stride_axis ? vs[i].name.substr(0, vs[i].name.find('_')) : "remap";
    deltas[key] = ab_json(d);
    out << key << ": mean congestion " << std::setprecision(4) << d.mean_congestion_off << " -> "
        << d.mean_congestion_on << ", peak " << d.peak_congestion_off << " -> " << d.peak_congestion_on
        << ", bandwidth ratio ";
    if (const auto br = d.bandwidth_ratio()) out << std::setprecision(3) << *br << "x\n";
    else out << "n/a\n";
  }
  j["deltas"] = std::move(deltas);
  write_file(prepare_dir(s.out) / "ab_remap.json", j.dump(2) + "\n");
  return kExitOk;
}

// ---------------------------------------------------------------------------
// sweep

struct SweepAxis {
  std::string name;
  std::vector<std::string> values;
};

inline const std::vector<std::string>& sweep_axis_names() {
  static const std::vector<std::string> names{"K", "q", "fifo_depth", "mesh", "injection"};
  return names;
}

/// "name=v1,v2,..." with name one of K, q, fifo_depth, mesh (values like 4x4), injection.
inline SweepAxis parse_axis(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos) throw ConfigError("axis '" + text + "' must look like name=v1,v2");
  SweepAxis a;
  a.name = detail::trim(text.substr(0, eq));
  const auto& names = sweep_axis_names();
  if (std::find(names.begin(), names.end(), a.name) == names.end())
    throw ConfigError("unknown sweep axis '" + a.name + "' (expected K, q, fifo_depth, mesh or injection)");
  std::stringstream ss(text.substr(eq + 1));
  std::string v;
  while (std::getline(ss, v, ','))
    if (!detail::trim(v).empty()) a.values.push_back(detail::trim(v));
  if (a.values.empty()) throw ConfigError("sweep axis '" + a.name + "' has no values");
  return a;
}

inline void apply_axis(const std::string& name, const std::string& value, NetworkConfig& cfg, RunSpec& spec) {
  auto num = [&](const std::string& v) -> std::uint32_t {
    try {
      std::size_t pos = 0;
      const auto x = std::stoul(v, &pos);
      if (pos != v.size()) throw std::invalid_argument(v);
      return static_cast<std::uint32_t>(x);
    } catch (const std::exception&) {
      throw ConfigError("axis " + name + ": bad value '" + v + "'");
    }
  };
  if (name == "K") {
    cfg.channels_per_tile = num(value);
    // keep one read-write port, the rest alternate read-only / read-write
    cfg.channel_classes.assign(cfg.channels_per_tile, ChannelClass::ReadWrite);
    for (std::uint32_t k = 1; k < cfg.channels_per_tile; k += 2) cfg.channel_classes[k] = ChannelClass::ReadOnly;
  } else if (name == "q") {
    cfg.remapper_arity = num(value);
  } else if (name == "fifo_depth") {
    cfg.fifo_depth = num(value);
  } else if (name == "mesh") {
    const auto x = value.find('x');
    if (x == std::string::npos) throw ConfigError("axis mesh: value '" + value + "' must look like 4x4");
    cfg.mesh_x = num(value.substr(0, x));
    cfg.mesh_y = num(value.substr(x + 1));
  } else if (name == "injection") {
    try {
      spec.injection = std::stod(value);
    } catch (const std::exception&) {
      throw ConfigError("axis injection: bad value '" + value + "'");
    }
  }
}

struct SweepPoint {
  std::vector<std::string> values;  // one per axis
  NetworkConfig cfg;
  RunSpec spec;
};

inline std::vector<SweepPoint> expand_sweep(const RunSpec& s, const std::vector<SweepAxis>& axes) {
  std::vector<SweepPoint> pts{{{}, resolve_config(s), s}};
  for (const auto& a : axes) {
    std::vector<SweepPoint> next;
    for (const auto& p : pts)
      for (const auto& v : a.values) {
        SweepPoint q = p;
        q.values.push_back(v);
        apply_axis(a.name, v, q.cfg, q.spec);
        next.push_back(std::move(q));
      }
    pts = std::move(next);
  }
  for (auto& p : pts) {
    p.cfg.validate();
    resolve_pattern(p.spec, p.cfg);
  }
  return pts;
}

inline int cmd_sweep(const RunSpec& s, const std::vector<std::string>& axis_texts, unsigned jobs, std::ostream& out) {
  std::vector<SweepAxis> axes;
  for (const auto& t : axis_texts) axes.push_back(parse_axis(t));
  const auto pts = expand_sweep(s, axes);
  std::vector<SimReport> reports(pts.size());
  std::vector<std::exception_ptr> errors(pts.size());
  std::atomic<std::size_t> next{0};
  const unsigned n_threads = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(pts.size())));
  auto worker = [&] {
    for (std::size_t i = next++; i < pts.size(); i = next++) {
      try {
        RunSpec sp = pts[i].spec;
        sp.workers = 1;
        reports[i] = execute(sp, pts[i].cfg);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> threads;
  for (unsigned t = 1; t < n_threads; ++t) threads.emplace_back(worker);
  worker();
  for (auto& t : threads) t.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  std::ostringstream csv;
  csv << "# run_spec " << spec_json(s).dump() << "\n";
  for (const auto& a : axes) csv << a.name << ",";
  csv << "bisection_bytes_per_cycle,response_channels,bytes_per_cycle,mean_congestion,peak_congestion,"
         "request_mean_congestion,response_mean_congestion,issued,retired\n";
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const auto& r = reports[i];
    const auto sc = structural_counts(pts[i].cfg);
    std::uint64_t issued = 0, retired = 0;
    for (const auto& c : r.cores) {
      issued += c.issued;
      retired += c.retired;
    }
    for (const auto& v : pts[i].values) csv << v << ",";
    csv << sc.bisection_bytes_per_cycle << "," << sc.response_channels_total << "," << std::setprecision(10)
        << r.bytes_per_cycle << "," << r.congestion_combined.mean << "," << r.congestion_combined.peak << ","
        << r.congestion_request.mean << "," << r.congestion_response.mean << "," << issued << "," << retired << "\n";
  }
  const auto dir = prepare_dir(s.out);
  write_file(dir / "sweep.csv", csv.str());
  if (axes.empty()) write_run_outputs(dir, reports.front());
  out << csv.str();
  return kExitOk;
}

// ---------------------------------------------------------------------------
// Argument parsing

inline void add_spec_options(CLI::App& app, RunSpec& s, bool simulation) {
  app.add_option("--preset", s.preset, "TERANOC_1024 or TINY_2x2")->capture_default_str();
  app.add_option("--config", s.config_path, "config file with key = value overrides");
  app.add_option("--remap", s.remap, "router remapper mode: off, static, percycle");
  app.add_option("--seed", s.seed, "top-level seed for traffic and remappers");
  app.add_option("--out", s.out, "output directory")->capture_default_str();
  if (!simulation) return;
  app.add_option("--pattern", s.pattern, "uniform, local, intragroup, hotspot, matmul, axpy, dotp, conv2d")
      ->capture_default_str();
  app.add_option("--hotspot", s.hotspot_group, "target group of the hotspot pattern");
  app.add_option("--trace", s.trace_path, "replay a trace file (cycle core kind address) instead of a pattern");
  app.add_option("--injection", s.injection, "requests per core per cycle in [0, 1]")->capture_default_str();
  app.add_option("--store-fraction", s.store_fraction, "stores per load; defaults to the pattern's ratio");
  app.add_option("--window", s.window, "measured cycles")->capture_default_str();
  app.add_option("--warmup", s.warmup, "cycles run before measuring")->capture_default_str();
  app.add_flag("--drain,!--no-drain", s.drain, "drain in-flight requests after the window")->capture_default_str();
  app.add_option("--freq-mhz", s.freq_mhz, "clock for bytes/second conversion");
  app.add_option("--workers", s.workers, "threads stepping one simulation")->capture_default_str();
}

/// Full command line entry point, usable in-process by tests.
inline int cli_main(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"meshbar: hierarchical mesh-crossbar interconnect model"};
  app.require_subcommand(1);
  RunSpec s;
  bool as_json = false, stride_axis = false;
  std::vector<std::string> axes;
  unsigned jobs = std::max(1u, std::thread::hardware_concurrency());

  auto* analyze = app.add_subcommand("analyze", "closed-form latency, complexity and bandwidth figures");
  add_spec_options(*analyze, s, false);
  analyze->add_flag("--json", as_json, "print JSON instead of a table");
  auto* describe = app.add_subcommand("describe", "instance counts of the built simulation");
  add_spec_options(*describe, s, false);
  auto* runc = app.add_subcommand("run", "simulate one spec and write report files");
  add_spec_options(*runc, s, true);
  auto* ab = app.add_subcommand("ab-remap", "same spec with the remapper off and per-cycle");
  add_spec_options(*ab, s, true);
  ab->add_flag("--stride-axis", stride_axis, "also compare stride and block tile assignment");
  auto* sweep = app.add_subcommand("sweep", "grid of independent runs; one CSV row per point");
  add_spec_options(*sweep, s, true);
  sweep->add_option("--axis", axes, "name=v1,v2 with name in K, q, fifo_depth, mesh, injection");
  sweep->add_option("--jobs", jobs, "concurrent sweep points");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }

  try {
    if (analyze->parsed()) return cmd_analyze(s, as_json, analyze->count("--out") > 0, out);
    if (describe->parsed()) return cmd_describe(s, out);
    if (runc->parsed()) return cmd_run(s, out);
    if (ab->parsed()) return cmd_ab_remap(s, stride_axis, out);
    if (sweep->parsed()) return cmd_sweep(s, axes, jobs, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const AddressFault& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DeadlockError& e) {
    err << "deadlock: " << e.what() << "\n" << e.dump();
    return kExitDeadlock;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}

}  // namespace meshbar
