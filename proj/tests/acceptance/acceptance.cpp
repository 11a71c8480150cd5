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

// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cmath>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>
#include <thread>

#include "../support/oracles.hpp"
#include "meshbar/cli.hpp"

using namespace meshbar;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

int failures = 0;

template <typename Fn>
void criterion(int id, const char* title, Fn&& fn) {
  Outcome o;
  o.detail << std::fixed;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    fn(o);
  } catch (const std::exception& e) {
    o.pass = false;
    o.detail << " [exception: " << e.what() << "]";
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!o.pass) ++failures;
  std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << id << ": " << title << " |" << o.detail.str() << " ("
            << std::fixed << std::setprecision(1) << secs << " s)" << std::endl;
}

double store_to_load(const std::vector<AccessIntent>& v) {
  std::size_t w = 0, r = 0;
  for (const auto& a : v) ++(a.kind == AccessKind::Write ? w : r);
  return r ? static_cast<double>(w) / static_cast<double>(r) : 0.0;
}

}  // namespace

int main() {
  std::cout << std::fixed;

  criterion(1, "analytic zero-load latency", [](Outcome& o) {
    std::ostringstream out;
    RunSpec s;
    const int code = cmd_analyze(s, true, false, out);
    const Json j = Json::parse(out.str());
    const auto hmax = j["hierarchical"]["max_cycles"].get<std::uint64_t>();
    const auto havg = j["hierarchical"]["avg_cycles"].get<double>();
    const auto fmax = j["flat_mesh"]["max_cycles"].get<std::uint64_t>();
    const auto favg = j["flat_mesh"]["avg_cycles"].get<double>();
    o.detail << std::setprecision(1) << " hierarchical max=" << hmax << " avg=" << havg << ", flat max=" << fmax
             << " avg=" << favg;
    o.require(code == kExitOk, "exit code");
    o.require(hmax == 31 && havg == 13.7, "hierarchical 31 / 13.7");
    o.require(fmax == 127 && favg == 45.7, "flat mesh 127 / 45.7");
  });

  criterion(2, "structural bandwidth", [](Outcome& o) {
    const auto sc = structural_counts(teranoc_1024());
    o.detail << std::setprecision(2) << " response channels=" << sc.response_channels_total
             << " bisection=" << sc.bisection_bytes_per_cycle << " B/cycle peak local="
             << sc.peak_local_bytes_per_cycle << " B/cycle remote read=" << sc.remote_read_rate
             << " write=" << sc.remote_write_rate << " intra-group=" << sc.intra_group_rate;
    o.require(sc.response_channels_total == 1536, "1536 response channels");
    o.require(sc.bisection_bytes_per_cycle == 512, "512 B/cycle bisection");
    o.require(sc.peak_local_bytes_per_cycle == 4096, "4096 B/cycle local");
    o.require(sc.remote_read_rate == 0.5 && sc.remote_write_rate == 0.25, "remote 0.5 / 0.25");
    o.require(sc.intra_group_rate == 0.25, "intra-group 0.25");
  });

  criterion(3, "zero-load simulation matches analytic round trips", [](Outcome& o) {
    const auto tiny = tiny_2x2();
    std::uint64_t pairs = 0, bad = 0;
    for (std::uint32_t core = 0; core < tiny.total_cores(); ++core)
      for (std::uint32_t b = 0; b < tiny.total_banks(); ++b) {
        const std::uint64_t addr = static_cast<std::uint64_t>(b) * tiny.word_bytes;
        const auto p = meshbar::testing::isolated_round_trip(tiny, core, addr);
        ++pairs;
        if (p.latency != meshbar::testing::expected_round_trip(tiny, core_node(core, tiny), decode_address(addr, tiny)))
          ++bad;
      }
    o.detail << " TINY_2x2 " << pairs << " pairs, " << bad << " mismatches;";
    o.require(bad == 0, "TINY_2x2 exhaustive");

    const auto big = teranoc_1024();
    std::mt19937 rng(2026);
    std::uint64_t sampled = 0, big_bad = 0;
    for (std::uint32_t h = 1; h <= 6; ++h) {
      int n = 0;
      while (n < 3) {
        const std::uint32_t core = rng() % big.total_cores(), g = rng() % big.num_groups();
        if (manhattan_hops(core_node(core, big).group, g, big) != h) continue;
        const auto p = meshbar::testing::isolated_round_trip(
            big, core, meshbar::testing::address_of(big, g, rng() % 16, rng() % 16, rng() % 256));
        if (p.latency != 4ull * h + 3) ++big_bad;
        ++n;
        ++sampled;
      }
    }
    const auto one = meshbar::testing::isolated_round_trip(big, 0, meshbar::testing::address_of(big, 1, 0, 0));
    const auto worst = zero_load_latency(hierarchical_model(big)).max_cycles;
    o.detail << " TERANOC_1024 " << sampled << " samples over hops 1..6, " << big_bad << " mismatches; 1-hop="
             << one.latency << "; formula max=" << worst;
    o.require(big_bad == 0, "TERANOC_1024 sampled 4h+3");
    o.require(one.latency == 7, "1-hop 7 cycles");
    o.require(worst == 31, "formula worst case");
  });

  criterion(4, "remapper effectiveness on MatMulLike", [](Outcome& o) {
    RunSpec s;
    s.pattern = "matmul";
    s.injection = 1.0;
    s.window = 3000;
    s.workers = std::max(1u, std::min(8u, std::thread::hardware_concurrency()));
    RunSpec off = s, on = s;
    off.remap = "off";
    on.remap = "percycle";
    const SimReport a = execute(off, resolve_config(off));
    const SimReport b = execute(on, resolve_config(on));
    const double mean_red = a.congestion_combined.mean > 0
                                ? 1.0 - b.congestion_combined.mean / a.congestion_combined.mean
                                : 0.0;
    const double bw = a.bytes_per_cycle > 0 ? b.bytes_per_cycle / a.bytes_per_cycle : 0.0;
    o.detail << std::setprecision(4) << " mean congestion " << a.congestion_combined.mean << " -> "
             << b.congestion_combined.mean << " (" << std::setprecision(1) << 100.0 * mean_red
             << "% reduction), peak " << std::setprecision(4) << a.congestion_combined.peak << " -> "
             << b.congestion_combined.peak << ", bandwidth " << std::setprecision(1) << a.bytes_per_cycle << " -> "
             << b.bytes_per_cycle << " B/cycle (" << std::setprecision(2) << bw << "x)";
    o.require(mean_red >= 0.40, "(a) mean congestion reduced by >= 40%");
    o.require(b.congestion_combined.peak < a.congestion_combined.peak, "(b) peak congestion reduced");
    o.require(bw >= 1.3, "(c) bandwidth >= 1.3x");
  });

  criterion(5, "round-robin arbitration equals the brute-force reference", [](Outcome& o) {
    std::uint64_t seqs = 0, bad = 0;
    for (std::size_t n = 1; n <= 4; ++n) {
      const auto r = meshbar::testing::exhaustive_rr_check(n, 8);
      seqs += r.sequences;
      bad += r.mismatches;
    }
    o.detail << " " << seqs << " schedules, " << bad << " mismatches";
    o.require(bad == 0, "exact match");
  });

  criterion(6, "conservation and deadlock freedom", [](Outcome& o) {
    const auto cfg = tiny_2x2();
    std::mt19937 rng(6);
    int ok = 0;
    for (int t = 0; t < 50; ++t) {
      TrafficPattern p;
      p.kind = static_cast<PatternKind>(rng() % 8);
      p.hotspot_group = rng() % cfg.num_groups();
      p.seed = rng();
      p.injection_rate = std::uniform_real_distribution<double>(0.05, 1.0)(rng);
      auto sim = Simulation::with_pattern(cfg, p, {1, true});
      const auto r = run(*sim, 100, 1000, true);
      bool good = r.drained && sim->lifetime_issued() == sim->lifetime_retired() && sim->outstanding() == 0 &&
                  sim->messages_in_flight() == 0 && r.max_fifo_occupancy <= cfg.fifo_depth;
      for (std::uint32_t c = 0; c < cfg.total_cores(); ++c) good = good && sim->core(c).outstanding() == 0;
      if (good) ++ok;
    }
    o.detail << " " << ok << "/50 triples conserved and drained";
    o.require(ok == 50, "all triples");
  });

  criterion(7, "determinism across reruns and worker counts", [](Outcome& o) {
    int same = 0, total = 0;
    for (const char* pattern : {"uniform", "hotspot", "matmul"}) {
      RunSpec s;
      s.preset = "TINY_2x2";
      s.pattern = pattern;
      s.hotspot_group = 1;
      s.window = 2000;
      s.seed = 11;
      std::vector<std::string> texts;
      for (unsigned w : {1u, 1u, 2u, 4u}) {
        RunSpec v = s;
        v.workers = w;
        texts.push_back(report_json_text(execute(v, resolve_config(v))));
      }
      for (const auto& t : texts) {
        ++total;
        if (t == texts.front()) ++same;
      }
    }
    o.detail << " " << same << "/" << total << " reports byte-identical";
    o.require(same == total, "byte-identical");
  });

  criterion(8, "kernel store-to-load ratios", [](Outcome& o) {
    const auto cfg = teranoc_1024();
    double mm_lo = 1, mm_hi = 0, cv_lo = 1, cv_hi = 0;
    for (std::uint32_t core = 0; core < cfg.total_cores(); core += 31) {
      TrafficPattern p;
      p.kind = PatternKind::MatMulLike;
      const double mm = store_to_load(generate_pattern(p, cfg, core, 10000));
      p.kind = PatternKind::Conv2dLike;
      const double cv = store_to_load(generate_pattern(p, cfg, core, 10000));
      mm_lo = std::min(mm_lo, mm);
      mm_hi = std::max(mm_hi, mm);
      cv_lo = std::min(cv_lo, cv);
      cv_hi = std::max(cv_hi, cv);
    }
    o.detail << std::setprecision(4) << " matmul [" << mm_lo << ", " << mm_hi << "], conv2d [" << cv_lo << ", "
             << cv_hi << "]";
    o.require(std::abs(mm_lo - 0.016) <= 0.005 && std::abs(mm_hi - 0.016) <= 0.005, "matmul 0.016 +- 0.005");
    o.require(std::abs(cv_lo - 0.056) <= 0.01 && std::abs(cv_hi - 0.056) <= 0.01, "conv2d 0.056 +- 0.01");
  });

  criterion(9, "LFSR period and per-cycle bijectivity", [](Outcome& o) {
    // one orbit through all 65535 nonzero states gives every nonzero seed the same period
    std::vector<bool> seen(1u << 16, false);
    std::uint16_t s = 1;
    std::uint32_t period = 0;
    do {
      if (seen[s]) break;
      seen[s] = true;
      s = lfsr_step(s);
      ++period;
    } while (s != 1);
    const bool full = s == 1 && period == 65535;
    const auto seeded = lfsr_period(0xACE1);

    const auto cfg = teranoc_1024();
    TrafficPattern p;
    p.kind = PatternKind::MatMulLike;
    auto sim = Simulation::with_pattern(cfg, p);
    std::uint64_t checks = 0, bad = 0;
    for (int c = 0; c < 10000; ++c) {
      for (auto net : {NetworkKind::Request, NetworkKind::Response})
        for (std::uint32_t g = 0; g < cfg.num_groups(); ++g)
          for (std::uint32_t k = 0; k < cfg.channels_per_tile; ++k)
            for (std::uint32_t j = 0; j < sim->remappers_per_class(); ++j, ++checks)
              if (!is_bijection(sim->remapper(net, g, k, j).binding())) ++bad;
      sim->step();
    }
    o.detail << " orbit length " << period << ", period(0xACE1)=" << seeded << ", " << checks
             << " remapper-cycles checked, " << bad << " non-bijective";
    o.require(full && seeded == 65535, "period 65535");
    o.require(bad == 0, "bijective every cycle");
  });

  std::cout << (failures == 0 ? "ALL PASS" : std::to_string(failures) + " criteria FAILED") << std::endl;
  return failures == 0 ? 0 : 1;
}
