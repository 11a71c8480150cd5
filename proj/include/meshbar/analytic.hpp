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
 * @file analytic.hpp
 * @brief Closed-form design figures: critical crossbar routing complexity and zero-load
 *        round-trip latency of a square mesh of hierarchy blocks.
 */

#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "config.hpp"

namespace meshbar {

class AnalyticError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

struct XbarShape {
  std::string name;
  std::uint64_t n_inputs = 0;
  std::uint64_t n_outputs = 0;
};

using XbarInventory = std::vector<XbarShape>;

/// Routing complexity of the most complex crossbar: max of inputs * outputs.
inline std::uint64_t critical_complexity(const XbarInventory& inv) {
  if (inv.empty()) throw AnalyticError("crossbar inventory is empty");
  std::uint64_t best = 0;
  for (const auto& x : inv) {
    if (x.n_inputs == 0 || x.n_outputs == 0)
      throw AnalyticError("crossbar '" + x.name + "' has a zero-sized side");
    best = std::max(best, x.n_inputs * x.n_outputs);
  }
  return best;
}

/// Every crossbar class instantiated by the simulated hierarchy.
inline XbarInventory xbar_inventory(const NetworkConfig& cfg) {
  const std::uint64_t m = cfg.cores_per_tile;
  const std::uint64_t n = cfg.banks_per_tile;
  const std::uint64_t q = cfg.tiles_per_group;
  const std::uint64_t k = cfg.channels_per_tile;
  return {
      {"tile request (cores + remote ingress -> banks)", m + 1 + k, n},
      {"tile response (banks + remote ingress -> cores + egress)", n + 1 + k, m + 1 + k},
      {"tile egress arbiter (cores -> remote ports)", m, 1 + k},
      {"intra-group (tile -> tile)", q, q},
      {"receive-side (router -> tile)", q, q},
      {"router remapper", cfg.remapper_arity, cfg.remapper_arity},
      {"mesh router", 5, 5},
  };
}

struct LatencyModel {
  std::uint64_t n_top = 1;        // hierarchy blocks on the mesh
  std::uint32_t hop_latency = 2;
  std::uint32_t spill_const = 0;
};

struct ZeroLoadLatency {
  std::uint64_t max_cycles = 0;
  double avg_cycles = 0;  // rounded half-up to one decimal
  double avg_exact = 0;
};

inline double round_half_up_1(double v) { return std::floor(v * 10.0 + 0.5) / 10.0; }

inline std::uint64_t exact_isqrt(std::uint64_t n) {
  auto r = static_cast<std::uint64_t>(std::llround(std::sqrt(static_cast<double>(n))));
  while (r * r > n) --r;
  while ((r + 1) * (r + 1) <= n) ++r;
  return r;
}

inline ZeroLoadLatency zero_load_latency(const LatencyModel& model) {
  if (model.n_top == 0) throw AnalyticError("n_top must be positive");
  if (model.hop_latency == 0) throw AnalyticError("hop_latency must be at least 1");
  const std::uint64_t side = exact_isqrt(model.n_top);
  if (side * side != model.n_top)
    throw AnalyticError("n_top = " + std::to_string(model.n_top) + " is not a perfect square");
  ZeroLoadLatency z;
  z.max_cycles = 2ull * model.hop_latency * (2 * side - 1) + model.spill_const;
  z.avg_exact = 4.0 / 3.0 * model.hop_latency * static_cast<double>(side) + model.spill_const;
  z.avg_cycles = round_half_up_1(z.avg_exact);
  return z;
}

/// Round trip for a message crossing `hops` mesh hops each way; zero hops yields `local_const`.
inline std::uint64_t hop_round_trip(std::uint64_t hops, const LatencyModel& model, std::uint64_t local_const) {
  if (hops == 0) return local_const;
  return 2ull * model.hop_latency * hops + model.spill_const;
}

/// The mesh of groups the config describes.
inline LatencyModel hierarchical_model(const NetworkConfig& cfg) {
  return {cfg.num_groups(), cfg.hop_latency, cfg.spill_const};
}

/// Every tile placed directly on one flat mesh.
inline LatencyModel flat_mesh_model(const NetworkConfig& cfg) {
  return {cfg.total_tiles(), cfg.hop_latency, cfg.spill_const};
}

/// Zero-load round trip per destination class; inter-group needs the hop count.
inline constexpr std::uint64_t kLocalRoundTrip = 1;
inline constexpr std::uint64_t kIntraGroupRoundTrip = 3;

inline std::uint64_t class_round_trip(DestClass c, std::uint64_t hops, const NetworkConfig& cfg) {
  switch (c) {
    case DestClass::LocalTile: return kLocalRoundTrip;
    case DestClass::IntraGroup: return kIntraGroupRoundTrip;
    case DestClass::InterGroup: return hop_round_trip(hops, hierarchical_model(cfg), kIntraGroupRoundTrip);
  }
  return 0;
}

}  // namespace meshbar
