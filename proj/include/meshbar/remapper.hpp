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
 * @file remapper.hpp
 * @brief Router remapper: rotates the binding between q tile egress ports and q routers.
 *
 * The rotation offset is drawn from a 16-bit maximal-length Fibonacci LFSR
 * (x^16 + x^14 + x^13 + x^11 + 1). Rotations are bijective by construction.
 */

#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "config.hpp"

namespace meshbar {

/// One right shift of the LFSR with taps 16, 14, 13, 11 feeding the top bit.
inline std::uint16_t lfsr_step(std::uint16_t state) {
  if (state == 0) throw std::invalid_argument("LFSR state must be nonzero");
  const auto bit = static_cast<std::uint16_t>(((state >> 0) ^ (state >> 2) ^ (state >> 3) ^ (state >> 5)) & 1u);
  return static_cast<std::uint16_t>((state >> 1) | (bit << 15));
}

inline std::uint32_t lfsr_period(std::uint16_t seed) {
  std::uint16_t s = lfsr_step(seed);
  std::uint32_t n = 1;
  while (s != seed) {
    s = lfsr_step(s);
    ++n;
  }
  return n;
}

/// Nonzero 16-bit LFSR seed for remapper instance `index`, derived from the config seed.
inline std::uint16_t derive_lfsr_seed(std::uint32_t remap_seed, std::uint64_t index) {
  std::uint64_t z = (static_cast<std::uint64_t>(remap_seed) << 32) + index * 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  z ^= z >> 31;
  auto s = static_cast<std::uint16_t>(z & 0xFFFFu);
  return s == 0 ? std::uint16_t{1} : s;
}

class Remapper {
 public:
  Remapper(std::uint32_t q, RemapMode mode, std::uint16_t seed) : q_(q), mode_(mode), lfsr_(seed) {
    if (q == 0) throw std::invalid_argument("remapper arity must be positive");
    if (seed == 0) throw std::invalid_argument("remapper seed must be nonzero");
    static_offset_ = seed % q_;
  }

  std::uint32_t arity() const { return q_; }
  RemapMode mode() const { return mode_; }
  std::uint16_t lfsr() const { return lfsr_; }

  std::uint32_t offset() const {
    switch (mode_) {
      case RemapMode::Off: return 0;
      case RemapMode::Static: return static_offset_;
      case RemapMode::PerCycle: return lfsr_ % q_;
    }
    return 0;
  }

  std::uint32_t remap(std::uint32_t tile_slot) const { return (tile_slot + offset()) % q_; }
  std::uint32_t inverse(std::uint32_t router_slot) const { return (router_slot + q_ - offset()) % q_; }

  /// Advances one cycle; only PerCycle mode moves the shift register.
  void step() {
    if (mode_ == RemapMode::PerCycle) lfsr_ = lfsr_step(lfsr_);
  }

  std::vector<std::uint32_t> binding() const {
    std::vector<std::uint32_t> b(q_);
    for (std::uint32_t i = 0; i < q_; ++i) b[i] = remap(i);
    return b;
  }

 private:
  std::uint32_t q_;
  RemapMode mode_;
  std::uint16_t lfsr_;
  std::uint32_t static_offset_ = 0;
};

inline bool is_bijection(const std::vector<std::uint32_t>& b) {
  std::vector<bool> seen(b.size(), false);
  for (auto v : b) {
    if (v >= b.size() || seen[v]) return false;
    seen[v] = true;
  }
  return true;
}

/// Tile groups served by each remapper. Stride assignment interleaves tiles Q/q apart.
inline std::vector<std::vector<std::uint32_t>> assign_tiles_to_remappers(const NetworkConfig& cfg) {
  const std::uint32_t big_q = cfg.tiles_per_group;
  const std::uint32_t q = cfg.remapper_arity;
  if (q == 0 || big_q % q != 0) throw ConfigError("remapper_arity (q) must divide tiles_per_group (Q)");
  const std::uint32_t n = big_q / q;
  std::vector<std::vector<std::uint32_t>> groups(n);
  for (std::uint32_t g = 0; g < n; ++g) {
    for (std::uint32_t i = 0; i < q; ++i)
      groups[g].push_back(cfg.tile_stride_assignment ? g + i * n : g * q + i);
  }
  return groups;
}

}  // namespace meshbar
