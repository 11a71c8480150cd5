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
 * @file config.hpp
 * @brief Interconnect parameterization, interleaved address map and counting-based bandwidth figures.
 *
 * The cluster is a three-level hierarchy: a tile holds M cores and N banks behind a local
 * crossbar, a group holds Q tiles behind an intra-group crossbar and K router ports per tile,
 * and the groups form a mesh_x by mesh_y mesh. Words are interleaved bank-fastest, then tile,
 * then group, so consecutive words fill one tile's banks before crossing to the next tile.
 */

#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace meshbar {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class AddressFault : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ChannelClass : std::uint8_t { ReadWrite, ReadOnly };
enum class RemapMode : std::uint8_t { Off, Static, PerCycle };

inline std::string_view to_string(ChannelClass c) {
  return c == ChannelClass::ReadWrite ? "ReadWrite" : "ReadOnly";
}

inline std::string_view to_string(RemapMode m) {
  switch (m) {
    case RemapMode::Off: return "Off";
    case RemapMode::Static: return "Static";
    case RemapMode::PerCycle: return "PerCycle";
  }
  return "?";
}

inline std::optional<RemapMode> parse_remap_mode(std::string_view s) {
  if (s == "Off" || s == "off") return RemapMode::Off;
  if (s == "Static" || s == "static") return RemapMode::Static;
  if (s == "PerCycle" || s == "percycle" || s == "per-cycle" || s == "on") return RemapMode::PerCycle;
  return std::nullopt;
}

inline std::optional<ChannelClass> parse_channel_class(std::string_view s) {
  if (s == "ReadWrite" || s == "RW") return ChannelClass::ReadWrite;
  if (s == "ReadOnly" || s == "RO") return ChannelClass::ReadOnly;
  return std::nullopt;
}

struct NetworkConfig {
  std::uint32_t cores_per_tile = 4;     // M
  std::uint32_t banks_per_tile = 16;    // N
  std::uint32_t tiles_per_group = 16;   // Q
  std::uint32_t mesh_x = 4;
  std::uint32_t mesh_y = 4;
  std::uint32_t channels_per_tile = 2;  // K
  std::uint32_t remapper_arity = 4;     // q
  std::uint32_t hop_latency = 2;        // cycles per hop, one direction
  std::uint32_t spill_const = 3;        // round-trip constant on top of mesh hops
  std::uint32_t fifo_depth = 2;
  std::uint32_t outstanding_entries = 8;
  std::uint32_t word_bytes = 4;
  std::uint64_t bank_capacity = 1024;   // bytes
  std::vector<ChannelClass> channel_classes{ChannelClass::ReadWrite, ChannelClass::ReadOnly};
  RemapMode remap_mode = RemapMode::PerCycle;
  std::uint32_t remap_seed = 0xACE1;
  bool tile_stride_assignment = true;

  std::uint32_t num_groups() const { return mesh_x * mesh_y; }
  std::uint32_t total_tiles() const { return num_groups() * tiles_per_group; }
  std::uint32_t total_cores() const { return total_tiles() * cores_per_tile; }
  std::uint32_t total_banks() const { return total_tiles() * banks_per_tile; }
  std::uint64_t words_per_bank() const { return bank_capacity / word_bytes; }
  std::uint64_t total_words() const { return words_per_bank() * total_banks(); }
  std::uint64_t capacity_bytes() const { return total_words() * word_bytes; }

  std::uint32_t count_class(ChannelClass c) const {
    return static_cast<std::uint32_t>(std::count(channel_classes.begin(), channel_classes.end(), c));
  }

  /// Throws ConfigError naming the first violated invariant.
  void validate() const {
    auto positive = [](std::uint64_t v, const char* name) {
      if (v == 0) throw ConfigError(std::string(name) + " must be positive");
    };
    positive(cores_per_tile, "cores_per_tile");
    positive(banks_per_tile, "banks_per_tile");
    positive(tiles_per_group, "tiles_per_group");
    positive(mesh_x, "mesh_x");
    positive(mesh_y, "mesh_y");
    positive(channels_per_tile, "channels_per_tile");
    positive(remapper_arity, "remapper_arity");
    positive(hop_latency, "hop_latency");
    positive(fifo_depth, "fifo_depth");
    positive(outstanding_entries, "outstanding_entries");
    positive(word_bytes, "word_bytes");
    positive(bank_capacity, "bank_capacity");
    if (tiles_per_group % remapper_arity != 0)
      throw ConfigError("remapper_arity (q) must divide tiles_per_group (Q)");
    if (channel_classes.size() != channels_per_tile)
      throw ConfigError("channel_classes must list exactly channels_per_tile (K) entries");
    if (count_class(ChannelClass::ReadWrite) == 0)
      throw ConfigError("at least one channel class must be ReadWrite");
    if (remap_seed == 0) throw ConfigError("remap_seed must be nonzero");
    if (bank_capacity % word_bytes != 0)
      throw ConfigError("bank_capacity must be a multiple of word_bytes");
  }

  bool operator==(const NetworkConfig&) const = default;
};

/// 1024 cores, 4096 banks: 4x4 mesh of 16-tile groups, 4 cores and 16 banks per tile.
inline NetworkConfig teranoc_1024() { return NetworkConfig{}; }

inline NetworkConfig tiny_2x2() {
  NetworkConfig cfg;
  cfg.cores_per_tile = 2;
  cfg.banks_per_tile = 4;
  cfg.tiles_per_group = 4;
  cfg.mesh_x = 2;
  cfg.mesh_y = 2;
  cfg.channels_per_tile = 2;
  cfg.remapper_arity = 2;
  return cfg;
}

inline std::optional<NetworkConfig> preset(std::string_view name) {
  if (name == "TERANOC_1024") return teranoc_1024();
  if (name == "TINY_2x2") return tiny_2x2();
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Coordinates

struct MeshCoord {
  int x = 0;
  int y = 0;
  bool operator==(const MeshCoord&) const = default;
};

enum class NodeKind : std::uint8_t { Core, Bank };

struct NodeId {
  NodeKind kind = NodeKind::Core;
  std::uint32_t group = 0;
  std::uint32_t tile = 0;         // within group
  std::uint32_t local_index = 0;  // core or bank index within tile
  bool operator==(const NodeId&) const = default;
};

inline MeshCoord group_coord(std::uint32_t group, const NetworkConfig& cfg) {
  return {static_cast<int>(group % cfg.mesh_x), static_cast<int>(group / cfg.mesh_x)};
}

inline std::uint32_t group_at(MeshCoord c, const NetworkConfig& cfg) {
  return static_cast<std::uint32_t>(c.y) * cfg.mesh_x + static_cast<std::uint32_t>(c.x);
}

inline std::uint32_t manhattan_hops(std::uint32_t g0, std::uint32_t g1, const NetworkConfig& cfg) {
  const MeshCoord a = group_coord(g0, cfg);
  const MeshCoord b = group_coord(g1, cfg);
  return static_cast<std::uint32_t>(std::abs(a.x - b.x) + std::abs(a.y - b.y));
}

inline NodeId core_node(std::uint32_t core_id, const NetworkConfig& cfg) {
  const std::uint32_t m = cfg.cores_per_tile;
  const std::uint32_t tile_global = core_id / m;
  return {NodeKind::Core, tile_global / cfg.tiles_per_group, tile_global % cfg.tiles_per_group, core_id % m};
}

inline std::uint32_t core_index(const NodeId& n, const NetworkConfig& cfg) {
  return (n.group * cfg.tiles_per_group + n.tile) * cfg.cores_per_tile + n.local_index;
}

struct BankCoordinate {
  std::uint32_t group = 0;
  std::uint32_t tile = 0;
  std::uint32_t bank = 0;
  std::uint64_t word_offset = 0;
  bool operator==(const BankCoordinate&) const = default;
};

inline std::uint32_t global_bank(const BankCoordinate& b, const NetworkConfig& cfg) {
  return (b.group * cfg.tiles_per_group + b.tile) * cfg.banks_per_tile + b.bank;
}

inline BankCoordinate decode_address(std::uint64_t addr, const NetworkConfig& cfg) {
  if (addr % cfg.word_bytes != 0)
    throw AddressFault("address " + std::to_string(addr) + " is not word-aligned");
  if (addr >= cfg.capacity_bytes())
    throw AddressFault("address " + std::to_string(addr) + " is beyond L1 capacity");
  const std::uint64_t word = addr / cfg.word_bytes;
  const std::uint64_t banks = cfg.total_banks();
  const auto gb = static_cast<std::uint32_t>(word % banks);
  BankCoordinate c;
  c.bank = gb % cfg.banks_per_tile;
  c.tile = (gb / cfg.banks_per_tile) % cfg.tiles_per_group;
  c.group = gb / (cfg.banks_per_tile * cfg.tiles_per_group);
  c.word_offset = word / banks;
  return c;
}

inline std::uint64_t encode_address(const BankCoordinate& c, const NetworkConfig& cfg) {
  const std::uint64_t word = c.word_offset * cfg.total_banks() + global_bank(c, cfg);
  return word * cfg.word_bytes;
}

enum class DestClass : std::uint8_t { LocalTile, IntraGroup, InterGroup };

inline std::string_view to_string(DestClass d) {
  switch (d) {
    case DestClass::LocalTile: return "LocalTile";
    case DestClass::IntraGroup: return "IntraGroup";
    case DestClass::InterGroup: return "InterGroup";
  }
  return "?";
}

inline DestClass classify_destination(const NodeId& src, const BankCoordinate& dst) {
  if (src.kind != NodeKind::Core) throw std::invalid_argument("classify_destination expects a core source");
  if (src.group != dst.group) return DestClass::InterGroup;
  return src.tile == dst.tile ? DestClass::LocalTile : DestClass::IntraGroup;
}

// ---------------------------------------------------------------------------
// Structural bandwidth

struct StructuralCounts {
  std::uint64_t link_directions = 0;
  std::uint64_t channels_per_link_direction = 0;
  std::uint64_t response_channels_total = 0;
  std::uint64_t bisection_bytes_per_cycle = 0;
  std::uint64_t peak_local_bytes_per_cycle = 0;
  double remote_read_rate = 0;       // req/core/cycle
  double remote_write_rate = 0;      // req/core/cycle
  double local_rate = 0;             // req/core/cycle
  double intra_group_rate = 0;       // req/core/cycle
  double remote_response_bytes_per_core = 0;
};

inline std::uint64_t mesh_link_directions(std::uint32_t x, std::uint32_t y) {
  return 2ull * (static_cast<std::uint64_t>(x) * (y - 1) + static_cast<std::uint64_t>(y) * (x - 1));
}

/// Links crossed by the narrower cut that halves the mesh.
inline std::uint64_t bisection_links(std::uint32_t x, std::uint32_t y) {
  if (std::max(x, y) < 2) return 0;
  return std::min(x, y);
}

inline StructuralCounts structural_counts(const NetworkConfig& cfg) {
  StructuralCounts s;
  const std::uint64_t per_dir = static_cast<std::uint64_t>(cfg.tiles_per_group) * cfg.channels_per_tile;
  s.link_directions = mesh_link_directions(cfg.mesh_x, cfg.mesh_y);
  s.channels_per_link_direction = per_dir;
  s.response_channels_total = s.link_directions * per_dir;
  s.bisection_bytes_per_cycle = bisection_links(cfg.mesh_x, cfg.mesh_y) * per_dir * cfg.word_bytes;
  s.peak_local_bytes_per_cycle = static_cast<std::uint64_t>(cfg.total_cores()) * cfg.word_bytes;
  const double m = cfg.cores_per_tile;
  // Every class carries reads; only ReadWrite classes carry writes.
  s.remote_read_rate = cfg.channels_per_tile / m;
  s.remote_write_rate = cfg.count_class(ChannelClass::ReadWrite) / m;
  s.local_rate = 1.0;
  s.intra_group_rate = 1.0 / m;
  s.remote_response_bytes_per_core = cfg.channels_per_tile * cfg.word_bytes / m;
  return s;
}

// ---------------------------------------------------------------------------
// Key-value config text

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::uint64_t parse_uint(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const unsigned long long r = std::stoull(v, &pos, 0);
    if (pos != v.size() || (!v.empty() && v[0] == '-')) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw ConfigError("invalid unsigned value for " + key + ": '" + v + "'");
  }
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "on" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "off" || v == "0" || v == "no") return false;
  throw ConfigError("invalid boolean for " + key + ": '" + v + "'");
}

}  // namespace detail

/// Applies `key = value` lines on top of `base`. '#' starts a comment; unknown keys are an error.
inline NetworkConfig parse_config_text(std::string_view text, NetworkConfig base = teranoc_1024()) {
  NetworkConfig cfg = std::move(base);
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string t = detail::trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = detail::trim(std::string_view(t).substr(0, eq));
    const std::string val = detail::trim(std::string_view(t).substr(eq + 1));
    try {
      auto u32 = [&](std::uint32_t& field) {
        const std::uint64_t v = detail::parse_uint(key, val);
        if (v > 0xFFFFFFFFull) throw ConfigError(key + " out of range");
        field = static_cast<std::uint32_t>(v);
      };
      if (key == "cores_per_tile") u32(cfg.cores_per_tile);
      else if (key == "banks_per_tile") u32(cfg.banks_per_tile);
      else if (key == "tiles_per_group") u32(cfg.tiles_per_group);
      else if (key == "mesh_x") u32(cfg.mesh_x);
      else if (key == "mesh_y") u32(cfg.mesh_y);
      else if (key == "channels_per_tile") u32(cfg.channels_per_tile);
      else if (key == "remapper_arity") u32(cfg.remapper_arity);
      else if (key == "hop_latency") u32(cfg.hop_latency);
      else if (key == "spill_const") u32(cfg.spill_const);
      else if (key == "fifo_depth") u32(cfg.fifo_depth);
      else if (key == "outstanding_entries") u32(cfg.outstanding_entries);
      else if (key == "word_bytes") u32(cfg.word_bytes);
      else if (key == "bank_capacity") cfg.bank_capacity = detail::parse_uint(key, val);
      else if (key == "remap_seed") u32(cfg.remap_seed);
      else if (key == "tile_stride_assignment") cfg.tile_stride_assignment = detail::parse_bool(key, val);
      else if (key == "remap_mode") {
        const auto m = parse_remap_mode(val);
        if (!m) throw ConfigError("invalid remap_mode: '" + val + "'");
        cfg.remap_mode = *m;
      } else if (key == "channel_classes") {
        cfg.channel_classes.clear();
        std::string item;
        std::istringstream items(val);
        while (std::getline(items, item, ',')) {
          const auto c = parse_channel_class(detail::trim(item));
          if (!c) throw ConfigError("invalid channel class: '" + detail::trim(item) + "'");
          cfg.channel_classes.push_back(*c);
        }
      } else {
        throw ConfigError("unknown key '" + key + "'");
      }
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  cfg.validate();
  return cfg;
}

inline NetworkConfig load_config_file(const std::string& path, NetworkConfig base = teranoc_1024()) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config_text(ss.str(), std::move(base));
}

inline std::string to_config_text(const NetworkConfig& cfg) {
  std::ostringstream o;
  o << "cores_per_tile = " << cfg.cores_per_tile << "\n"
    << "banks_per_tile = " << cfg.banks_per_tile << "\n"
    << "tiles_per_group = " << cfg.tiles_per_group << "\n"
    << "mesh_x = " << cfg.mesh_x << "\n"
    << "mesh_y = " << cfg.mesh_y << "\n"
    << "channels_per_tile = " << cfg.channels_per_tile << "\n"
    << "remapper_arity = " << cfg.remapper_arity << "\n"
    << "hop_latency = " << cfg.hop_latency << "\n"
    << "spill_const = " << cfg.spill_const << "\n"
    << "fifo_depth = " << cfg.fifo_depth << "\n"
    << "outstanding_entries = " << cfg.outstanding_entries << "\n"
    << "word_bytes = " << cfg.word_bytes << "\n"
    << "bank_capacity = " << cfg.bank_capacity << "\n"
    << "channel_classes = ";
  for (std::size_t i = 0; i < cfg.channel_classes.size(); ++i)
    o << (i ? "," : "") << to_string(cfg.channel_classes[i]);
  o << "\n"
    << "remap_mode = " << to_string(cfg.remap_mode) << "\n"
    << "remap_seed = " << cfg.remap_seed << "\n"
    << "tile_stride_assignment = " << (cfg.tile_stride_assignment ? "true" : "false") << "\n";
  return o.str();
}

}  // namespace meshbar
