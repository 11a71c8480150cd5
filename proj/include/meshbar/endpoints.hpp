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
 * @file endpoints.hpp
 * @brief Traffic sources and sinks: cores with an outstanding-transaction table, single-port
 *        banks, synthetic and kernel-shaped access pattern generators, and trace replay.
 *
 * Cores are traffic generators rather than ISA models. Each core pulls AccessIntents from an
 * IntentSource and issues at most one request per cycle while its table has a free entry.
 */

#pragma once

#include <array>
#include <cstdint>
#include <fstream>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "config.hpp"
#include "message.hpp"

namespace meshbar {

// ---------------------------------------------------------------------------
// Seeding

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Per-component seed: splitmix64 of the top-level seed, mixed with a domain tag and an index.
inline std::uint64_t derive_seed(std::uint64_t top, std::uint64_t domain, std::uint64_t index) {
  return splitmix64(splitmix64(top ^ (domain * 0xD1B54A32D192ED03ull)) + index);
}

inline constexpr std::uint64_t kTrafficDomain = 0x7472616666ull;  // "traff"

/// mt19937_64 with range reduction done here so sequences are identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}
  std::uint64_t below(std::uint64_t n) {
    // Lemire's multiply-shift with rejection
    std::uint64_t x = eng_();
    unsigned __int128 m = static_cast<unsigned __int128>(x) * n;
    auto low = static_cast<std::uint64_t>(m);
    if (low < n) {
      const std::uint64_t t = (0 - n) % n;
      while (low < t) {
        x = eng_();
        m = static_cast<unsigned __int128>(x) * n;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }
  double unit() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

 private:
  std::mt19937_64 eng_;
};

// ---------------------------------------------------------------------------
// Patterns

enum class AccessKind : std::uint8_t { Read, Write };

struct AccessIntent {
  AccessKind kind = AccessKind::Read;
  std::uint64_t target = 0;  // byte address, word-aligned
  std::uint64_t earliest_issue_cycle = 0;
  std::uint32_t gap = 0;  // minimum cycles after the core's previous issue
  bool operator==(const AccessIntent&) const = default;
};

enum class PatternKind : std::uint8_t {
  UniformRandom,
  LocalTile,
  IntraGroup,
  Hotspot,
  MatMulLike,
  AxpyLike,
  DotpLike,
  Conv2dLike,
};

inline std::string_view to_string(PatternKind k) {
  switch (k) {
    case PatternKind::UniformRandom: return "uniform";
    case PatternKind::LocalTile: return "local";
    case PatternKind::IntraGroup: return "intragroup";
    case PatternKind::Hotspot: return "hotspot";
    case PatternKind::MatMulLike: return "matmul";
    case PatternKind::AxpyLike: return "axpy";
    case PatternKind::DotpLike: return "dotp";
    case PatternKind::Conv2dLike: return "conv2d";
  }
  return "?";
}

inline std::optional<PatternKind> parse_pattern_kind(std::string_view s) {
  for (auto k : {PatternKind::UniformRandom, PatternKind::LocalTile, PatternKind::IntraGroup, PatternKind::Hotspot,
                 PatternKind::MatMulLike, PatternKind::AxpyLike, PatternKind::DotpLike, PatternKind::Conv2dLike})
    if (s == to_string(k)) return k;
  return std::nullopt;
}

/// Stores per load for each kernel shape; synthetic patterns use a moderate write mix.
inline double default_store_ratio(PatternKind k) {
  switch (k) {
    case PatternKind::MatMulLike: return 0.016;
    case PatternKind::Conv2dLike: return 0.056;
    case PatternKind::AxpyLike:
    case PatternKind::LocalTile: return 0.5;
    case PatternKind::DotpLike: return 0.33;
    default: return 0.2;
  }
}

struct TrafficPattern {
  PatternKind kind = PatternKind::UniformRandom;
  std::uint32_t hotspot_group = 0;
  std::optional<double> store_ratio;  // stores per load; unset means the kind's default
  double injection_rate = 1.0;        // requests/core/cycle; 0 disables the core
  std::uint64_t seed = 1;

  double effective_store_ratio() const { return store_ratio.value_or(default_store_ratio(kind)); }

  void validate(const NetworkConfig& cfg) const {
    const double r = effective_store_ratio();
    if (!(r >= 0.0 && r <= 1.0)) throw ConfigError("store ratio must lie in [0, 1]");
    if (!(injection_rate >= 0.0 && injection_rate <= 1.0)) throw ConfigError("injection rate must lie in [0, 1]");
    if (kind == PatternKind::Hotspot && hotspot_group >= cfg.num_groups())
      throw ConfigError("hotspot group out of range");
  }
};

class IntentSource {
 public:
  virtual ~IntentSource() = default;
  virtual std::optional<AccessIntent> next() = 0;
};

/// Kernel patterns place stores on a fixed schedule, synthetic ones draw them.
inline bool deterministic_stores(PatternKind k) {
  return k == PatternKind::MatMulLike || k == PatternKind::Conv2dLike || k == PatternKind::AxpyLike ||
         k == PatternKind::DotpLike;
}

inline constexpr std::uint64_t kDotpBlock = 1024;  // intents per dot-product block before reduction

class PatternSource final : public IntentSource {
 public:
  PatternSource(const TrafficPattern& p, const NetworkConfig& cfg, std::uint32_t core_id)
      : p_(p), cfg_(cfg), node_(core_node(core_id, cfg)), rng_(derive_seed(p.seed, kTrafficDomain, core_id)),
        ratio_(p.effective_store_ratio()) {
    p_.validate(cfg);
  }

  std::optional<AccessIntent> next() override {
    if (p_.injection_rate <= 0.0) return std::nullopt;
    AccessIntent a;
    if (p_.injection_rate < 1.0)
      while (rng_.unit() >= p_.injection_rate) ++cycle_;
    a.earliest_issue_cycle = cycle_++;
    a.kind = next_is_store() ? AccessKind::Write : AccessKind::Read;
    if (p_.kind == PatternKind::MatMulLike && a.kind == AccessKind::Read) a.gap = matmul_gap();
    a.target = word_address(a.kind) * cfg_.word_bytes;
    ++count_;
    return a;
  }

 private:
  bool next_is_store() {
    if (deterministic_stores(p_.kind)) {
      if (store_credit_ >= 1.0) {
        store_credit_ -= 1.0;
        return true;
      }
      store_credit_ += ratio_;
      return false;
    }
    return rng_.unit() < ratio_ / (1.0 + ratio_);
  }

  std::uint64_t random_word_in_bank(std::uint32_t gbank) {
    return rng_.below(cfg_.words_per_bank()) * cfg_.total_banks() + gbank;
  }

  std::uint32_t bank_of(std::uint32_t group, std::uint32_t tile, std::uint32_t bank) const {
    return (group * cfg_.tiles_per_group + tile) * cfg_.banks_per_tile + bank;
  }

  std::uint32_t random_bank_in_group(std::uint32_t group) {
    return bank_of(group, static_cast<std::uint32_t>(rng_.below(cfg_.tiles_per_group)),
                   static_cast<std::uint32_t>(rng_.below(cfg_.banks_per_tile)));
  }

  /// Sequential walk through the core's own tile, starting at a per-core bank shift.
  std::uint64_t local_stream_word(std::uint64_t i) const {
    const std::uint64_t n = cfg_.banks_per_tile;
    const std::uint64_t shift = node_.local_index * std::max<std::uint64_t>(1, n / cfg_.cores_per_tile);
    const std::uint64_t pos = shift + i;
    const auto bank = static_cast<std::uint32_t>(pos % n);
    const std::uint64_t row = (pos / n) % cfg_.words_per_bank();
    return row * cfg_.total_banks() + bank_of(node_.group, node_.tile, bank);
  }

  std::uint64_t word_address(AccessKind kind) {
    const NetworkConfig& c = cfg_;
    const std::uint32_t groups = c.num_groups();
    switch (p_.kind) {
      case PatternKind::UniformRandom:
        return random_word_in_bank(static_cast<std::uint32_t>(rng_.below(c.total_banks())));
      case PatternKind::LocalTile:
        return random_word_in_bank(
            bank_of(node_.group, node_.tile, static_cast<std::uint32_t>(rng_.below(c.banks_per_tile))));
      case PatternKind::IntraGroup:
        return random_word_in_bank(random_bank_in_group(node_.group));
      case PatternKind::Hotspot:
        return random_word_in_bank(random_bank_in_group(p_.hotspot_group));
      case PatternKind::Conv2dLike: {
        if (kind == AccessKind::Write) return local_stream_word(out_index_++);
        // own group plus its mesh neighbours
        std::vector<std::uint32_t> near{node_.group};
        const MeshCoord at = group_coord(node_.group, c);
        const std::array<MeshCoord, 4> nb{{{at.x + 1, at.y}, {at.x - 1, at.y}, {at.x, at.y + 1}, {at.x, at.y - 1}}};
        for (const auto& n : nb)
          if (n.x >= 0 && n.y >= 0 && n.x < static_cast<int>(c.mesh_x) && n.y < static_cast<int>(c.mesh_y))
            near.push_back(group_at(n, c));
        return random_word_in_bank(random_bank_in_group(near[rng_.below(near.size())]));
      }
      case PatternKind::AxpyLike:
        // x[i], y[i] loads, then the y[i] store lands on the last load's word
        if (kind == AccessKind::Write) return last_word_;
        return last_word_ = local_stream_word(load_index_++);
      case PatternKind::DotpLike: {
        const std::uint64_t phase = count_ % kDotpBlock;
        if (phase >= kDotpBlock - groups && kind == AccessKind::Read) {
          // reduction: gather one partial sum from every group
          const auto j = static_cast<std::uint32_t>(phase - (kDotpBlock - groups));
          return bank_of(j, node_.tile % c.tiles_per_group, node_.local_index % c.banks_per_tile);
        }
        if (kind == AccessKind::Write) return local_stream_word(out_index_++);
        return local_stream_word(load_index_++);
      }
      case PatternKind::MatMulLike:
        return matmul_word(kind);
    }
    return 0;
  }

  /// Inner loop of a 4x4 output-tiled matmul C = A * B with A (4Q x 128) and B (128 x 4GM)
  /// stored row-major, A at word 0 and B at the middle of L1. The tile index picks the C row
  /// block and the core picks the column block. Each step loads four A words and four B words
  /// for one k, then spends 16 cycles on multiply-accumulates; k starts at a per-PE offset.
  std::uint64_t matmul_word(AccessKind kind) {
    const NetworkConfig& c = cfg_;
    if (kind == AccessKind::Write) return local_stream_word(out_index_++);
    const std::uint64_t w = c.total_words();
    const std::uint64_t it = node_.tile;
    const std::uint64_t jt = node_.group * c.cores_per_tile + node_.local_index;
    const std::uint64_t cols_b = kMatTile * c.num_groups() * c.cores_per_tile;
    const std::uint64_t i = load_index_++;
    const std::uint64_t e = i % (2 * kMatTile);
    const std::uint64_t k = (kMatTile * jt + it + i / (2 * kMatTile)) % kMatK;
    if (e < kMatTile) return ((kMatTile * it + e) * kMatK + k) % w;
    return (w / 2 + k * cols_b + kMatTile * jt + (e - kMatTile)) % w;
  }

  /// Cycles before the next load, given the load about to be emitted.
  std::uint32_t matmul_gap() const {
    return load_index_ > 0 && load_index_ % (2 * kMatTile) == 0 ? 1 + kMatCompute : 1;
  }

  static constexpr std::uint64_t kMatTile = 4;
  static constexpr std::uint64_t kMatK = 128;
  static constexpr std::uint32_t kMatCompute = kMatTile * kMatTile;  // FMA cycles per inner step

  TrafficPattern p_;
  NetworkConfig cfg_;
  NodeId node_;
  Rng rng_;
  double ratio_;
  double store_credit_ = 0.0;
  std::uint64_t cycle_ = 0;
  std::uint64_t count_ = 0;
  std::uint64_t load_index_ = 0;
  std::uint64_t out_index_ = 0;
  std::uint64_t last_word_ = 0;
};

/// First `length` intents of a core's pattern stream.
inline std::vector<AccessIntent> generate_pattern(const TrafficPattern& p, const NetworkConfig& cfg,
                                                  std::uint32_t core_id, std::size_t length) {
  PatternSource src(p, cfg, core_id);
  std::vector<AccessIntent> out;
  out.reserve(length);
  for (std::size_t i = 0; i < length; ++i) {
    auto a = src.next();
    if (!a) break;
    out.push_back(*a);
  }
  return out;
}

class VectorSource final : public IntentSource {
 public:
  explicit VectorSource(std::vector<AccessIntent> v) : v_(std::move(v)) {}
  std::optional<AccessIntent> next() override {
    if (i_ >= v_.size()) return std::nullopt;
    return v_[i_++];
  }

 private:
  std::vector<AccessIntent> v_;
  std::size_t i_ = 0;
};

/// Trace lines: `cycle core kind address`, separated by spaces or commas. Kind is R/W
/// (or read/write, load/store). Addresses accept 0x-prefixed hex. '#' starts a comment.
inline std::vector<std::vector<AccessIntent>> parse_trace(std::string_view text, const NetworkConfig& cfg) {
  std::vector<std::vector<AccessIntent>> per_core(cfg.total_cores());
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto h = line.find('#'); h != std::string::npos) line.erase(h);
    for (char& ch : line)
      if (ch == ',') ch = ' ';
    std::istringstream ls(line);
    std::string cyc, core, kind, addr;
    if (!(ls >> cyc)) continue;
    if (!(ls >> core >> kind >> addr))
      throw ConfigError("trace line " + std::to_string(lineno) + ": expected 'cycle core kind address'");
    AccessIntent a;
    try {
      a.earliest_issue_cycle = std::stoull(cyc, nullptr, 0);
      const auto cid = std::stoull(core, nullptr, 0);
      if (cid >= cfg.total_cores()) throw ConfigError("core out of range");
      a.target = std::stoull(addr, nullptr, 0);
      if (kind == "R" || kind == "r" || kind == "read" || kind == "load") a.kind = AccessKind::Read;
      else if (kind == "W" || kind == "w" || kind == "write" || kind == "store") a.kind = AccessKind::Write;
      else throw ConfigError("bad kind '" + kind + "'");
      decode_address(a.target, cfg);
      auto& v = per_core[cid];
      if (!v.empty() && v.back().earliest_issue_cycle > a.earliest_issue_cycle)
        throw ConfigError("cycles must be non-decreasing per core");
      v.push_back(a);
    } catch (const ConfigError& e) {
      throw ConfigError("trace line " + std::to_string(lineno) + ": " + e.what());
    } catch (const std::exception& e) {
      throw ConfigError("trace line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return per_core;
}

inline std::vector<std::vector<AccessIntent>> load_trace_file(const std::string& path, const NetworkConfig& cfg) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read trace file '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_trace(ss.str(), cfg);
}

// ---------------------------------------------------------------------------
// Core

enum class StallReason : std::uint8_t { TableFull, Backpressure, Idle };

struct CoreCounters {
  std::uint64_t issued = 0;
  std::uint64_t retired = 0;
  std::uint64_t reads_retired = 0;
  std::uint64_t writes_retired = 0;
  std::uint64_t stall_table_full = 0;
  std::uint64_t stall_backpressure = 0;
  std::uint64_t idle_cycles = 0;
  bool operator==(const CoreCounters&) const = default;
};

struct RetireInfo {
  std::uint64_t latency = 0;
  DestClass dest_class = DestClass::LocalTile;
  std::uint32_t hops = 0;  // one-way mesh distance
  bool is_write = false;
};

class Core {
 public:
  Core(NodeId id, std::uint32_t outstanding_entries, std::unique_ptr<IntentSource> source)
      : id_(id), table_(outstanding_entries), source_(std::move(source)) {}

  const NodeId& id() const { return id_; }

  /// The next intent if it is due by `now`.
  const AccessIntent* due(std::uint64_t now) {
    if (draining_) return nullptr;
    if (!pending_ && source_) pending_ = source_->next();
    if (!pending_ || pending_->earliest_issue_cycle > now) return nullptr;
    if (issued_once_ && now < last_issue_ + pending_->gap) return nullptr;
    return &*pending_;
  }

  bool table_full() const { return in_flight_ == table_.size(); }
  std::size_t outstanding() const { return in_flight_; }
  std::size_t capacity() const { return table_.size(); }

  /// Consumes the due intent and returns its tag: the first free table entry.
  std::uint32_t issue(std::uint64_t now, DestClass cls, std::uint32_t hops) {
    if (!pending_) throw std::logic_error("issue without a due intent");
    for (std::uint32_t tag = 0; tag < table_.size(); ++tag) {
      if (table_[tag].busy) continue;
      table_[tag] = {true, now, cls, hops, pending_->kind == AccessKind::Write};
      ++in_flight_;
      ++lifetime_.issued;
      ++window_.issued;
      pending_.reset();
      issued_once_ = true;
      last_issue_ = now;
      return tag;
    }
    throw std::logic_error("issue with a full outstanding table");
  }

  RetireInfo retire(std::uint32_t tag, std::uint64_t now) {
    if (tag >= table_.size() || !table_[tag].busy)
      throw ProtocolViolation("core " + std::to_string(id_.group) + "/" + std::to_string(id_.tile) + "/" +
                              std::to_string(id_.local_index) + " got a response for unknown tag " +
                              std::to_string(tag));
    Entry& e = table_[tag];
    e.busy = false;
    --in_flight_;
    for (CoreCounters* c : {&lifetime_, &window_}) {
      ++c->retired;
      ++(e.write ? c->writes_retired : c->reads_retired);
    }
    return {now - e.issue_cycle, e.cls, e.hops, e.write};
  }

  void record_stall(StallReason r) {
    for (CoreCounters* c : {&lifetime_, &window_}) {
      switch (r) {
        case StallReason::TableFull: ++c->stall_table_full; break;
        case StallReason::Backpressure: ++c->stall_backpressure; break;
        case StallReason::Idle: ++c->idle_cycles; break;
      }
    }
  }

  void stop_issuing() { draining_ = true; }
  const CoreCounters& lifetime() const { return lifetime_; }
  const CoreCounters& window() const { return window_; }
  void reset_window() { window_ = {}; }

 private:
  struct Entry {
    bool busy = false;
    std::uint64_t issue_cycle = 0;
    DestClass cls = DestClass::LocalTile;
    std::uint32_t hops = 0;
    bool write = false;
  };

  NodeId id_;
  std::vector<Entry> table_;
  std::size_t in_flight_ = 0;
  std::unique_ptr<IntentSource> source_;
  std::optional<AccessIntent> pending_;
  bool draining_ = false;
  bool issued_once_ = false;
  std::uint64_t last_issue_ = 0;
  CoreCounters lifetime_;
  CoreCounters window_;
};

/// Request message for the core's due intent; tag and cycle stamps filled by the caller.
inline Message make_request(const NodeId& core, const AccessIntent& a, const NetworkConfig& cfg) {
  Message m;
  m.kind = a.kind == AccessKind::Write ? MsgKind::WriteReq : MsgKind::ReadReq;
  m.is_write = a.kind == AccessKind::Write;
  m.has_payload = m.is_write;
  m.src = core;
  m.dst = decode_address(a.target, cfg);
  m.dest_class = classify_destination(core, m.dst);
  m.route_dst = group_coord(m.dst.group, cfg);
  m.route_tile = m.dst.tile;
  return m;
}

struct CoreStepResult {
  std::optional<Message> issued;
  std::optional<StallReason> stall;
  std::vector<RetireInfo> retired;
};

/// Retire the given responses, then issue the due intent if the table and egress port allow.
inline CoreStepResult core_step(Core& core, std::span<const Message> responses, bool port_ready, std::uint64_t now,
                                const NetworkConfig& cfg) {
  CoreStepResult r;
  for (const auto& m : responses) r.retired.push_back(core.retire(m.tag, now));
  const AccessIntent* a = core.due(now);
  if (a == nullptr) {
    r.stall = StallReason::Idle;
  } else if (core.table_full()) {
    r.stall = StallReason::TableFull;
  } else if (!port_ready) {
    r.stall = StallReason::Backpressure;
  } else {
    Message m = make_request(core.id(), *a, cfg);
    m.issue_cycle = now;
    m.tag = core.issue(now, m.dest_class, manhattan_hops(core.id().group, m.dst.group, cfg));
    r.issued = m;
  }
  if (r.stall) core.record_stall(*r.stall);
  return r;
}

// ---------------------------------------------------------------------------
// Bank

/// Single-port bank: accepts one request per cycle, answers the next cycle. The response
/// register passes ready through, so a response drained this cycle frees the bank for a new
/// request in the same cycle.
class Bank {
 public:
  bool can_accept() const { return !response_.has_value(); }

  void accept(const Message& req, std::uint64_t now, const NetworkConfig& cfg) {
    if (!can_accept()) throw std::logic_error("bank accepted two requests");
    response_ = make_response(req, cfg);
    response_->last_stage_cycle = static_cast<std::int64_t>(now);
    visible_at_ = now + 1;
    ++accepted_;
  }

  bool has_response(std::uint64_t now) const { return response_ && visible_at_ <= now; }
  const Message& response() const { return *response_; }
  Message take_response() {
    Message m = std::move(*response_);
    response_.reset();
    return m;
  }
  std::uint64_t accepted() const { return accepted_; }
  bool idle() const { return !response_; }

 private:
  std::optional<Message> response_;
  std::uint64_t visible_at_ = 0;
  std::uint64_t accepted_ = 0;
};

/// Offers `request` to the bank this cycle; the response is visible from now + 1.
inline bool bank_step(Bank& bank, const std::optional<Message>& request, std::uint64_t now, const NetworkConfig& cfg) {
  if (!request || !bank.can_accept()) return false;
  bank.accept(*request, now, cfg);
  return true;
}

}  // namespace meshbar
