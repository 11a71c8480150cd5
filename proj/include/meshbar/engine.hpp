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
 * @file engine.hpp
 * @brief Cycle-driven simulation kernel wiring cores, banks, crossbars, remappers and the
 *        request/response router meshes.
 *
 * Paths through a group:
 *   - local: core -> tile request crossbar -> bank, same cycle;
 *   - intra-group: core -> egress spill -> intra-group crossbar -> tile crossbar -> bank;
 *   - remote: core -> remapper -> router plane -> mesh -> receive crossbar -> tile crossbar -> bank.
 * Responses retrace the same class of path on the response network.
 *
 * Each cycle runs in this order: response mesh, response delivery and retirement, request
 * mesh, request delivery and issue, remapper advance. Every decision reads start-of-cycle
 * buffer state, so within a phase the order over planes or groups does not matter, and the
 * phases are split across worker threads without changing results.
 */

#pragma once

#include <algorithm>
#include <array>
#include <barrier>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "analytic.hpp"
#include "config.hpp"
#include "endpoints.hpp"
#include "message.hpp"
#include "metrics.hpp"
#include "remapper.hpp"
#include "router.hpp"
#include "xbar.hpp"

namespace meshbar {

class DeadlockError : public std::runtime_error {
 public:
  DeadlockError(const std::string& what, std::string dump) : std::runtime_error(what), dump_(std::move(dump)) {}
  const std::string& dump() const { return dump_; }

 private:
  std::string dump_;
};

/// Persistent worker threads running static partitions of an index range.
class WorkerPool {
 public:
  explicit WorkerPool(unsigned workers) : n_(std::max(1u, workers)) {
    for (unsigned w = 1; w < n_; ++w) threads_.emplace_back([this, w] { loop(w); });
  }
  WorkerPool(const WorkerPool&) = delete;
  WorkerPool& operator=(const WorkerPool&) = delete;
  ~WorkerPool() {
    {
      std::lock_guard lk(mu_);
      stop_ = true;
      ++generation_;
    }
    cv_.notify_all();
    for (auto& t : threads_) t.join();
  }

  unsigned size() const { return n_; }

  /// Calls fn(begin, end) over disjoint slices of [0, n); returns when all are done.
  void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn) {
    if (n_ == 1 || n < 2) {
      fn(0, n);
      return;
    }
    {
      std::lock_guard lk(mu_);
      job_ = &fn;
      job_n_ = n;
      pending_ = n_ - 1;
      error_ = nullptr;
      ++generation_;
    }
    cv_.notify_all();
    std::exception_ptr mine;
    try {
      run_slice(0, fn, n);
    } catch (...) {
      mine = std::current_exception();
    }
    std::unique_lock lk(mu_);
    done_cv_.wait(lk, [&] { return pending_ == 0; });
    job_ = nullptr;
    if (mine) std::rethrow_exception(mine);
    if (error_) std::rethrow_exception(error_);
  }

 private:
  void run_slice(unsigned w, const std::function<void(std::size_t, std::size_t)>& fn, std::size_t n) const {
    const std::size_t b = n * w / n_, e = n * (w + 1) / n_;
    if (b < e) fn(b, e);
  }

  void loop(unsigned w) {
    std::uint64_t seen = 0;
    for (;;) {
      const std::function<void(std::size_t, std::size_t)>* job;
      std::size_t n;
      {
        std::unique_lock lk(mu_);
        cv_.wait(lk, [&] { return generation_ != seen; });
        seen = generation_;
        if (stop_) return;
        job = job_;
        n = job_n_;
      }
      try {
        run_slice(w, *job, n);
      } catch (...) {
        std::lock_guard lk(mu_);
        if (!error_) error_ = std::current_exception();
      }
      {
        std::lock_guard lk(mu_);
        if (--pending_ == 0) done_cv_.notify_one();
      }
    }
  }

  unsigned n_;
  std::vector<std::thread> threads_;
  std::mutex mu_;
  std::condition_variable cv_, done_cv_;
  const std::function<void(std::size_t, std::size_t)>* job_ = nullptr;
  std::size_t job_n_ = 0;
  unsigned pending_ = 0;
  std::uint64_t generation_ = 0;
  bool stop_ = false;
  std::exception_ptr error_;
};

struct SimOptions {
  unsigned workers = 1;
  bool check_invariants = false;  // per-cycle conservation, bijectivity and FIFO bound checks
};

/// Instance counts of a built simulation, as reported by `describe`.
struct BuildCounts {
  std::uint64_t cores = 0, banks = 0, tiles = 0, groups = 0;
  std::uint64_t tile_crossbars = 0;        // request + response per tile
  std::uint64_t intra_group_crossbars = 0; // request + response per group
  std::uint64_t receive_crossbars = 0;     // K request + K response per group
  std::uint64_t remappers = 0;             // Q/q * K per group per network
  std::uint64_t routers = 0;               // Q * K per group per network
  std::uint64_t mesh_planes = 0;           // per network
  std::uint64_t link_directions = 0;       // per plane
  std::uint64_t channels_per_network = 0;
};

inline BuildCounts build_counts(const NetworkConfig& cfg) {
  cfg.validate();
  BuildCounts c;
  const std::uint64_t g = cfg.num_groups(), k = cfg.channels_per_tile, q = cfg.tiles_per_group;
  c.cores = cfg.total_cores();
  c.banks = cfg.total_banks();
  c.tiles = cfg.total_tiles();
  c.groups = g;
  c.tile_crossbars = 2 * c.tiles;
  c.intra_group_crossbars = 2 * g;
  c.receive_crossbars = 2 * k * g;
  c.remappers = 2 * (q / cfg.remapper_arity) * k * g;
  c.routers = 2 * q * k * g;
  c.mesh_planes = q * k;
  c.link_directions = mesh_link_directions(cfg.mesh_x, cfg.mesh_y);
  c.channels_per_network = c.link_directions * c.mesh_planes;
  return c;
}

class Simulation {
 public:
  Simulation(NetworkConfig cfg, std::vector<std::unique_ptr<IntentSource>> sources, SimOptions opt = {})
      : cfg_(std::move(cfg)), opt_(opt), req_net_((cfg_.validate(), cfg_), NetworkKind::Request),
        rsp_net_(cfg_, NetworkKind::Response), pool_(opt.workers) {
    if (sources.size() != cfg_.total_cores()) throw ConfigError("need one intent source per core");
    if (cfg_.num_groups() > 1 && cfg_.hop_latency < 2) throw ConfigError("simulated routers need hop_latency >= 2");
    if (cfg_.spill_const < 3) throw ConfigError("simulated spill_const must be at least 3");
    const std::uint32_t Q = cfg_.tiles_per_group, M = cfg_.cores_per_tile, N = cfg_.banks_per_tile,
                        K = cfg_.channels_per_tile;
    for (std::uint32_t c = 0; c < cfg_.total_cores(); ++c)
      cores_.emplace_back(core_node(c, cfg_), cfg_.outstanding_entries, std::move(sources[c]));
    banks_.resize(cfg_.total_banks());
    tiles_.resize(cfg_.total_tiles());
    for (auto& t : tiles_) {
      t.intra_req_spill = FlitFifo(kSpillDepth);
      t.intra_rsp_spill = FlitFifo(kSpillDepth);
      t.req_xbar = Crossbar(M + 1 + K, N);
      t.rsp_xbar = Crossbar(N + 1 + K, M + 1 + K);
      t.egress.assign(1 + K, RoundRobinArbiter(M));
    }
    remap_tiles_ = assign_tiles_to_remappers(cfg_);
    n_remap_ = static_cast<std::uint32_t>(remap_tiles_.size());
    remap_of_.resize(Q);
    for (std::uint32_t j = 0; j < n_remap_; ++j)
      for (std::uint32_t i = 0; i < remap_tiles_[j].size(); ++i) remap_of_[remap_tiles_[j][i]] = {j, i};
    groups_.resize(cfg_.num_groups());
    for (std::uint32_t g = 0; g < cfg_.num_groups(); ++g) {
      GroupState& G = groups_[g];
      G.intra_req = Crossbar(Q, Q);
      G.intra_rsp = Crossbar(Q, Q);
      G.rx_req.assign(K, Crossbar(Q, Q));
      G.rx_rsp.assign(K, Crossbar(Q, Q));
      for (std::uint32_t net = 0; net < 2; ++net)
        for (std::uint32_t k = 0; k < K; ++k)
          for (std::uint32_t j = 0; j < n_remap_; ++j) {
            const std::uint64_t index = ((static_cast<std::uint64_t>(net) * cfg_.num_groups() + g) * K + k) * n_remap_ + j;
            (net == 0 ? G.remap_req : G.remap_rsp)
                .emplace_back(cfg_.remapper_arity, cfg_.remap_mode, derive_lfsr_seed(cfg_.remap_seed, index));
          }
      G.scratch_head.assign(Q, -1);
      G.scratch_rx.assign(static_cast<std::size_t>(K) * Q, -1);
      G.scratch_win.assign(static_cast<std::size_t>(1 + K) * Q, -1);
      G.scratch_ready.assign(static_cast<std::size_t>(1 + K) * Q, 0);
      G.scratch_want.assign(static_cast<std::size_t>(Q) * M, CoreWant{});
    }
    for (std::uint32_t k = 0; k < K; ++k)
      (cfg_.channel_classes[k] == ChannelClass::ReadOnly ? ro_ports_ : rw_ports_).push_back(k);
    if (rw_ports_.empty() && cfg_.num_groups() > 1) throw ConfigError("at least one read-write channel is required");
  }

  /// Simulation driven by a synthetic or kernel pattern on every core.
  static std::unique_ptr<Simulation> with_pattern(const NetworkConfig& cfg, const TrafficPattern& p,
                                                  SimOptions opt = {}) {
    cfg.validate();
    p.validate(cfg);
    std::vector<std::unique_ptr<IntentSource>> src;
    for (std::uint32_t c = 0; c < cfg.total_cores(); ++c) src.push_back(std::make_unique<PatternSource>(p, cfg, c));
    return std::make_unique<Simulation>(cfg, std::move(src), opt);
  }

  static std::unique_ptr<Simulation> with_intents(const NetworkConfig& cfg,
                                                  std::vector<std::vector<AccessIntent>> per_core,
                                                  SimOptions opt = {}) {
    cfg.validate();
    per_core.resize(cfg.total_cores());
    std::vector<std::unique_ptr<IntentSource>> src;
    for (auto& v : per_core) src.push_back(std::make_unique<VectorSource>(std::move(v)));
    return std::make_unique<Simulation>(cfg, std::move(src), opt);
  }

  const NetworkConfig& config() const { return cfg_; }
  std::uint64_t cycle() const { return now_; }
  const Core& core(std::uint32_t id) const { return cores_[id]; }
  const Bank& bank(std::uint32_t id) const { return banks_[id]; }
  const MeshNetwork& network(NetworkKind k) const { return k == NetworkKind::Request ? req_net_ : rsp_net_; }
  const Remapper& remapper(NetworkKind net, std::uint32_t group, std::uint32_t k, std::uint32_t j) const {
    const GroupState& G = groups_[group];
    return (net == NetworkKind::Request ? G.remap_req : G.remap_rsp)[k * n_remap_ + j];
  }
  std::uint32_t remappers_per_class() const { return n_remap_; }

  /// Advances one cycle.
  void step() {
    const std::uint64_t now = now_;
    const std::uint32_t planes = req_net_.planes();
    const std::uint32_t groups = cfg_.num_groups();
    if (groups > 1) {
      pool_.parallel_for(planes, [&](std::size_t b, std::size_t e) { rsp_net_.switch_planes(now, b, e); });
      pool_.parallel_for(planes, [&](std::size_t b, std::size_t e) { rsp_net_.link_planes(now, b, e); });
    }
    pool_.parallel_for(groups, [&](std::size_t b, std::size_t e) {
      for (std::size_t g = b; g < e; ++g) deliver_responses(static_cast<std::uint32_t>(g), now);
    });
    if (groups > 1) {
      pool_.parallel_for(planes, [&](std::size_t b, std::size_t e) { req_net_.switch_planes(now, b, e); });
      pool_.parallel_for(planes, [&](std::size_t b, std::size_t e) { req_net_.link_planes(now, b, e); });
    }
    pool_.parallel_for(groups, [&](std::size_t b, std::size_t e) {
      for (std::size_t g = b; g < e; ++g) deliver_requests(static_cast<std::uint32_t>(g), now);
    });
    for (auto& G : groups_) {
      for (auto& r : G.remap_req) r.step();
      for (auto& r : G.remap_rsp) r.step();
    }
    if (opt_.check_invariants) check_invariants();
    ++now_;
  }

  /// Clears every window counter; called at the end of warmup.
  void reset_window() {
    for (auto& c : cores_) c.reset_window();
    for (auto& G : groups_) G.window = {};
    req_net_.reset_counters();
    rsp_net_.reset_counters();
  }

  void stop_issuing() {
    for (auto& c : cores_) c.stop_issuing();
  }

  std::uint64_t outstanding() const {
    std::uint64_t n = 0;
    for (const auto& c : cores_) n += c.outstanding();
    return n;
  }
  bool drained() const { return outstanding() == 0; }

  /// Messages held anywhere between issue and retirement.
  std::uint64_t messages_in_flight() const {
    std::uint64_t n = req_net_.occupancy() + rsp_net_.occupancy();
    for (const auto& t : tiles_) n += t.intra_req_spill.size() + t.intra_rsp_spill.size();
    for (const auto& b : banks_) n += b.idle() ? 0 : 1;
    return n;
  }

  std::uint64_t lifetime_issued() const {
    std::uint64_t n = 0;
    for (const auto& c : cores_) n += c.lifetime().issued;
    return n;
  }
  std::uint64_t lifetime_retired() const {
    std::uint64_t n = 0;
    for (const auto& c : cores_) n += c.lifetime().retired;
    return n;
  }
  /// Mesh hops accumulated by retired messages over both networks, since construction.
  std::uint64_t lifetime_retired_hops() const {
    std::uint64_t n = 0;
    for (const auto& G : groups_) n += G.lifetime_hops;
    return n;
  }
  /// Link traversals counted by router channels since the last window reset.
  std::uint64_t moved_flits() const {
    std::uint64_t n = 0;
    for (const auto& c : channel_stats()) n += c.moved_flits;
    return n;
  }

  /// Peak occupancy over the router FIFOs of both meshes.
  std::size_t max_fifo_occupancy() const {
    return std::max(req_net_.max_fifo_occupancy(), rsp_net_.max_fifo_occupancy());
  }

  std::size_t max_spill_occupancy() const {
    std::size_t n = 0;
    for (const auto& t : tiles_) n = std::max({n, t.intra_req_spill.size(), t.intra_rsp_spill.size()});
    return n;
  }

  std::vector<ChannelStats> channel_stats() const {
    std::vector<ChannelStats> out;
    for (const MeshNetwork* net : {&req_net_, &rsp_net_})
      for (std::uint32_t p = 0; p < net->planes(); ++p)
        for (std::uint32_t g = 0; g < net->groups(); ++g)
          for (std::size_t d = 0; d < kNumDirections; ++d) {
            const auto dir = static_cast<Port>(d);
            if (!net->neighbor(g, dir)) continue;
            const ChannelCounters& c = net->router(p, g).channel(dir);
            out.push_back({{net->kind(), p, g, dir}, c.valid_cycles, c.stall_cycles, c.moved_flits});
          }
    return out;
  }

  /// Window statistics gathered so far, as a report (run_spec and cycle fields left to the caller).
  SimReport snapshot() const {
    SimReport r;
    r.config = cfg_;
    r.channels = channel_stats();
    for (const auto& G : groups_) {
      for (std::size_t c = 0; c < kNumDestClasses; ++c) r.latency[c].merge(G.window.latency[c]);
      r.read_words += G.window.read_words;
      r.write_words += G.window.write_words;
      r.latency_floor_violations += G.window.floor_violations;
    }
    for (const auto& c : cores_) r.cores.push_back(c.window());
    r.max_fifo_occupancy = max_fifo_occupancy();
    return r;
  }

  std::string dump_blocked() const {
    std::ostringstream os;
    os << "cycle " << now_ << ", outstanding " << outstanding() << "\n";
    req_net_.dump_blocked(os);
    rsp_net_.dump_blocked(os);
    for (std::uint32_t t = 0; t < tiles_.size(); ++t) {
      if (tiles_[t].intra_req_spill.size() || tiles_[t].intra_rsp_spill.size())
        os << "tile " << t << " spill[req " << tiles_[t].intra_req_spill.size() << " rsp "
           << tiles_[t].intra_rsp_spill.size() << "]\n";
    }
    for (std::uint32_t b = 0; b < banks_.size(); ++b)
      if (!banks_[b].idle()) os << "bank " << b << " holds a response\n";
    return os.str();
  }

  /// Throws std::logic_error naming the first invariant that does not hold.
  void check_invariants() const {
    if (outstanding() != messages_in_flight())
      throw std::logic_error("conservation: " + std::to_string(outstanding()) + " outstanding vs " +
                             std::to_string(messages_in_flight()) + " in flight");
    if (lifetime_issued() != lifetime_retired() + outstanding())
      throw std::logic_error("conservation: issued != retired + outstanding");
    if (max_fifo_occupancy() > cfg_.fifo_depth) throw std::logic_error("router FIFO occupancy exceeds fifo_depth");
    if (max_spill_occupancy() > kSpillDepth) throw std::logic_error("spill FIFO occupancy exceeds its depth");
    for (const auto& G : groups_)
      for (const auto* v : {&G.remap_req, &G.remap_rsp})
        for (const auto& r : *v)
          if (!is_bijection(r.binding())) throw std::logic_error("remapper binding is not a bijection");
  }

 private:
  static constexpr std::size_t kSpillDepth = 2;

  struct TileState {
    FlitFifo intra_req_spill{kSpillDepth};  // egress toward the intra-group crossbar
    FlitFifo intra_rsp_spill{kSpillDepth};  // return path for intra-group responses
    Crossbar req_xbar;  // inputs: M cores, intra-group, K receive; outputs: N banks
    Crossbar rsp_xbar;  // inputs: N banks, intra-group, K receive; outputs: M cores, intra spill, K remote
    std::vector<RoundRobinArbiter> egress;  // per egress port (intra, then K remote), over M cores
  };

  struct WindowStats {
    std::array<LatencyHistogram, kNumDestClasses> latency;
    std::uint64_t read_words = 0, write_words = 0, floor_violations = 0;
  };

  enum class WantKind : std::uint8_t { None, Bank, Egress };
  struct CoreWant {
    WantKind kind = WantKind::None;
    std::uint32_t target = 0;  // bank index or egress port
    Message msg;
  };

  struct GroupState {
    Crossbar intra_req, intra_rsp;
    std::vector<Crossbar> rx_req, rx_rsp;
    std::vector<Remapper> remap_req, remap_rsp;  // [k * remappers_per_class + j]
    WindowStats window;
    std::uint64_t lifetime_hops = 0;
    // per-cycle scratch, owned by the group so workers never share it
    std::vector<int> scratch_head, scratch_rx, scratch_win;
    std::vector<char> scratch_ready;
    std::vector<char> scratch_avail;
    std::vector<CoreWant> scratch_want;
  };

  struct RemapSlot {
    std::uint32_t remapper = 0, slot = 0;
  };

  std::uint32_t tile_index(std::uint32_t g, std::uint32_t t) const { return g * cfg_.tiles_per_group + t; }

  /// Router plane currently bound to tile t's class-k port in group g.
  std::uint32_t bound_plane(const GroupState& G, bool request, std::uint32_t t, std::uint32_t k) const {
    const RemapSlot rs = remap_of_[t];
    const Remapper& r = (request ? G.remap_req : G.remap_rsp)[k * n_remap_ + rs.remapper];
    return k * cfg_.tiles_per_group + remap_tiles_[rs.remapper][r.remap(rs.slot)];
  }

  static void enter_stage(Message& m, std::uint64_t now) {
    if (m.last_stage_cycle >= static_cast<std::int64_t>(now))
      throw std::logic_error("message crossed two registered stages in one cycle");
    m.last_stage_cycle = static_cast<std::int64_t>(now);
  }

  void retire(GroupState& G, Message&& m, std::uint64_t now) {
    Core& c = cores_[core_index(m.src, cfg_)];
    const RetireInfo info = c.retire(m.tag, now);
    WindowStats& w = G.window;
    w.latency[static_cast<std::size_t>(info.dest_class)].add(info.latency);
    ++(info.is_write ? w.write_words : w.read_words);
    if (info.latency < class_round_trip(info.dest_class, info.hops, cfg_)) ++w.floor_violations;
    G.lifetime_hops += m.hops;
  }

  // Response side: bank registers, intra-group and receive crossbars into each tile's
  // response crossbar, then out to cores, the intra spill or the response routers.
  void deliver_responses(std::uint32_t g, std::uint64_t now) {
    GroupState& G = groups_[g];
    const std::uint32_t Q = cfg_.tiles_per_group, M = cfg_.cores_per_tile, N = cfg_.banks_per_tile,
                        K = cfg_.channels_per_tile;
    std::vector<int>& head = G.scratch_head;  // intra spill head -> destination tile
    std::vector<int>& rx = G.scratch_rx;      // [k*Q + r] ejection head -> destination tile
    std::vector<int>& win = G.scratch_win;    // [p*Q + t] winning source for tile t at stage p
    for (std::uint32_t s = 0; s < Q; ++s) {
      const FlitFifo& f = tiles_[tile_index(g, s)].intra_rsp_spill;
      head[s] = f.has_visible(now) ? static_cast<int>(f.front().route_tile) : -1;
    }
    for (std::uint32_t k = 0; k < K; ++k)
      for (std::uint32_t r = 0; r < Q; ++r) {
        const FlitFifo& f = rsp_net_.router(k * Q + r, g).output(Port::Local);
        rx[k * Q + r] = f.has_visible(now) ? static_cast<int>(f.front().route_tile) : -1;
      }
    for (std::uint32_t t = 0; t < Q; ++t) {
      const auto w3 = G.intra_rsp.pick(t, [&](std::size_t s) { return head[s] == static_cast<int>(t); });
      win[t] = w3 ? static_cast<int>(*w3) : -1;
      for (std::uint32_t k = 0; k < K; ++k) {
        const auto w6 = G.rx_rsp[k].pick(t, [&](std::size_t r) { return rx[k * Q + r] == static_cast<int>(t); });
        win[(1 + k) * Q + t] = w6 ? static_cast<int>(*w6) : -1;
      }
    }

    for (std::uint32_t t = 0; t < Q; ++t) {
      const std::uint32_t T = tile_index(g, t);
      TileState& tile = tiles_[T];
      // output each response-crossbar input wants, or none
      auto wanted = [&](std::size_t i) -> std::optional<std::size_t> {
        if (i < N) {
          const Bank& b = banks_[T * N + i];
          if (!b.has_response(now)) return std::nullopt;
          const Message& m = b.response();
          switch (m.ingress) {
            case Ingress::LocalCore: return m.src.local_index;
            case Ingress::IntraGroup: return M;
            case Ingress::Remote: return M + 1 + m.channel_class;
          }
          return std::nullopt;
        }
        const std::size_t p = i - N;  // 0 intra, 1 + k receive
        const int src = win[p * Q + t];
        if (src < 0) return std::nullopt;
        const Message& m = p == 0 ? tiles_[tile_index(g, static_cast<std::uint32_t>(src))].intra_rsp_spill.front()
                                  : rsp_net_.router(static_cast<std::uint32_t>((p - 1) * Q + src), g).output(Port::Local).front();
        return m.src.local_index;
      };
      std::array<std::optional<std::size_t>, 64> want_small{};
      std::vector<std::optional<std::size_t>> want_big;
      const std::size_t n_in = N + 1 + K;
      std::optional<std::size_t>* want = want_small.data();
      if (n_in > want_small.size()) {
        want_big.resize(n_in);
        want = want_big.data();
      }
      for (std::size_t i = 0; i < n_in; ++i) want[i] = wanted(i);

      for (std::size_t o = 0; o < M + 1 + K; ++o) {
        std::uint32_t plane = 0;
        if (o == M) {
          if (!tile.intra_rsp_spill.can_push(now)) continue;
        } else if (o > M) {
          plane = bound_plane(G, false, t, static_cast<std::uint32_t>(o - M - 1));
          if (!rsp_net_.router(plane, g).can_inject(now)) continue;
        }
        const auto gi = tile.rsp_xbar.pick(o, [&](std::size_t i) { return want[i] && *want[i] == o; });
        if (!gi) continue;
        const std::size_t i = *gi;
        tile.rsp_xbar.commit(o, i);
        Message m;
        if (i < N) {
          m = banks_[T * N + i].take_response();
        } else if (i == N) {
          const auto s = static_cast<std::uint32_t>(win[t]);
          m = tiles_[tile_index(g, s)].intra_rsp_spill.pop(now);
          G.intra_rsp.commit(t, s);
        } else {
          const auto k = static_cast<std::uint32_t>(i - N - 1);
          const auto r = static_cast<std::uint32_t>(win[(1 + k) * Q + t]);
          m = rsp_net_.router(k * Q + r, g).output(Port::Local).pop(now);
          G.rx_rsp[k].commit(t, r);
        }
        want[i].reset();
        if (o < M) {
          retire(G, std::move(m), now);
        } else if (o == M) {
          enter_stage(m, now);
          tile.intra_rsp_spill.push(std::move(m), now + 1, now);
        } else {
          enter_stage(m, now);
          m.rsp_router_slot = plane;
          rsp_net_.router(plane, g).inject(std::move(m), now, 1);
        }
      }
    }
  }

  // Request side: receive and intra-group crossbars plus local cores into each bank's
  // arbiter; core egress onto the intra spill and the request routers.
  void deliver_requests(std::uint32_t g, std::uint64_t now) {
    GroupState& G = groups_[g];
    const std::uint32_t Q = cfg_.tiles_per_group, M = cfg_.cores_per_tile, N = cfg_.banks_per_tile,
                        K = cfg_.channels_per_tile;
    std::vector<int>& head = G.scratch_head;
    std::vector<int>& rx = G.scratch_rx;
    std::vector<int>& win = G.scratch_win;
    std::vector<char>& ready = G.scratch_ready;  // [t*(1+K) + port]
    std::vector<CoreWant>& want = G.scratch_want;
    for (std::uint32_t s = 0; s < Q; ++s) {
      const FlitFifo& f = tiles_[tile_index(g, s)].intra_req_spill;
      head[s] = f.has_visible(now) ? static_cast<int>(f.front().route_tile) : -1;
    }
    for (std::uint32_t k = 0; k < K; ++k)
      for (std::uint32_t r = 0; r < Q; ++r) {
        const FlitFifo& f = req_net_.router(k * Q + r, g).output(Port::Local);
        rx[k * Q + r] = f.has_visible(now) ? static_cast<int>(f.front().route_tile) : -1;
      }
    for (std::uint32_t t = 0; t < Q; ++t) {
      const auto w3 = G.intra_req.pick(t, [&](std::size_t s) { return head[s] == static_cast<int>(t); });
      win[t] = w3 ? static_cast<int>(*w3) : -1;
      for (std::uint32_t k = 0; k < K; ++k) {
        const auto w6 = G.rx_req[k].pick(t, [&](std::size_t r) { return rx[k * Q + r] == static_cast<int>(t); });
        win[(1 + k) * Q + t] = w6 ? static_cast<int>(*w6) : -1;
      }
      const TileState& tile = tiles_[tile_index(g, t)];
      ready[t * (1 + K)] = tile.intra_req_spill.can_push(now);
      for (std::uint32_t k = 0; k < K; ++k)
        ready[t * (1 + K) + 1 + k] = req_net_.router(bound_plane(G, true, t, k), g).can_inject(now);
    }

    // what each core would like to do this cycle; an egress port takes one flit per cycle, so a port
    // already claimed by another core counts as not ready. The scan start rotates for fairness.
    std::vector<char>& avail = G.scratch_avail;
    for (std::uint32_t t = 0; t < Q; ++t) {
      avail.assign(ready.begin() + t * (1 + K) + 1, ready.begin() + (t + 1) * (1 + K));
      for (std::uint32_t mi = 0; mi < M; ++mi) {
        const auto m = static_cast<std::uint32_t>((mi + now) % M);
        const std::uint32_t cid = tile_index(g, t) * M + m;
        Core& core = cores_[cid];
        CoreWant& w = want[t * M + m];
        w.kind = WantKind::None;
        const AccessIntent* a = core.due(now);
        if (a == nullptr) {
          core.record_stall(StallReason::Idle);
          continue;
        }
        if (core.table_full()) {
          core.record_stall(StallReason::TableFull);
          continue;
        }
        w.msg = make_request(core.id(), *a, cfg_);
        switch (w.msg.dest_class) {
          case DestClass::LocalTile:
            w.kind = WantKind::Bank;
            w.target = w.msg.dst.bank;
            break;
          case DestClass::IntraGroup:
            w.kind = WantKind::Egress;
            w.target = 0;
            break;
          case DestClass::InterGroup:
            w.kind = WantKind::Egress;
            w.target = 1 + choose_channel(w.msg.is_write, m, avail.data());
            avail[w.target - 1] = 0;
            break;
        }
      }
    }

    for (std::uint32_t t = 0; t < Q; ++t) {
      const std::uint32_t T = tile_index(g, t);
      TileState& tile = tiles_[T];
      CoreWant* cw = &want[t * M];
      auto bank_of_input = [&](std::size_t i) -> int {
        if (i < M) return cw[i].kind == WantKind::Bank ? static_cast<int>(cw[i].target) : -1;
        const std::size_t p = i - M;
        const int src = win[p * Q + t];
        if (src < 0) return -1;
        const Message& msg = p == 0 ? tiles_[tile_index(g, static_cast<std::uint32_t>(src))].intra_req_spill.front()
                                    : req_net_.router(static_cast<std::uint32_t>((p - 1) * Q + src), g).output(Port::Local).front();
        return static_cast<int>(msg.dst.bank);
      };
      std::array<int, 64> in_small{};
      std::vector<int> in_big;
      const std::size_t n_in = M + 1 + K;
      int* in = in_small.data();
      if (n_in > in_small.size()) {
        in_big.resize(n_in);
        in = in_big.data();
      }
      for (std::size_t i = 0; i < n_in; ++i) in[i] = bank_of_input(i);

      for (std::uint32_t n = 0; n < N; ++n) {
        Bank& bank = banks_[T * N + n];
        if (!bank.can_accept()) continue;
        const auto gi = tile.req_xbar.pick(n, [&](std::size_t i) { return in[i] == static_cast<int>(n); });
        if (!gi) continue;
        const std::size_t i = *gi;
        tile.req_xbar.commit(n, i);
        in[i] = -1;
        Message m;
        if (i < M) {
          m = issue(cw[i], now);
          cw[i].kind = WantKind::None;
          m.ingress = Ingress::LocalCore;
        } else if (i == M) {
          const auto s = static_cast<std::uint32_t>(win[t]);
          m = tiles_[tile_index(g, s)].intra_req_spill.pop(now);
          G.intra_req.commit(t, s);
          m.ingress = Ingress::IntraGroup;
        } else {
          const auto k = static_cast<std::uint32_t>(i - M - 1);
          const auto r = static_cast<std::uint32_t>(win[(1 + k) * Q + t]);
          m = req_net_.router(k * Q + r, g).output(Port::Local).pop(now);
          G.rx_req[k].commit(t, r);
          m.ingress = Ingress::Remote;
        }
        bank.accept(m, now, cfg_);
      }

      for (std::uint32_t p = 0; p < 1 + K; ++p) {
        if (!ready[t * (1 + K) + p]) continue;
        const auto gm = tile.egress[p].pick([&](std::size_t m) {
          return cw[m].kind == WantKind::Egress && cw[m].target == p;
        });
        if (!gm) continue;
        tile.egress[p].advance(*gm);
        Message m = issue(cw[*gm], now);
        cw[*gm].kind = WantKind::None;
        enter_stage(m, now);
        if (p == 0) {
          tile.intra_req_spill.push(std::move(m), now + 1, now);
        } else {
          const std::uint32_t k = p - 1;
          const std::uint32_t plane = bound_plane(G, true, t, k);
          m.channel_class = k;
          m.req_router_slot = plane;
          req_net_.router(plane, g).inject(std::move(m), now, 1 + (cfg_.spill_const - 3));
        }
      }

      for (std::uint32_t m = 0; m < M; ++m)
        if (cw[m].kind != WantKind::None) {
          cores_[T * M + m].record_stall(StallReason::Backpressure);
          cw[m].kind = WantKind::None;
        }
    }
  }

  /// Reads go to a read-only port unless none is ready; writes use read-write ports.
  std::uint32_t choose_channel(bool is_write, std::uint32_t core_local, const char* port_ready) const {
    auto scan = [&](const std::vector<std::uint32_t>& ports) -> std::optional<std::uint32_t> {
      for (std::size_t i = 0; i < ports.size(); ++i) {
        const std::uint32_t k = ports[(core_local + i) % ports.size()];
        if (port_ready[k]) return k;
      }
      return std::nullopt;
    };
    if (!is_write && !ro_ports_.empty()) {
      if (auto k = scan(ro_ports_)) return *k;
      if (auto k = scan(rw_ports_)) return *k;
      return ro_ports_[core_local % ro_ports_.size()];
    }
    if (auto k = scan(rw_ports_)) return *k;
    return rw_ports_[core_local % rw_ports_.size()];
  }

  Message issue(CoreWant& w, std::uint64_t now) {
    Message m = w.msg;
    Core& core = cores_[core_index(m.src, cfg_)];
    const std::uint64_t seq = core.lifetime().issued;
    m.tag = core.issue(now, m.dest_class, manhattan_hops(m.src.group, m.dst.group, cfg_));
    m.issue_cycle = now;
    m.id = (static_cast<std::uint64_t>(core_index(m.src, cfg_)) << 40) | seq;
    return m;
  }

  NetworkConfig cfg_;
  SimOptions opt_;
  MeshNetwork req_net_;
  MeshNetwork rsp_net_;
  WorkerPool pool_;
  std::vector<Core> cores_;
  std::vector<Bank> banks_;
  std::vector<TileState> tiles_;
  std::vector<GroupState> groups_;
  std::vector<std::vector<std::uint32_t>> remap_tiles_;
  std::vector<RemapSlot> remap_of_;
  std::uint32_t n_remap_ = 0;
  std::vector<std::uint32_t> ro_ports_, rw_ports_;
  std::uint64_t now_ = 0;
};

/// Drain budget: ten windows, but never less than enough for a few worst-case round trips.
inline std::uint64_t drain_limit(const NetworkConfig& cfg, std::uint64_t window) {
  const std::uint64_t hops = cfg.mesh_x + cfg.mesh_y;
  const std::uint64_t trip = 4 * static_cast<std::uint64_t>(cfg.hop_latency) * hops + cfg.spill_const + 16;
  return std::max<std::uint64_t>(10 * window, 64 * trip);
}

/// Warmup (stats discarded), window (stats collected), then optional drain with deadlock
/// detection. The returned report describes the window only.
inline SimReport run(Simulation& sim, std::uint64_t warmup, std::uint64_t window, bool drain) {
  if (window < 1) throw ConfigError("window must be at least 1 cycle");
  for (std::uint64_t i = 0; i < warmup; ++i) sim.step();
  sim.reset_window();
  for (std::uint64_t i = 0; i < window; ++i) sim.step();
  SimReport r = sim.snapshot();
  r.warmup = warmup;
  r.window = window;
  if (drain) {
    sim.stop_issuing();
    const std::uint64_t limit = drain_limit(sim.config(), window);
    std::uint64_t n = 0;
    while (!sim.drained()) {
      if (n == limit)
        throw DeadlockError("drain did not complete within " + std::to_string(limit) + " cycles", sim.dump_blocked());
      sim.step();
      ++n;
    }
    r.drained = true;
    r.drain_cycles = n;
  }
  r.recompute();
  return r;
}

}  // namespace meshbar
