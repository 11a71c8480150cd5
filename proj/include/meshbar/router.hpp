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
 * @file router.hpp
 * @brief Word-width 5x5 XY router with input and output FIFOs, and the replicated mesh planes.
 *
 * Timing per hop is switch allocation (input FIFO head to output FIFO, one cycle) followed by
 * link traversal (output FIFO head to the downstream input FIFO, hop_latency - 1 cycles).
 * The Local output is the ejection buffer and is fall-through: a flit switched to it can be
 * taken by the receive crossbar in the same cycle. Space checks everywhere use start-of-cycle
 * occupancy, so the order in which routers are stepped within a phase is irrelevant.
 */

#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string_view>
#include <utility>
#include <vector>

#include "config.hpp"
#include "message.hpp"
#include "xbar.hpp"

namespace meshbar {

enum class Port : std::uint8_t { North = 0, East = 1, South = 2, West = 3, Local = 4 };
inline constexpr std::size_t kNumPorts = 5;
inline constexpr std::size_t kNumDirections = 4;

inline std::string_view to_string(Port p) {
  static constexpr std::array<std::string_view, kNumPorts> names{"N", "E", "S", "W", "L"};
  return names[static_cast<std::size_t>(p)];
}

inline constexpr Port opposite(Port p) {
  switch (p) {
    case Port::North: return Port::South;
    case Port::South: return Port::North;
    case Port::East: return Port::West;
    case Port::West: return Port::East;
    case Port::Local: return Port::Local;
  }
  return Port::Local;
}

/// Dimension-ordered: resolve X first, then Y. North is +y.
inline Port route_xy(MeshCoord at, MeshCoord dst) {
  if (at.x != dst.x) return dst.x > at.x ? Port::East : Port::West;
  if (at.y != dst.y) return dst.y > at.y ? Port::North : Port::South;
  return Port::Local;
}

inline MeshCoord step_toward(MeshCoord c, Port p) {
  switch (p) {
    case Port::North: return {c.x, c.y + 1};
    case Port::South: return {c.x, c.y - 1};
    case Port::East: return {c.x + 1, c.y};
    case Port::West: return {c.x - 1, c.y};
    case Port::Local: return c;
  }
  return c;
}

/// Bounded FIFO whose entries become visible at a given cycle. Pops in a cycle do not free
/// space for pushes in the same cycle (ready is cut at the buffer).
template <class T>
class TimedFifo {
 public:
  explicit TimedFifo(std::size_t capacity = 1) : slots_(capacity) {}

  std::size_t capacity() const { return slots_.size(); }
  std::size_t size() const { return size_; }
  bool empty() const { return size_ == 0; }

  bool can_push(std::uint64_t now) const { return size_ + popped_in(now) < slots_.size(); }

  void push(T value, std::uint64_t visible_at, std::uint64_t now) {
    if (!can_push(now)) throw std::logic_error("push into a full FIFO");
    Slot& s = slots_[(head_ + size_) % slots_.size()];
    s.value = std::move(value);
    s.visible_at = visible_at;
    ++size_;
  }

  bool has_visible(std::uint64_t now) const { return size_ > 0 && slots_[head_].visible_at <= now; }

  const T& front() const { return slots_[head_].value; }
  T& front() { return slots_[head_].value; }

  T pop(std::uint64_t now) {
    if (!has_visible(now)) throw std::logic_error("pop of an invisible FIFO head");
    T v = std::move(slots_[head_].value);
    head_ = (head_ + 1) % slots_.size();
    --size_;
    if (pop_cycle_ != now) {
      pop_cycle_ = now;
      popped_ = 0;
    }
    ++popped_;
    return v;
  }

  template <class Fn>
  void for_each(Fn&& fn) const {
    for (std::size_t i = 0; i < size_; ++i) fn(slots_[(head_ + i) % slots_.size()].value);
  }

 private:
  struct Slot {
    T value{};
    std::uint64_t visible_at = 0;
  };

  std::size_t popped_in(std::uint64_t now) const { return pop_cycle_ == now ? popped_ : 0; }

  std::vector<Slot> slots_;
  std::size_t head_ = 0;
  std::size_t size_ = 0;
  std::uint64_t pop_cycle_ = ~0ull;
  std::size_t popped_ = 0;
};

struct ChannelCounters {
  std::uint64_t valid_cycles = 0;
  std::uint64_t stall_cycles = 0;
  std::uint64_t moved_flits = 0;
};

using FlitFifo = TimedFifo<Message>;

class Router {
 public:
  Router(MeshCoord position, std::size_t fifo_depth, std::uint32_t hop_latency)
      : pos_(position), link_delay_(hop_latency - 1) {
    if (hop_latency < 2) throw ConfigError("simulated routers need hop_latency >= 2");
    for (std::size_t p = 0; p < kNumPorts; ++p) {
      in_[p] = FlitFifo(fifo_depth);
      out_[p] = FlitFifo(fifo_depth);
      sa_[p] = RoundRobinArbiter(kNumPorts);
    }
  }

  MeshCoord position() const { return pos_; }
  FlitFifo& input(Port p) { return in_[idx(p)]; }
  FlitFifo& output(Port p) { return out_[idx(p)]; }
  const FlitFifo& input(Port p) const { return in_[idx(p)]; }
  const FlitFifo& output(Port p) const { return out_[idx(p)]; }
  const ChannelCounters& channel(Port dir) const { return links_[idx(dir)]; }
  std::uint32_t link_delay() const { return link_delay_; }

  /// Injection from the tile side: visible to switch allocation after `delay` cycles.
  bool can_inject(std::uint64_t now) const { return in_[idx(Port::Local)].can_push(now); }
  void inject(Message m, std::uint64_t now, std::uint32_t delay = 1) {
    m.last_stage_cycle = static_cast<std::int64_t>(now);
    in_[idx(Port::Local)].push(std::move(m), now + delay, now);
  }

  /// Moves input FIFO heads into output FIFOs, one grant per output by round robin.
  std::size_t switch_allocate(std::uint64_t now) {
    std::array<std::optional<Port>, kNumPorts> want{};
    for (std::size_t i = 0; i < kNumPorts; ++i)
      if (in_[i].has_visible(now)) want[i] = route_xy(pos_, in_[i].front().route_dst);
    std::size_t moved = 0;
    for (std::size_t o = 0; o < kNumPorts; ++o) {
      if (!out_[o].can_push(now)) continue;
      const auto g = sa_[o].pick([&](std::size_t i) { return want[i] && idx(*want[i]) == o; });
      if (!g) continue;
      sa_[o].advance(*g);
      Message m = in_[*g].pop(now);
      check_stage(m, now);
      const bool eject = o == idx(Port::Local);
      // ejection buffer is fall-through, everything else is registered
      out_[o].push(std::move(m), eject ? now : now + 1, now);
      ++moved;
    }
    return moved;
  }

  /// Moves output FIFO heads over links. `downstream(dir)` yields the neighbor's input FIFO or
  /// nullptr at the mesh boundary. Counts valid/stall cycles per link direction.
  template <class Downstream>
  std::size_t link_traverse(std::uint64_t now, Downstream&& downstream) {
    std::size_t moved = 0;
    for (std::size_t d = 0; d < kNumDirections; ++d) {
      if (!out_[d].has_visible(now)) continue;
      ChannelCounters& c = links_[d];
      FlitFifo* ds = downstream(static_cast<Port>(d));
      if (ds == nullptr) throw std::logic_error("XY route left the mesh");
      ++c.valid_cycles;
      if (!ds->can_push(now)) {
        ++c.stall_cycles;
        continue;
      }
      Message m = out_[d].pop(now);
      check_stage(m, now);
      ++m.hops;
      ds->push(std::move(m), now + link_delay_, now);
      ++c.moved_flits;
      ++moved;
    }
    return moved;
  }

  void reset_counters() { links_ = {}; }

  bool idle() const {
    for (std::size_t p = 0; p < kNumPorts; ++p)
      if (!in_[p].empty() || !out_[p].empty()) return false;
    return true;
  }

  std::size_t occupancy() const {
    std::size_t n = 0;
    for (std::size_t p = 0; p < kNumPorts; ++p) n += in_[p].size() + out_[p].size();
    return n;
  }

  std::size_t max_fifo_occupancy() const {
    std::size_t n = 0;
    for (std::size_t p = 0; p < kNumPorts; ++p) n = std::max({n, in_[p].size(), out_[p].size()});
    return n;
  }

 private:
  static constexpr std::size_t idx(Port p) { return static_cast<std::size_t>(p); }

  // A message may cross at most one registered stage per cycle.
  static void check_stage(Message& m, std::uint64_t now) {
    if (m.last_stage_cycle >= static_cast<std::int64_t>(now))
      throw std::logic_error("message crossed two registered stages in one cycle");
    m.last_stage_cycle = static_cast<std::int64_t>(now);
  }

  MeshCoord pos_;
  std::uint32_t link_delay_;
  std::array<FlitFifo, kNumPorts> in_;
  std::array<FlitFifo, kNumPorts> out_;
  std::array<RoundRobinArbiter, kNumPorts> sa_;
  std::array<ChannelCounters, kNumDirections> links_{};
};

struct RouterStepResult {
  std::size_t switched = 0;
  std::vector<std::pair<Port, Message>> departed;
  std::size_t stalls = 0;
};

/// Single router in isolation: switch allocation, then link traversal against the given
/// per-direction downstream readiness.
inline RouterStepResult router_step(Router& r, const std::array<bool, kNumDirections>& neighbor_ready,
                                    std::uint64_t now) {
  RouterStepResult res;
  res.switched = r.switch_allocate(now);
  // Sinks that accept one flit when ready; never full otherwise.
  std::array<FlitFifo, kNumDirections> sinks{FlitFifo(1), FlitFifo(1), FlitFifo(1), FlitFifo(1)};
  std::array<std::uint64_t, kNumDirections> stall_before{};
  for (std::size_t d = 0; d < kNumDirections; ++d) {
    stall_before[d] = r.channel(static_cast<Port>(d)).stall_cycles;
    if (!neighbor_ready[d]) sinks[d].push(Message{}, now + 1, now);  // occupy the slot
  }
  r.link_traverse(now, [&](Port p) { return &sinks[static_cast<std::size_t>(p)]; });
  for (std::size_t d = 0; d < kNumDirections; ++d) {
    res.stalls += r.channel(static_cast<Port>(d)).stall_cycles - stall_before[d];
    if (neighbor_ready[d] && !sinks[d].empty()) {
      // pushed this cycle with a future visibility; read it back directly
      Message m;
      sinks[d].for_each([&](const Message& x) { m = x; });
      res.departed.emplace_back(static_cast<Port>(d), std::move(m));
    }
  }
  return res;
}

enum class NetworkKind : std::uint8_t { Request, Response };

inline std::string_view to_string(NetworkKind n) { return n == NetworkKind::Request ? "request" : "response"; }

/// All router planes of one network. Plane p = k * Q + r is the r-th router of channel class
/// k in every group; each plane is an independent mesh_x by mesh_y grid.
class MeshNetwork {
 public:
  MeshNetwork(const NetworkConfig& cfg, NetworkKind kind)
      : kind_(kind), mesh_x_(cfg.mesh_x), mesh_y_(cfg.mesh_y), groups_(cfg.num_groups()),
        planes_(cfg.channels_per_tile * cfg.tiles_per_group), q_(cfg.tiles_per_group) {
    cfg.validate();
    routers_.reserve(static_cast<std::size_t>(planes_) * groups_);
    for (std::uint32_t p = 0; p < planes_; ++p)
      for (std::uint32_t g = 0; g < groups_; ++g)
        routers_.emplace_back(group_coord(g, cfg), cfg.fifo_depth, cfg.hop_latency);
  }

  NetworkKind kind() const { return kind_; }
  std::uint32_t planes() const { return planes_; }
  std::uint32_t groups() const { return groups_; }
  std::uint32_t plane_of(std::uint32_t k, std::uint32_t slot) const { return k * q_ + slot; }

  Router& router(std::uint32_t plane, std::uint32_t group) { return routers_[plane * groups_ + group]; }
  const Router& router(std::uint32_t plane, std::uint32_t group) const { return routers_[plane * groups_ + group]; }

  std::optional<std::uint32_t> neighbor(std::uint32_t group, Port dir) const {
    const MeshCoord c{static_cast<int>(group % mesh_x_), static_cast<int>(group / mesh_x_)};
    const MeshCoord n = step_toward(c, dir);
    if (n.x < 0 || n.y < 0 || n.x >= static_cast<int>(mesh_x_) || n.y >= static_cast<int>(mesh_y_))
      return std::nullopt;
    return static_cast<std::uint32_t>(n.y) * mesh_x_ + static_cast<std::uint32_t>(n.x);
  }

  /// Link directions that exist in this mesh (one per unidirectional link).
  std::uint64_t link_directions() const { return mesh_link_directions(mesh_x_, mesh_y_); }
  std::uint64_t channels() const { return link_directions() * planes_; }

  void switch_planes(std::uint64_t now, std::uint32_t plane_begin, std::uint32_t plane_end) {
    for (std::uint32_t p = plane_begin; p < plane_end; ++p)
      for (std::uint32_t g = 0; g < groups_; ++g) router(p, g).switch_allocate(now);
  }

  void link_planes(std::uint64_t now, std::uint32_t plane_begin, std::uint32_t plane_end) {
    for (std::uint32_t p = plane_begin; p < plane_end; ++p) {
      for (std::uint32_t g = 0; g < groups_; ++g) {
        router(p, g).link_traverse(now, [&](Port d) -> FlitFifo* {
          const auto n = neighbor(g, d);
          return n ? &router(p, *n).input(opposite(d)) : nullptr;
        });
      }
    }
  }

  /// Sequential step of every plane; the engine splits the two halves across workers.
  void step(std::uint64_t now) {
    switch_planes(now, 0, planes_);
    link_planes(now, 0, planes_);
  }

  void reset_counters() {
    for (auto& r : routers_) r.reset_counters();
  }

  bool idle() const {
    for (const auto& r : routers_)
      if (!r.idle()) return false;
    return true;
  }

  std::size_t occupancy() const {
    std::size_t n = 0;
    for (const auto& r : routers_) n += r.occupancy();
    return n;
  }

  std::size_t max_fifo_occupancy() const {
    std::size_t n = 0;
    for (const auto& r : routers_) n = std::max(n, r.max_fifo_occupancy());
    return n;
  }

  void dump_blocked(std::ostream& os) const {
    for (std::uint32_t p = 0; p < planes_; ++p) {
      for (std::uint32_t g = 0; g < groups_; ++g) {
        const Router& r = router(p, g);
        if (r.idle()) continue;
        os << to_string(kind_) << " plane " << p << " group " << g << ":";
        for (std::size_t port = 0; port < kNumPorts; ++port) {
          const auto pp = static_cast<Port>(port);
          if (r.input(pp).size() || r.output(pp).size())
            os << " " << to_string(pp) << "[in " << r.input(pp).size() << " out " << r.output(pp).size() << "]";
        }
        os << "\n";
      }
    }
  }

 private:
  NetworkKind kind_;
  std::uint32_t mesh_x_, mesh_y_, groups_, planes_, q_;
  std::vector<Router> routers_;
};

inline MeshNetwork build_mesh(const NetworkConfig& cfg, NetworkKind kind) { return MeshNetwork(cfg, kind); }

}  // namespace meshbar
