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
 * @file xbar.hpp
 * @brief Fully connected single-cycle crossbar with per-output round-robin arbitration.
 *
 * The crossbar is combinational: a granted message crosses from input to output in the
 * cycle it is granted. Arbitration can be done in one shot (arbitrate) when the output
 * ready vector is known up front, or split into pick/commit when readiness is itself
 * decided by a downstream arbiter in the same cycle.
 */

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace meshbar {

struct Handshake {
  bool valid = false;
  bool ready = false;
  bool fires() const { return valid && ready; }
};

class RoundRobinArbiter {
 public:
  RoundRobinArbiter() = default;
  explicit RoundRobinArbiter(std::size_t n_inputs) : n_(n_inputs) {}

  /// First requesting input at or after the pointer, scanning cyclically.
  template <class Requesting>
  std::optional<std::size_t> pick(Requesting&& requesting) const {
    for (std::size_t k = 0; k < n_; ++k) {
      const std::size_t i = (ptr_ + k) % n_;
      if (requesting(i)) return i;
    }
    return std::nullopt;
  }

  void advance(std::size_t granted) { ptr_ = (granted + 1) % n_; }

  std::size_t pointer() const { return ptr_; }
  std::size_t size() const { return n_; }

 private:
  std::size_t n_ = 0;
  std::size_t ptr_ = 0;
};

class Crossbar {
 public:
  Crossbar() = default;
  Crossbar(std::size_t n_inputs, std::size_t n_outputs)
      : n_inputs_(n_inputs), arbiters_(n_outputs, RoundRobinArbiter(n_inputs)) {}

  std::size_t n_inputs() const { return n_inputs_; }
  std::size_t n_outputs() const { return arbiters_.size(); }
  std::size_t rr_pointer(std::size_t output) const { return arbiters_[output].pointer(); }

  template <class Requesting>
  std::optional<std::size_t> pick(std::size_t output, Requesting&& requesting) const {
    return arbiters_[output].pick(std::forward<Requesting>(requesting));
  }

  void commit(std::size_t output, std::size_t input) { arbiters_[output].advance(input); }

  /// requests[i] is the output input i asks for. Grants at most one input per ready output
  /// and advances that output's pointer; non-ready outputs keep their pointer.
  std::vector<std::optional<std::size_t>> arbitrate(std::span<const std::optional<std::size_t>> requests,
                                                    std::span<const bool> ready) {
    std::vector<std::optional<std::size_t>> grants(n_outputs());
    for (std::size_t o = 0; o < n_outputs(); ++o) {
      if (!ready[o]) continue;
      grants[o] = pick(o, [&](std::size_t i) { return i < requests.size() && requests[i] == o; });
      if (grants[o]) commit(o, *grants[o]);
    }
    return grants;
  }

 private:
  std::size_t n_inputs_ = 0;
  std::vector<RoundRobinArbiter> arbiters_;
};

template <class T>
struct PendingTransfer {
  T message;
  std::size_t output = 0;
};

template <class T>
struct Transfer {
  std::size_t input = 0;
  std::size_t output = 0;
  T message;
};

template <class T>
struct TraverseResult {
  std::vector<Transfer<T>> transfers;
  std::size_t stalls = 0;  // pending inputs left behind this cycle
};

/// One cycle of combinational traversal: winners leave their input slot, losers stay pending.
template <class T>
TraverseResult<T> traverse(Crossbar& xbar, std::vector<std::optional<PendingTransfer<T>>>& inputs,
                           std::span<const bool> ready) {
  std::vector<std::optional<std::size_t>> requests(inputs.size());
  for (std::size_t i = 0; i < inputs.size(); ++i)
    if (inputs[i]) requests[i] = inputs[i]->output;
  const auto grants = xbar.arbitrate(requests, ready);
  TraverseResult<T> r;
  for (std::size_t o = 0; o < grants.size(); ++o) {
    if (!grants[o]) continue;
    const std::size_t i = *grants[o];
    r.transfers.push_back({i, o, std::move(inputs[i]->message)});
    inputs[i].reset();
  }
  for (const auto& in : inputs)
    if (in) ++r.stalls;
  return r;
}

}  // namespace meshbar
