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

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include "config.hpp"

namespace meshbar {

enum class MsgKind : std::uint8_t { ReadReq, WriteReq, Response };

/// How a request entered its target tile; the response leaves the same way.
enum class Ingress : std::uint8_t { LocalCore, IntraGroup, Remote };

/// One word-width transaction. The network is single-flit, so this is also the flit.
struct Message {
  std::uint64_t id = 0;
  MsgKind kind = MsgKind::ReadReq;
  bool is_write = false;     // write request, or the ack answering one
  bool has_payload = false;  // write data or read data
  NodeId src;                // issuing core
  BankCoordinate dst;        // target bank
  std::uint32_t tag = 0;
  DestClass dest_class = DestClass::LocalTile;
  Ingress ingress = Ingress::LocalCore;
  std::uint32_t channel_class = 0;  // k, for mesh traffic

  // Routing header for the network the message is currently in.
  MeshCoord route_dst;
  std::uint32_t route_tile = 0;  // tile to deliver to inside the destination group

  std::uint64_t issue_cycle = 0;
  std::int64_t last_stage_cycle = -1;  // last cycle a registered stage was entered
  std::uint32_t hops = 0;              // mesh hops taken, both networks together
  std::uint32_t req_router_slot = 0;   // router plane latched at request injection
  std::uint32_t rsp_router_slot = 0;   // router plane latched at response injection

  bool is_request() const { return kind != MsgKind::Response; }
};

class ProtocolViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Answer type for a request: read data or write acknowledgment, routed back to the core.
inline Message make_response(const Message& req, const NetworkConfig& cfg) {
  Message r = req;
  r.kind = MsgKind::Response;
  r.has_payload = !req.is_write;
  r.route_dst = group_coord(req.src.group, cfg);
  r.route_tile = req.src.tile;
  return r;
}

}  // namespace meshbar
