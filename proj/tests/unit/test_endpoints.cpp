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

#include <catch_amalgamated.hpp>

#include <set>

#include "meshbar/endpoints.hpp"

using namespace meshbar;
using Catch::Approx;

namespace {

std::unique_ptr<IntentSource> reads(const NetworkConfig& cfg, std::size_t n, std::uint64_t addr = 0) {
  std::vector<AccessIntent> v;
  for (std::size_t i = 0; i < n; ++i) v.push_back({AccessKind::Read, addr, 0, 0});
  (void)cfg;
  return std::make_unique<VectorSource>(std::move(v));
}

double store_to_load(const std::vector<AccessIntent>& v) {
  std::size_t w = 0, r = 0;
  for (const auto& a : v) ++(a.kind == AccessKind::Write ? w : r);
  return static_cast<double>(w) / static_cast<double>(r);
}

TrafficPattern pattern(PatternKind k, std::uint64_t seed = 1) {
  TrafficPattern p;
  p.kind = k;
  p.seed = seed;
  return p;
}

}  // namespace

TEST_CASE("core issues into an empty table") {
  const auto cfg = teranoc_1024();
  Core core(core_node(0, cfg), cfg.outstanding_entries, reads(cfg, 1));
  const auto r = core_step(core, {}, true, 0, cfg);
  REQUIRE(r.issued);
  CHECK(core.outstanding() == 1);
  CHECK_FALSE(r.stall);
  CHECK(r.issued->issue_cycle == 0);
  CHECK(r.issued->dest_class == DestClass::LocalTile);
}

TEST_CASE("full table stalls with the table-full reason") {
  const auto cfg = teranoc_1024();
  Core core(core_node(0, cfg), cfg.outstanding_entries, reads(cfg, 9));
  std::set<std::uint32_t> tags;
  for (std::uint64_t t = 0; t < 8; ++t) {
    const auto r = core_step(core, {}, true, t, cfg);
    REQUIRE(r.issued);
    tags.insert(r.issued->tag);
  }
  CHECK(tags.size() == 8);
  CHECK(core.table_full());
  const auto r = core_step(core, {}, true, 8, cfg);
  CHECK_FALSE(r.issued);
  CHECK(r.stall == StallReason::TableFull);
  CHECK(core.lifetime().stall_table_full == 1);
}

TEST_CASE("at most one issue per cycle, backpressure and idle stalls") {
  const auto cfg = teranoc_1024();
  Core core(core_node(0, cfg), cfg.outstanding_entries, reads(cfg, 3));
  const auto a = core_step(core, {}, false, 0, cfg);
  CHECK(a.stall == StallReason::Backpressure);
  const auto b = core_step(core, {}, true, 1, cfg);
  CHECK(b.issued);
  CHECK(core.lifetime().issued == 1);
  core_step(core, {}, true, 2, cfg);
  core_step(core, {}, true, 3, cfg);
  const auto d = core_step(core, {}, true, 4, cfg);
  CHECK(d.stall == StallReason::Idle);
  CHECK(core.lifetime().issued == 3);
}

TEST_CASE("retiring a response frees its tag and records latency") {
  const auto cfg = teranoc_1024();
  Core core(core_node(0, cfg), cfg.outstanding_entries, reads(cfg, 2));
  const auto r = core_step(core, {}, true, 10, cfg);
  REQUIRE(r.issued);
  Message rsp = make_response(*r.issued, cfg);
  const auto s = core_step(core, std::span<const Message>(&rsp, 1), true, 14, cfg);
  REQUIRE(s.retired.size() == 1);
  CHECK(s.retired[0].latency == 4);
  CHECK(core.outstanding() == 1);  // the second read issued in the same step
  CHECK(core.lifetime().retired == 1);
  CHECK(core.lifetime().reads_retired == 1);
}

TEST_CASE("a response with an unknown tag is a protocol violation") {
  const auto cfg = teranoc_1024();
  Core core(core_node(0, cfg), cfg.outstanding_entries, reads(cfg, 0));
  CHECK_THROWS_AS(core.retire(3, 5), ProtocolViolation);
  CHECK_THROWS_AS(core.retire(99, 5), ProtocolViolation);
}

TEST_CASE("intents wait for their earliest issue cycle and gap") {
  const auto cfg = teranoc_1024();
  std::vector<AccessIntent> v{{AccessKind::Read, 0, 5, 0}, {AccessKind::Read, 4, 0, 3}};
  Core core(core_node(0, cfg), 8, std::make_unique<VectorSource>(v));
  std::vector<std::uint64_t> issued_at;
  for (std::uint64_t t = 0; t < 20; ++t)
    if (core_step(core, {}, true, t, cfg).issued) issued_at.push_back(t);
  CHECK(issued_at == std::vector<std::uint64_t>{5, 8});
}

TEST_CASE("bank answers reads and writes one cycle later") {
  const auto cfg = teranoc_1024();
  Bank bank;
  Message rd = make_request(core_node(0, cfg), {AccessKind::Read, 0, 0, 0}, cfg);
  CHECK_FALSE(bank_step(bank, std::nullopt, 0, cfg));
  CHECK(bank.idle());
  REQUIRE(bank_step(bank, rd, 3, cfg));
  CHECK_FALSE(bank.has_response(3));
  CHECK(bank.has_response(4));
  CHECK_FALSE(bank.can_accept());
  CHECK_FALSE(bank_step(bank, rd, 3, cfg));
  const Message r = bank.take_response();
  CHECK(r.kind == MsgKind::Response);
  CHECK(r.has_payload);

  Message wr = make_request(core_node(0, cfg), {AccessKind::Write, 8, 0, 0}, cfg);
  REQUIRE(bank_step(bank, wr, 7, cfg));
  CHECK(bank.has_response(8));
  const Message ack = bank.take_response();
  CHECK(ack.is_write);
  CHECK_FALSE(ack.has_payload);
  CHECK(bank.accepted() == 2);
}

TEST_CASE("LocalTile targets only the core's own tile") {
  const auto cfg = teranoc_1024();
  for (std::uint32_t core : {0u, 5u, 777u}) {
    const NodeId n = core_node(core, cfg);
    for (const auto& a : generate_pattern(pattern(PatternKind::LocalTile), cfg, core, 2000)) {
      const auto b = decode_address(a.target, cfg);
      REQUIRE(b.group == n.group);
      REQUIRE(b.tile == n.tile);
    }
  }
}

TEST_CASE("IntraGroup stays in the group and Hotspot hits only its group") {
  const auto cfg = teranoc_1024();
  const NodeId n = core_node(70, cfg);
  std::set<std::uint32_t> tiles;
  for (const auto& a : generate_pattern(pattern(PatternKind::IntraGroup), cfg, 70, 4000)) {
    const auto b = decode_address(a.target, cfg);
    REQUIRE(b.group == n.group);
    tiles.insert(b.tile);
  }
  CHECK(tiles.size() == cfg.tiles_per_group);

  auto hot = pattern(PatternKind::Hotspot);
  hot.hotspot_group = 5;
  for (const auto& a : generate_pattern(hot, cfg, 0, 4000)) REQUIRE(decode_address(a.target, cfg).group == 5);
  hot.hotspot_group = 16;
  CHECK_THROWS_AS(hot.validate(cfg), ConfigError);
}

TEST_CASE("UniformRandom spreads over every group") {
  const auto cfg = teranoc_1024();
  std::vector<std::uint64_t> per(cfg.num_groups(), 0);
  const std::size_t n = 32000;
  for (const auto& a : generate_pattern(pattern(PatternKind::UniformRandom), cfg, 3, n))
    ++per[decode_address(a.target, cfg).group];
  const double expect = static_cast<double>(n) / cfg.num_groups();
  for (auto c : per) {
    CHECK(static_cast<double>(c) > 0.85 * expect);
    CHECK(static_cast<double>(c) < 1.15 * expect);
  }
}

TEST_CASE("Conv2dLike reads stay in the own and adjacent groups") {
  const auto cfg = teranoc_1024();
  const std::uint32_t core = 5 * 64;  // group 5, centre of the mesh
  std::set<std::uint32_t> groups;
  for (const auto& a : generate_pattern(pattern(PatternKind::Conv2dLike), cfg, core, 5000))
    if (a.kind == AccessKind::Read) groups.insert(decode_address(a.target, cfg).group);
  CHECK(groups == std::set<std::uint32_t>{1, 4, 5, 6, 9});
}

TEST_CASE("kernel store-to-load ratios over 10^4 intents") {
  const auto cfg = teranoc_1024();
  for (std::uint32_t core : {0u, 513u, 1023u}) {
    CHECK(store_to_load(generate_pattern(pattern(PatternKind::MatMulLike), cfg, core, 10000)) ==
          Approx(0.016).margin(0.005));
    CHECK(store_to_load(generate_pattern(pattern(PatternKind::Conv2dLike), cfg, core, 10000)) ==
          Approx(0.056).margin(0.01));
    CHECK(store_to_load(generate_pattern(pattern(PatternKind::AxpyLike), cfg, core, 10000)) ==
          Approx(0.5).margin(0.01));
    CHECK(store_to_load(generate_pattern(pattern(PatternKind::DotpLike), cfg, core, 10000)) ==
          Approx(0.33).margin(0.02));
  }
  auto uni = pattern(PatternKind::UniformRandom);
  uni.store_ratio = 0.25;
  CHECK(store_to_load(generate_pattern(uni, cfg, 9, 20000)) == Approx(0.25).margin(0.02));
}

TEST_CASE("MatMulLike: compute gap after every eight loads, all operands remote-capable") {
  const auto cfg = teranoc_1024();
  const auto v = generate_pattern(pattern(PatternKind::MatMulLike), cfg, 100, 2000);
  std::size_t loads = 0, gaps = 0;
  std::set<std::uint32_t> groups;
  for (const auto& a : v) {
    if (a.kind != AccessKind::Read) continue;
    if (loads > 0 && loads % 8 == 0) {
      CHECK(a.gap == 17);
      ++gaps;
    } else {
      CHECK(a.gap == 1);
    }
    ++loads;
    groups.insert(decode_address(a.target, cfg).group);
  }
  CHECK(gaps > 0);
  CHECK(groups.size() > 2);
}

TEST_CASE("patterns are deterministic per (pattern, seed, core)") {
  const auto cfg = teranoc_1024();
  for (auto k : {PatternKind::UniformRandom, PatternKind::LocalTile, PatternKind::IntraGroup, PatternKind::Hotspot,
                 PatternKind::MatMulLike, PatternKind::AxpyLike, PatternKind::DotpLike, PatternKind::Conv2dLike}) {
    auto p = pattern(k, 42);
    p.injection_rate = 0.7;
    const auto a = generate_pattern(p, cfg, 17, 3000);
    const auto b = generate_pattern(p, cfg, 17, 3000);
    CHECK(a == b);
    for (const auto& x : a) {
      REQUIRE(x.target % cfg.word_bytes == 0);
      REQUIRE(x.target < cfg.capacity_bytes());
    }
  }
  const auto s1 = generate_pattern(pattern(PatternKind::UniformRandom, 1), cfg, 17, 100);
  const auto s2 = generate_pattern(pattern(PatternKind::UniformRandom, 2), cfg, 17, 100);
  const auto c2 = generate_pattern(pattern(PatternKind::UniformRandom, 1), cfg, 18, 100);
  CHECK(s1 != s2);
  CHECK(s1 != c2);
}

TEST_CASE("injection rate sets the mean spacing of intents") {
  const auto cfg = teranoc_1024();
  auto p = pattern(PatternKind::UniformRandom);
  p.injection_rate = 0.25;
  const auto v = generate_pattern(p, cfg, 0, 8000);
  const double span = static_cast<double>(v.back().earliest_issue_cycle + 1);
  CHECK(static_cast<double>(v.size()) / span == Approx(0.25).margin(0.02));
  p.injection_rate = 0.0;
  CHECK(generate_pattern(p, cfg, 0, 10).empty());
  p.injection_rate = 1.5;
  CHECK_THROWS_AS(p.validate(cfg), ConfigError);
}

TEST_CASE("pattern names parse") {
  for (auto k : {PatternKind::UniformRandom, PatternKind::MatMulLike, PatternKind::Conv2dLike})
    CHECK(parse_pattern_kind(to_string(k)) == k);
  CHECK_FALSE(parse_pattern_kind("fft"));
}

TEST_CASE("trace parsing") {
  const auto cfg = tiny_2x2();
  const auto t = parse_trace(
      "# cycle core kind address\n"
      "0 0 R 0x0\n"
      "3, 0, W, 16\n"
      "\n"
      "2 31 load 0x100   # last core\n",
      cfg);
  REQUIRE(t.size() == cfg.total_cores());
  REQUIRE(t[0].size() == 2);
  CHECK(t[0][0] == AccessIntent{AccessKind::Read, 0, 0, 0});
  CHECK(t[0][1] == AccessIntent{AccessKind::Write, 16, 3, 0});
  REQUIRE(t[31].size() == 1);
  CHECK(t[31][0].target == 0x100);

  CHECK_THROWS_AS(parse_trace("0 0 R\n", cfg), ConfigError);
  CHECK_THROWS_AS(parse_trace("0 32 R 0\n", cfg), ConfigError);
  CHECK_THROWS_AS(parse_trace("0 0 X 0\n", cfg), ConfigError);
  CHECK_THROWS_AS(parse_trace("0 0 R 2\n", cfg), ConfigError);
  CHECK_THROWS_AS(parse_trace("0 0 R 0x1000000\n", cfg), ConfigError);
  CHECK_THROWS_AS(parse_trace("5 0 R 0\n4 0 R 0\n", cfg), ConfigError);
  CHECK_THROWS_WITH(parse_trace("0 0 R 0\nzz 0 R 0\n", cfg), Catch::Matchers::ContainsSubstring("line 2"));
}
