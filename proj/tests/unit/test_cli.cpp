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

#include <filesystem>
#include <fstream>
#include <sstream>

#include "meshbar/cli.hpp"

using namespace meshbar;
namespace fs = std::filesystem;

namespace {

const std::string kData = MESHBAR_TEST_DATA_DIR;

struct Result {
  int code = 0;
  std::string out, err;
};

Result cli(std::vector<std::string> args) {
  args.insert(args.begin(), "meshbar");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("meshbar_cli_test_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("analyze prints the closed-form table") {
  const auto r = cli({"analyze"});
  REQUIRE(r.code == kExitOk);
  CHECK(r.out.find("hierarchical") != std::string::npos);
  CHECK(r.out.find("31") != std::string::npos);
  CHECK(r.out.find("13.7") != std::string::npos);
  CHECK(r.out.find("127") != std::string::npos);
  CHECK(r.out.find("45.7") != std::string::npos);
}

TEST_CASE("analyze --json values for TERANOC_1024") {
  const auto r = cli({"analyze", "--json"});
  REQUIRE(r.code == kExitOk);
  const auto j = Json::parse(r.out);
  CHECK(j["hierarchical"]["max_cycles"] == 31);
  CHECK(j["hierarchical"]["avg_cycles"].get<double>() == 13.7);
  CHECK(j["flat_mesh"]["max_cycles"] == 127);
  CHECK(j["flat_mesh"]["avg_cycles"].get<double>() == 45.7);
  CHECK(j["critical_complexity"] == 256);
  CHECK(j["flat_mesh"]["critical_complexity"] == 4194304);
  CHECK(j["round_trip"]["local"] == 1);
  CHECK(j["round_trip"]["intra_group"] == 3);
  CHECK(j["round_trip"]["one_hop"] == 7);
  CHECK(j["structural"]["response_channels"] == 1536);
  CHECK(j["structural"]["bisection_bytes_per_cycle"] == 512);
}

TEST_CASE("analyze applies a config file") {
  const auto r = cli({"analyze", "--json", "--preset", "TINY_2x2", "--config", kData + "/small.cfg"});
  REQUIRE(r.code == kExitOk);
  const auto j = Json::parse(r.out);
  CHECK(j["config"].get<std::string>().find("fifo_depth = 3") != std::string::npos);
  CHECK(j["config"].get<std::string>().find("remap_mode = Static") != std::string::npos);
  CHECK(j["hierarchical"]["n_top"] == 4);
}

TEST_CASE("configuration errors exit with code 2") {
  CHECK(cli({"analyze", "--config", kData + "/bad.cfg"}).code == kExitConfig);
  CHECK(cli({"analyze", "--config", kData + "/invalid.cfg"}).code == kExitConfig);
  CHECK(cli({"analyze", "--config", kData + "/missing.cfg"}).code == kExitConfig);
  CHECK(cli({"analyze", "--preset", "HUGE"}).code == kExitConfig);
  CHECK(cli({"analyze", "--bogus"}).code == kExitConfig);
  CHECK(cli({}).code == kExitConfig);
  const auto out = scratch("errors");
  CHECK(cli({"run", "--preset", "TINY_2x2", "--pattern", "fft", "--out", out.string()}).code == kExitConfig);
  CHECK(cli({"run", "--preset", "TINY_2x2", "--injection", "2", "--out", out.string()}).code == kExitConfig);
  CHECK(cli({"run", "--preset", "TINY_2x2", "--remap", "sometimes", "--out", out.string()}).code == kExitConfig);
  CHECK(cli({"run", "--preset", "TINY_2x2", "--trace", kData + "/bad.trace", "--out", out.string()}).code ==
        kExitConfig);
  CHECK(cli({"sweep", "--preset", "TINY_2x2", "--axis", "colour=red", "--out", out.string()}).code == kExitConfig);
  CHECK(cli({"sweep", "--preset", "TINY_2x2", "--axis", "q=3", "--out", out.string()}).code == kExitConfig);
  const auto e = cli({"analyze", "--config", kData + "/bad.cfg"});
  CHECK(e.err.find("line 2") != std::string::npos);
}

TEST_CASE("describe lists instance counts") {
  const auto r = cli({"describe"});
  REQUIRE(r.code == kExitOk);
  CHECK(r.out.find("channels per network") != std::string::npos);
  CHECK(r.out.find("1536") != std::string::npos);
  CHECK(r.out.find("1024") != std::string::npos);
}

TEST_CASE("run writes every output file") {
  const auto out = scratch("run");
  const auto r = cli({"run", "--preset", "TINY_2x2", "--window", "300", "--warmup", "50", "--out", out.string()});
  REQUIRE(r.code == kExitOk);
  for (const char* f : {"report.json", "heatmap.csv", "latency_histogram.csv", "heatmap_request_mean.pgm",
                        "heatmap_request_max.pgm", "heatmap_response_mean.pgm", "heatmap_response_max.pgm",
                        "heatmap_combined_mean.pgm", "heatmap_combined_max.pgm"})
    CHECK(fs::exists(out / f));
  const auto j = Json::parse(slurp(out / "report.json"));
  CHECK(j["run_spec"]["window"] == 300);
  CHECK(j["run_spec"]["preset"] == "TINY_2x2");
  const auto back = report_from_json(j);
  CHECK(back.window == 300);
  CHECK(back.drained);
  CHECK(back.bytes_per_cycle > 0.0);
  CHECK(slurp(out / "heatmap.csv").rfind("# run_spec ", 0) == 0);
  CHECK(slurp(out / "heatmap_combined_max.pgm").rfind("P5\n# run_spec ", 0) == 0);
}

TEST_CASE("reruns are byte-identical, whatever the worker count") {
  const auto a = scratch("det_a"), b = scratch("det_b");
  const std::vector<std::string> base{"run", "--preset", "TINY_2x2", "--pattern", "hotspot", "--hotspot", "2",
                                      "--seed", "9", "--window", "400"};
  auto with = [&](const fs::path& out, const char* workers) {
    auto v = base;
    v.insert(v.end(), {"--out", out.string(), "--workers", workers});
    return cli(v).code;
  };
  REQUIRE(with(a, "1") == kExitOk);
  REQUIRE(with(b, "3") == kExitOk);
  for (const char* f : {"report.json", "heatmap.csv", "latency_histogram.csv", "heatmap_combined_mean.pgm"})
    CHECK(slurp(a / f) == slurp(b / f));
  REQUIRE(with(b, "1") == kExitOk);
  CHECK(slurp(a / "report.json") == slurp(b / "report.json"));
}

TEST_CASE("trace replay") {
  const auto out = scratch("trace");
  const auto r = cli({"run", "--preset", "TINY_2x2", "--trace", kData + "/small.trace", "--window", "100", "--out",
                      out.string()});
  REQUIRE(r.code == kExitOk);
  const auto rep = report_from_json(Json::parse(slurp(out / "report.json")));
  std::uint64_t retired = 0;
  for (const auto& c : rep.cores) retired += c.retired;
  CHECK(retired == 6);
  CHECK(rep.write_words == 2);
  CHECK(rep.read_words == 4);
}

TEST_CASE("ab-remap with no traffic reports zero deltas") {
  const auto out = scratch("ab_zero");
  const auto r =
      cli({"ab-remap", "--preset", "TINY_2x2", "--injection", "0", "--window", "100", "--out", out.string()});
  REQUIRE(r.code == kExitOk);
  const auto j = Json::parse(slurp(out / "ab_remap.json"));
  REQUIRE(j["variants"].size() == 2);
  CHECK(j["deltas"]["remap"]["mean_congestion"]["off"].get<double>() == 0.0);
  CHECK(j["deltas"]["remap"]["mean_congestion"]["on"].get<double>() == 0.0);
  CHECK(fs::exists(out / "off" / "report.json"));
  CHECK(fs::exists(out / "percycle" / "report.json"));
}

TEST_CASE("ab-remap --stride-axis runs four variants") {
  const auto out = scratch("ab_stride");
  const auto r = cli({"ab-remap", "--preset", "TINY_2x2", "--stride-axis", "--window", "200", "--out", out.string()});
  REQUIRE(r.code == kExitOk);
  const auto j = Json::parse(slurp(out / "ab_remap.json"));
  CHECK(j["variants"].size() == 4);
  CHECK(j["deltas"].contains("stride"));
  CHECK(j["deltas"].contains("block"));
  for (const char* v : {"stride_off", "stride_percycle", "block_off", "block_percycle"})
    CHECK(fs::exists(out / v / "report.json"));
}

TEST_CASE("sweep writes one row per grid point") {
  const auto out = scratch("sweep");
  const auto r = cli({"sweep", "--preset", "TINY_2x2", "--axis", "K=1,2,3", "--axis", "injection=0.2,0.6", "--window",
                      "200", "--jobs", "3", "--out", out.string()});
  REQUIRE(r.code == kExitOk);
  std::istringstream in(slurp(out / "sweep.csv"));
  std::string line;
  std::getline(in, line);
  CHECK(line.rfind("# run_spec ", 0) == 0);
  std::getline(in, line);
  CHECK(line.rfind("K,injection,bisection_bytes_per_cycle,", 0) == 0);
  std::vector<std::string> rows;
  while (std::getline(in, line)) rows.push_back(line);
  REQUIRE(rows.size() == 6);
  CHECK(rows[0].rfind("1,0.2,", 0) == 0);
  CHECK(rows[5].rfind("3,0.6,", 0) == 0);

  const auto one = scratch("sweep_mesh");
  REQUIRE(cli({"sweep", "--preset", "TINY_2x2", "--axis", "mesh=1x1,2x2,3x2", "--window", "100", "--out",
               one.string()})
              .code == kExitOk);
  CHECK(slurp(one / "sweep.csv").find("\n3x2,") != std::string::npos);
}
