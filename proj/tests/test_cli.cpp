#include "netflow/cli.hpp"
#include "netflow/network_io.hpp"

#include <doctest.h>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <sys/wait.h>

using namespace netflow;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("netflow_cli_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunConfig config(const std::string& command, const std::string& out) {
  RunConfig c;
  c.command = command;
  c.output = scratch(out).string();
  return c;
}

int shell(const std::string& args) {
  const std::string cmd = std::string(NETFLOW_BIN) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("check reports regularity") {
  auto c = config("check", "check_triod");
  c.fixture = "triod";
  std::ostringstream log;
  CHECK(run(c, log) == exit_code::ok);
  CHECK(log.str().find("regular") == 0);
  const auto m = json::parse(slurp(fs::path(c.output) / "manifest.json"));
  CHECK(m["exit_code"] == 0);
  CHECK(m["config"]["fixture"] == "triod");

  c.fixture = "cross";
  c.output = scratch("check_cross").string();
  std::ostringstream log2;
  CHECK(run(c, log2) == exit_code::ok);
  CHECK(log2.str().find("irregular vertices: v1") != std::string::npos);

  // the written network reloads
  const Network net = load_network((fs::path(c.output) / "network.json").string());
  CHECK(net.curves.size() == 4);
}

TEST_CASE("heatmodel tables pass both checks") {
  auto c = config("heatmodel", "heat");
  std::ostringstream log;
  CHECK(run(c, log) == exit_code::ok);
  CHECK(log.str().find("recursions: PASS") != std::string::npos);
  CHECK(log.str().find("c/A consistency: PASS") != std::string::npos);
  CHECK(fs::file_size(fs::path(c.output) / "heat_coefficients.csv") > 0);
}

TEST_CASE("evolve writes a trajectory of the resolved cross") {
  auto c = config("evolve", "evolve_a");
  c.topology = {"v1:12|34"};
  c.t_end = 0.03;
  c.snapshots = 3;
  c.emit_svg = true;
  std::ostringstream log;
  REQUIRE(run(c, log) == exit_code::ok);
  std::ifstream csv(fs::path(c.output) / "trajectory.csv");
  std::string line;
  std::getline(csv, line);
  CHECK(line == "t,curve,node,x,y");
  std::set<int> curves;
  std::set<std::string> times;
  while (std::getline(csv, line)) {
    std::stringstream ss(line);
    std::string t, k;
    std::getline(ss, t, ',');
    std::getline(ss, k, ',');
    times.insert(t);
    curves.insert(std::stoi(k));
  }
  CHECK(curves.size() == 5);
  CHECK(times.size() == 4);
  for (int i = 0; i < 4; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "frame_%04d.svg", i);
    CHECK(slurp(fs::path(c.output) / name).find("<svg") != std::string::npos);
  }
  const auto m = json::parse(slurp(fs::path(c.output) / "manifest.json"));
  CHECK(m["segments"][0]["audit"]["pass"] == true);

  SUBCASE("identical configs give identical bytes") {
    auto c2 = c;
    c2.output = scratch("evolve_b").string();
    std::ostringstream log2;
    REQUIRE(run(c2, log2) == exit_code::ok);
    CHECK(slurp(fs::path(c.output) / "trajectory.csv") == slurp(fs::path(c2.output) / "trajectory.csv"));
    CHECK(slurp(fs::path(c.output) / "frame_0003.svg") == slurp(fs::path(c2.output) / "frame_0003.svg"));
  }
}

TEST_CASE("config round trip") {
  RunConfig c;
  c.command = "evolve";
  c.topology = {"v1:13|24", "v2:123"};
  c.t0 = 0.0025;
  c.seed = 17;
  c.detect = true;
  c.fan = "0,100,200";
  const RunConfig back = config_from_json(config_to_json(c));
  CHECK(config_to_json(back) == config_to_json(c));
  CHECK(back.topology == c.topology);
  CHECK(back.t0 == c.t0);
  CHECK_THROWS_AS(config_from_json(R"({"t_zero": 1})"), ParseError);
  CHECK_THROWS_AS(config_from_json("{"), ParseError);
}

TEST_CASE("topology labels are 1-based") {
  const auto c = config("check", "labels");
  std::ostringstream log;
  REQUIRE(run([&] { auto d = c; d.fixture = "cross"; return d; }(), log) == 0);
  const Network net = load_network((fs::path(c.output) / "network.json").string());
  const auto ch = parse_choices({"v1:12|34"}, net);
  REQUIRE(ch.size() == 1);
  CHECK(ch.begin()->first == 0);
  CHECK_THROWS_AS(parse_choices({"v0:12|34"}, net), PreconditionError);
  CHECK_THROWS_AS(parse_choices({"1:12|34"}, net), ParseError);
  CHECK_THROWS(parse_choices({"v1:12|3"}, net));
}

TEST_CASE("exit codes") {
  std::ostringstream log;
  auto c = config("bogus", "bogus");
  CHECK(run(c, log) == exit_code::usage);

  c = config("check", "missing");
  c.input = "/nonexistent/network.json";
  CHECK(run(c, log) == exit_code::io);
  CHECK(json::parse(slurp(fs::path(c.output) / "manifest.json"))["exit_code"] == exit_code::io);

  c = config("evolve", "bad_dt");
  c.dt = -1;
  CHECK(run(c, log) == exit_code::invalid_input);

  c = config("evolve", "large_t0");
  c.topology = {"v1:12|34"};
  c.t0 = 2.0;
  CHECK(run(c, log) == exit_code::startup);

  const std::string out = scratch("bin").string();
  CHECK(shell("check --fixture triod -o " + out) == exit_code::ok);
  CHECK(shell("frobnicate") == exit_code::usage);
  CHECK(shell("evolve --t-end") == exit_code::usage);
  CHECK(shell("check -i /nonexistent.json -o " + out) == exit_code::io);
  CHECK(shell("--help") == exit_code::ok);
  {
    std::ofstream cfg(fs::path(out) / "run.json");
    cfg << R"({"fixture": "segment"})";
  }
  CHECK(shell("--config " + (fs::path(out) / "run.json").string() + " check -o " + out) == exit_code::ok);
  CHECK(json::parse(slurp(fs::path(out) / "manifest.json"))["config"]["fixture"] == "segment");
  CHECK(shell("--config " + (fs::path(out) / "run.json").string() + " check --fixture circle -o " + out) == exit_code::ok);
  CHECK(json::parse(slurp(fs::path(out) / "manifest.json"))["config"]["fixture"] == "circle");
}
