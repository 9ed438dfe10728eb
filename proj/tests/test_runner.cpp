#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "erm/common.hpp"
#include "erm/io.hpp"
#include "erm/runner.hpp"

using namespace erm;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const char* name) {
  fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  return dir;
}

std::string thrown_message(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const std::exception& ex) {
    return ex.what();
  }
  return {};
}

const char* kTwoScenarioConfig = R"({
  "seed": 20260813,
  "scenarios": [
    {
      "id": "normal-sequence",
      "n": 8,
      "sigma": 1.0,
      "replicates": 400,
      "t_grid": [0.5, 1.0, 2.0],
      "penalty": {"kind": "ridge", "lambda": 0.1}
    },
    {
      "id": "normal-sequence",
      "seed": 77,
      "n": 6,
      "replicates": 300,
      "t_grid": [1.0, 2.0]
    }
  ]
})";

}  // namespace

TEST_CASE("run config parsing validates and defaults") {
  RunConfig config = parse_run_config_text(R"({"seed": 42})", "cfg");
  CHECK(config.seed == 42);
  CHECK(config.workers == 1);
  CHECK(config.out_dir.empty());
  CHECK(config.scenarios.empty());
  REQUIRE(config.formats.size() == 2);
  CHECK(config.formats[0] == "csv");
  CHECK(config.formats[1] == "json");

  RunConfig big = parse_run_config_text(R"({"seed": 9223372036854775813})", "cfg");
  CHECK(big.seed == (1ULL << 63) + 5ULL);

  std::string missing_seed =
      thrown_message([] { parse_run_config_text(R"({"workers": 2})", "cfg"); });
  CHECK(missing_seed.find("seed") != std::string::npos);

  std::string syntax =
      thrown_message([] { parse_run_config_text("{\n\"seed\": 1,\n}", "cfg"); });
  CHECK(syntax.find("cfg:3") != std::string::npos);

  CHECK_THROWS_AS(parse_run_config_text(R"({"seed": 1, "workers": 0})", "cfg"), ArgumentError);
  CHECK_THROWS_AS(parse_run_config_text(R"({"seed": 1, "formats": []})", "cfg"), ArgumentError);
  CHECK_THROWS_AS(parse_run_config_text(R"({"seed": 1, "formats": ["xml"]})", "cfg"),
                  ArgumentError);
  CHECK_THROWS_AS(parse_run_config_text(R"({"seed": 1, "scenarios": 5})", "cfg"), ArgumentError);
  CHECK_THROWS_AS(parse_run_config_text("[1, 2]", "cfg"), ArgumentError);
}

TEST_CASE("empty scenario list still yields a manifest") {
  fs::path dir = fresh_dir("erm-runner-empty");
  RunConfig config;
  config.seed = 1;
  config.out_dir = dir;
  std::ostringstream log;
  CHECK(run(config, log) == 0);
  CHECK(fs::exists(dir / "manifest.json"));
  CHECK(read_manifest(dir / "manifest.json").empty());
  CHECK(log.str().find("manifest:") != std::string::npos);
  CHECK(report(dir / "manifest.json") == "no runs\n");
  fs::remove_all(dir);
}

TEST_CASE("run refuses unset or already-populated output directories") {
  RunConfig config;
  config.seed = 1;
  std::ostringstream log;
  CHECK_THROWS_AS(run(config, log), ArgumentError);

  fs::path dir = fresh_dir("erm-runner-populated");
  fs::create_directories(dir);
  write_text_file(dir / "stale.txt", "x");
  config.out_dir = dir;
  std::string message = thrown_message([&] { run(config, log); });
  CHECK(message.find("not empty") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("unknown scenario ids are rejected") {
  fs::path dir = fresh_dir("erm-runner-unknown");
  RunConfig config = parse_run_config_text(
      R"({"seed": 1, "scenarios": [{"id": "bogus"}]})", "cfg");
  config.out_dir = dir;
  std::ostringstream log;
  std::string message = thrown_message([&] { run(config, log); });
  CHECK(message.find("unknown scenario id") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("reruns are byte-identical across directories and worker counts") {
  fs::path dir_a = fresh_dir("erm-runner-bytes-a");
  fs::path dir_b = fresh_dir("erm-runner-bytes-b");

  RunConfig config_a = parse_run_config_text(kTwoScenarioConfig, "cfg");
  config_a.out_dir = dir_a;
  config_a.workers = 1;
  RunConfig config_b = parse_run_config_text(kTwoScenarioConfig, "cfg");
  config_b.out_dir = dir_b;
  config_b.workers = 3;

  std::ostringstream log_a, log_b;
  CHECK(run(config_a, log_a) == 0);
  CHECK(run(config_b, log_b) == 0);

  auto entries_a = read_manifest(dir_a / "manifest.json");
  auto entries_b = read_manifest(dir_b / "manifest.json");
  REQUIRE(entries_a.size() == 7);
  REQUIRE(entries_b.size() == entries_a.size());
  CHECK(read_text_file(dir_a / "manifest.json") == read_text_file(dir_b / "manifest.json"));
  for (std::size_t i = 0; i < entries_a.size(); ++i) {
    CHECK(entries_a[i].file == entries_b[i].file);
    CHECK(entries_a[i].sha256 == entries_b[i].sha256);
    CHECK(read_text_file(dir_a / entries_a[i].file) ==
          read_text_file(dir_b / entries_b[i].file));
    CHECK(sha256_file(dir_a / entries_a[i].file) == entries_a[i].sha256);
  }

  CHECK(entries_a[0].file == "01-normal-sequence-detail.json");
  CHECK(entries_a[1].file == "01-normal-sequence.csv");
  std::string csv = read_text_file(dir_a / "01-normal-sequence.csv");
  CHECK(csv.substr(0, csv.find('\n')) == "t,bound,freq,se,flagged");

  std::string rep = report(dir_a / "manifest.json");
  CHECK(rep.find("normal-sequence") != std::string::npos);
  CHECK(rep.find("PASS") != std::string::npos);

  fs::remove(dir_a / "01-normal-sequence.csv");
  CHECK_THROWS_AS(report(dir_a / "manifest.json"), ArgumentError);
  CHECK_THROWS(report(dir_a / "missing" / "manifest.json"));

  fs::remove_all(dir_a);
  fs::remove_all(dir_b);
}
