#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace erm {

// A batch of scenarios driven by one config file. The seed must be explicit
// so a run is reproducible from its config alone.
struct RunConfig {
  std::filesystem::path out_dir;
  std::uint64_t seed = 0;
  int workers = 1;
  std::vector<std::string> formats = {"csv", "json"};  // table serializations
  std::vector<nlohmann::ordered_json> scenarios;
};

RunConfig parse_run_config_text(const std::string& text, const std::string& source_name);
RunConfig parse_run_config(const std::filesystem::path& path);

// Executes every scenario in order and writes its artifacts plus manifest.json
// under out_dir, which must be empty or absent (the manifest lists every file,
// so stale files are refused rather than orphaned). Returns 0 when clean and
// 2 when any scenario raised a flag; errors throw.
int run(const RunConfig& config, std::ostream& log);

// Per-scenario pass/flag summary with the key numbers from the summary
// artifacts. Throws when the manifest or a referenced file is missing.
std::string report(const std::filesystem::path& manifest_path);

}  // namespace erm
