#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "erm/acceptance.hpp"
#include "erm/common.hpp"
#include "erm/io.hpp"
#include "erm/runner.hpp"

namespace {

using ordered_json = nlohmann::ordered_json;

struct CommonOpts {
  std::string config;
  std::string out;
  std::uint64_t seed = 0;
  bool has_seed = false;
  int workers = 0;
  std::vector<std::string> formats;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config, "JSON config file")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--out", opts.out, "output directory (overrides the config)");
  cmd->add_option("--seed", opts.seed, "global seed (overrides the config)")
      ->each([&opts](const std::string&) { opts.has_seed = true; });
  cmd->add_option("--workers", opts.workers, "worker threads")->check(CLI::PositiveNumber);
  cmd->add_option("--format", opts.formats, "output format, csv or json (repeatable)");
}

// Accepts either a full run config (a "scenarios" array) or a single scenario
// object, which subcommands constrain to their module.
erm::RunConfig load_config(const CommonOpts& opts, const std::string& required_prefix,
                           const std::string& default_id) {
  const std::string text = erm::read_text_file(opts.config);
  erm::RunConfig config;
  if (text.find("\"scenarios\"") != std::string::npos) {
    config = erm::parse_run_config_text(text, opts.config);
  } else {
    ordered_json doc;
    try {
      doc = ordered_json::parse(text);
    } catch (const nlohmann::json::parse_error& ex) {
      throw erm::ArgumentError(opts.config + ": " + ex.what());
    }
    if (!doc.is_object()) throw erm::ArgumentError(opts.config + ": expected an object");
    if (!doc.contains("id")) {
      if (default_id.empty()) throw erm::ArgumentError(opts.config + ": missing field 'id'");
      doc["id"] = default_id;
    }
    if (doc.contains("seed")) {
      config.seed = doc.at("seed").get<std::uint64_t>();
    } else if (!opts.has_seed) {
      throw erm::ArgumentError(opts.config +
                               ": provide a 'seed' field or --seed (runs must be reproducible)");
    }
    if (doc.contains("out")) config.out_dir = doc.at("out").get<std::string>();
    config.scenarios.push_back(std::move(doc));
  }

  if (opts.has_seed) config.seed = opts.seed;
  if (!opts.out.empty()) config.out_dir = opts.out;
  if (opts.workers > 0) config.workers = opts.workers;
  if (!opts.formats.empty()) {
    for (const auto& f : opts.formats) {
      if (f != "csv" && f != "json") throw erm::ArgumentError("unknown format '" + f + "'");
    }
    config.formats = opts.formats;
  }
  if (config.out_dir.empty()) {
    throw erm::ArgumentError("output directory required (--out or an 'out' config field)");
  }
  if (!required_prefix.empty()) {
    for (const auto& spec : config.scenarios) {
      const std::string id = spec.value("id", std::string());
      if (id.rfind(required_prefix, 0) != 0) {
        throw erm::ArgumentError("this subcommand runs '" + required_prefix +
                                 "*' scenarios, got '" + id + "'");
      }
    }
  }
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"concentration experiments for penalized empirical risk minimization"};
  app.require_subcommand(1);

  int exit_code = 0;
  CommonOpts direct_opts, curve_opts, margin_opts, expfam_opts, scenario_opts;

  auto* direct = app.add_subcommand("direct", "normal-sequence deviation experiments");
  add_common(direct, direct_opts);
  direct->callback([&] {
    exit_code = erm::run(load_config(direct_opts, "normal-sequence", "normal-sequence"),
                         std::cout);
  });

  auto* curve = app.add_subcommand("curve", "risk-curve experiments");
  add_common(curve, curve_opts);
  curve->callback([&] {
    exit_code = erm::run(load_config(curve_opts, "gaussian-curve", "gaussian-curve"), std::cout);
  });

  auto* margin = app.add_subcommand("margin", "margin and deviation-bound tables");
  add_common(margin, margin_opts);
  margin->callback([&] {
    exit_code = erm::run(load_config(margin_opts, "margin-table", "margin-table"), std::cout);
  });

  auto* expfam = app.add_subcommand("expfam", "exponential-family experiments");
  add_common(expfam, expfam_opts);
  expfam->callback([&] {
    exit_code = erm::run(load_config(expfam_opts, "expfam-", std::string()), std::cout);
  });

  auto* scenario = app.add_subcommand("scenario", "full scenario batches");
  add_common(scenario, scenario_opts);
  scenario->callback([&] {
    exit_code = erm::run(load_config(scenario_opts, std::string(), std::string()), std::cout);
  });

  std::string manifest_path;
  auto* report = app.add_subcommand("report", "summarize a run manifest");
  report->add_option("manifest", manifest_path, "path to manifest.json")->required();
  report->callback([&] {
    if (!std::filesystem::exists(manifest_path)) {
      throw erm::ArgumentError("report: manifest not found: " + manifest_path);
    }
    std::cout << erm::report(manifest_path);
  });

  std::string accept_out = "accept-run";
  int accept_workers = 1;
  auto* accept = app.add_subcommand("accept", "run the full acceptance suite");
  accept->add_option("--out", accept_out, "output directory");
  accept->add_option("--workers", accept_workers, "worker threads")->check(CLI::PositiveNumber);
  accept->callback([&] {
    const erm::AcceptanceReport rep = erm::run_acceptance(accept_out, accept_workers, std::cout);
    exit_code = rep.all_pass ? 0 : 2;
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 1;
  }
  return exit_code;
}
