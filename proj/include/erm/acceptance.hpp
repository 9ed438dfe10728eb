#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace erm {

struct CriterionResult {
  int id = 0;
  std::string title;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
};

struct AcceptanceReport {
  std::vector<CriterionResult> criteria;
  bool all_pass = false;
  std::filesystem::path manifest;
};

// Runs the full acceptance suite: one pass/fail line per criterion goes to
// log, artifacts and a manifest go to out_dir (must be empty or absent).
// Tolerances and budgets are pinned in the implementation.
AcceptanceReport run_acceptance(const std::filesystem::path& out_dir, int workers,
                                std::ostream& log);

}  // namespace erm
