#include <filesystem>
#include <iostream>

#include "erm/acceptance.hpp"

int main() {
  const std::filesystem::path out = "acceptance-artifacts";
  std::filesystem::remove_all(out);
  erm::AcceptanceReport report = erm::run_acceptance(out, 2, std::cout);
  return report.all_pass ? 0 : 1;
}
