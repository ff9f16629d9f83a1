#include "hk/invariants.hpp"

#include <cstdlib>
#include <iomanip>
#include <iostream>

int main(int argc, char** argv) {
  using namespace hk::invariants;
  int grid = argc > 1 ? std::atoi(argv[1]) : 64;
  std::vector<CheckResult> results{line_extensions(), conversions(), discrete_geometry(), functional_properties()};
  SweepCheck sweep = correspondence(grid);
  results.push_back(sweep.result);
  results.push_back(certificates(sweep));
  results.push_back(substitution(sweep));
  int failed = 0;
  for (const auto& r : results) {
    std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << " [" << std::fixed << std::setprecision(1) << r.seconds
              << "s] " << r.detail << "\n";
    failed += !r.passed;
  }
  std::cout << (results.size() - failed) << "/" << results.size() << " criteria passed\n";
  return failed == 0 ? 0 : 1;
}
