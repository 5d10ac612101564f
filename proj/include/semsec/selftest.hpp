#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace semsec {

struct CheckResult {
  std::string name;
  bool passed = false;
  double value = 0.0;      // measured quantity (error, std, ...)
  double threshold = 0.0;  // pass bound on `value`
  std::string detail;
};

// Built-in consistency checks: MMSE against an explicit inverse, power
// normalization, gradient checks per layer kind and through the whole link,
// OU noise statistics, replay FIFO order and soft-update contraction.
std::vector<CheckResult> run_selftest(std::uint64_t seed);

}  // namespace semsec
