#pragma once

#include <string>
#include <vector>

namespace flmn::selftest {

struct Options {
  // Test hook: perturbs the usage-decay constant on the implementation side
  // only, so the usage-oracle group must fail.
  bool mutate_usage_gamma = false;
};

struct GroupResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

// Equation-oracle traces, gradient checks and structural invariants at small
// sizes. Deterministic: repeated runs produce identical reports.
std::vector<GroupResult> run_selftest(const Options& opts = {});

}  // namespace flmn::selftest
