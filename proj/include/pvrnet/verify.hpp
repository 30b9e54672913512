#pragma once

#include <functional>
#include <string>
#include <vector>

namespace pvr {

struct CheckResult {
  std::string name;  ///< e.g. "grad/relu", "oracle/top_k"
  bool passed = false;
  double measured = 0.0;
  double tolerance = 0.0;
  std::string detail;
};

struct VerifyReport {
  std::vector<CheckResult> checks;
  double seconds = 0.0;
  bool all_passed() const;
};

/// Property suite shipped with the binary: finite-difference gradient checks
/// of every operation and of the full fused forward pass, relation-score and
/// enhancement invariants, view and point permutation symmetry, and
/// brute-force oracles for kNN, top-k, multi-view fusion and retrieval.
VerifyReport run_verification(const std::function<void(const CheckResult&)>& on_check = {});

std::string format_report(const VerifyReport& report);

}  // namespace pvr
