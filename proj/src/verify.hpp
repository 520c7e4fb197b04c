#pragma once

#include <string>
#include <vector>

namespace denssiam {

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

// Table-driven stage-shape conformance of the target branch (batch 8),
// plus the 255 search path.
std::vector<CheckResult> verify_shapes();

// Finite-difference checks over conv, batch norm, pooling, dense layer,
// attention, correlation and the losses; >= 5 seeds per op; 64-bit gate
// 1e-5, 32-bit gate 1e-3 (against a double-precision difference quotient).
std::vector<CheckResult> verify_grads();

// Property suites: softmax, shapes, purity, dropout expectation, labels,
// IoU, loss values, cosine window, schedule, attention invariants, and
// score-map shift equivariance.
std::vector<CheckResult> verify_props();

std::vector<CheckResult> verify_all();

// Prints "[PASS|FAIL] name: detail" lines; returns the failure count.
int print_results(const std::vector<CheckResult>& results);

}  // namespace denssiam
