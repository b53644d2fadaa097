#pragma once

#include <string>

namespace ssnf {

struct CheckResult {
  bool passed = false;
  std::string detail;
};

// Property suites with pinned tolerances. Each returns pass/fail plus a
// one-line summary of the measured extremes.
CheckResult check_autodiff_gradients();      // losses and renders vs finite differences
CheckResult check_compositing_invariants();  // weight normalization, monotonicity, occlusion
CheckResult check_loss_closed_forms();       // pinned closed-form loss values
CheckResult check_rpc_round_trip();          // project(localize) identity
CheckResult check_corruption_contract();     // accuracy targets and region coherence

// Verifies the schedule in a training metrics log: plain color in epochs
// 1-2, uncertainty color from epoch 3, transient term first nonzero in
// epoch 4, depth term zero after 25% of iterations.
CheckResult check_schedule_log(const std::string& log_path);

}  // namespace ssnf
