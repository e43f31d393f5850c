// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "remreg/autograd.hpp"

namespace remreg {

struct GradCheckCfg {
  int instances = 10;
  double h = 1e-4;          // central-difference step
  double rel_tol = 1e-4;
  double abs_floor = 1e-6;  // differences below this always pass
  Index max_elements = 256; // per input; larger inputs are subsampled
  std::uint64_t seed = 0;
};

struct GradCheckResult {
  std::string op;
  int instances = 0;
  long checked = 0;     // gradient entries compared
  long failures = 0;
  double worst = 0.0;   // max |analytic - numeric| / max(abs_floor, rel_tol * max(|a|, |n|))
  bool passed() const { return failures == 0 && checked > 0; }
};

/// Scalar function of its leaf inputs, rebuilt on every call.
using ScalarFn = std::function<Var<double>(const std::vector<Var<double>>&)>;

/// Compares backward() against central differences for every input flagged
/// in `check`, accumulating into `result`.
void gradcheck_fn(const ScalarFn& fn, std::vector<Tensor<double>> inputs, const std::vector<bool>& check,
                  const GradCheckCfg& cfg, std::uint64_t stream, GradCheckResult& result);

/// Names of the shipped checks, in execution order.
std::vector<std::string> gradcheck_ops();
/// Runs `cfg.instances` random instances of one named check.
GradCheckResult gradcheck_op(const std::string& op, const GradCheckCfg& cfg);
std::vector<GradCheckResult> gradcheck_all(const GradCheckCfg& cfg);

}  // namespace remreg
