// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>

namespace remreg {

/// Worker cap from REMREG_THREADS (default 1). Invalid values fall back to 1.
int thread_count();

/// Runs body(i) for i in [0, n). Each index is handled by exactly one worker
/// and writes only its own outputs, so results do not depend on the split.
void parallel_for(std::int64_t n, const std::function<void(std::int64_t)>& body);

}  // namespace remreg
