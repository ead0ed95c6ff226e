// Copyright 2026 The runwayseq Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef RUNWAYSEQ_GRADCHECK_HPP
#define RUNWAYSEQ_GRADCHECK_HPP

#include <cstddef>
#include <functional>

#include "runwayseq/optimizer.hpp"

namespace runwayseq {

struct GradCheckOptions {
  double eps = 1e-6;
  /// Coordinates probed per tensor; 0 probes every coordinate.
  std::size_t samples_per_tensor = 0;
  std::uint64_t seed = 0;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_tensor = 0;
  std::size_t worst_index = 0;
  std::size_t coordinates_checked = 0;
};

/// Compares analytic gradients against central differences of `loss`.
///
/// `loss` must read the parameters through the same storage `params` points
/// at; each probed coordinate is perturbed in place and restored. The error
/// per coordinate is |g_a - g_fd| / max(1e-8, |g_a| + |g_fd|).
GradCheckResult finite_difference_check(const std::function<double()>& loss,
                                        const ParamViews& params,
                                        const GradViews& analytic,
                                        const GradCheckOptions& options = {});

}  // namespace runwayseq

#endif  // RUNWAYSEQ_GRADCHECK_HPP
