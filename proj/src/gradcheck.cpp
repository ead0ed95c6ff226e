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

#include "runwayseq/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace runwayseq {

GradCheckResult finite_difference_check(const std::function<double()>& loss,
                                        const ParamViews& params,
                                        const GradViews& analytic,
                                        const GradCheckOptions& options) {
  if (params.size() != analytic.size()) {
    throw ShapeError("finite_difference_check: parameter/gradient count");
  }
  Rng rng(options.seed);
  GradCheckResult result;
  for (std::size_t t = 0; t < params.size(); ++t) {
    const auto& p = params[t];
    if (p.size() != analytic[t].size()) {
      throw ShapeError("finite_difference_check: tensor " + std::to_string(t) +
                       " size mismatch");
    }
    std::vector<std::size_t> coords(p.size());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (options.samples_per_tensor > 0 &&
        options.samples_per_tensor < coords.size()) {
      rng.shuffle(coords);
      coords.resize(options.samples_per_tensor);
    }
    for (std::size_t i : coords) {
      const double saved = p[i];
      p[i] = saved + options.eps;
      const double up = loss();
      p[i] = saved - options.eps;
      const double down = loss();
      p[i] = saved;
      if (!std::isfinite(up) || !std::isfinite(down)) {
        throw NumericError("finite_difference_check: non-finite loss at tensor " +
                           std::to_string(t) + " index " + std::to_string(i));
      }
      const double numeric = (up - down) / (2 * options.eps);
      const double exact = analytic[t][i];
      const double err = std::abs(exact - numeric) /
                         std::max(1e-8, std::abs(exact) + std::abs(numeric));
      ++result.coordinates_checked;
      if (err > result.max_rel_error) {
        result.max_rel_error = err;
        result.worst_tensor = t;
        result.worst_index = i;
      }
    }
  }
  return result;
}

}  // namespace runwayseq
