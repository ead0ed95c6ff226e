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

#ifndef RUNWAYSEQ_OPTIMIZER_HPP
#define RUNWAYSEQ_OPTIMIZER_HPP

#include <cstdint>
#include <span>
#include <vector>

#include "runwayseq/tensor.hpp"

namespace runwayseq {

/// Flat mutable views over a model's parameter tensors, in a fixed order.
using ParamViews = std::vector<std::span<double>>;
/// Gradients laid out exactly like the matching ParamViews.
using GradViews = std::vector<std::span<const double>>;

template <typename Derived>
std::span<double> flat(Eigen::PlainObjectBase<Derived>& m) {
  return {m.data(), static_cast<std::size_t>(m.size())};
}

template <typename Derived>
std::span<const double> flat(const Eigen::PlainObjectBase<Derived>& m) {
  return {m.data(), static_cast<std::size_t>(m.size())};
}

/// AdaDelta (Zeiler 2012). No learning rate: the step is the ratio of RMS
/// update history to RMS gradient history.
struct AdaDeltaState {
  double rho = 0.95;
  double epsilon = 1e-6;
  std::vector<Vector> mean_sq_grad;
  std::vector<Vector> mean_sq_update;
};

/// Adam (Kingma & Ba 2015) with bias correction.
struct AdamState {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::int64_t step_count = 0;
  std::vector<Vector> first_moment;
  std::vector<Vector> second_moment;
};

void adadelta_step(const ParamViews& params, const GradViews& grads,
                   AdaDeltaState& state);

void adam_step(const ParamViews& params, const GradViews& grads,
               AdamState& state);

}  // namespace runwayseq

#endif  // RUNWAYSEQ_OPTIMIZER_HPP
