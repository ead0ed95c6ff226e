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

#include "runwayseq/optimizer.hpp"

#include <cmath>
#include <string>

namespace runwayseq {
namespace {

using VecMap = Eigen::Map<Eigen::VectorXd>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;

void check_layout(const char* who, const ParamViews& params,
                  const GradViews& grads) {
  if (params.size() != grads.size()) {
    throw ShapeError(std::string(who) + ": " + std::to_string(params.size()) +
                     " parameter tensors but " + std::to_string(grads.size()) +
                     " gradient tensors");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].size() != grads[i].size()) {
      throw ShapeError(std::string(who) + ": tensor " + std::to_string(i) +
                       " has " + std::to_string(params[i].size()) +
                       " parameters but " + std::to_string(grads[i].size()) +
                       " gradients");
    }
  }
}

// Zero-fills accumulators on first use; afterwards they must keep matching.
void ensure_slots(const char* who, const ParamViews& params,
                  std::vector<Vector>& slots) {
  if (slots.empty()) {
    slots.reserve(params.size());
    for (const auto& p : params)
      slots.push_back(Vector::Zero(static_cast<Index>(p.size())));
    return;
  }
  if (slots.size() != params.size()) {
    throw ShapeError(std::string(who) + ": optimizer state holds " +
                     std::to_string(slots.size()) + " tensors, got " +
                     std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (static_cast<std::size_t>(slots[i].size()) != params[i].size()) {
      throw ShapeError(std::string(who) + ": state tensor " +
                       std::to_string(i) + " shape changed");
    }
  }
}

}  // namespace

void adadelta_step(const ParamViews& params, const GradViews& grads,
                   AdaDeltaState& state) {
  check_layout("adadelta_step", params, grads);
  ensure_slots("adadelta_step", params, state.mean_sq_grad);
  ensure_slots("adadelta_step", params, state.mean_sq_update);
  const double rho = state.rho;
  const double eps = state.epsilon;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto n = static_cast<Index>(params[i].size());
    VecMap x(params[i].data(), n);
    ConstVecMap g(grads[i].data(), n);
    Vector& eg2 = state.mean_sq_grad[i];
    Vector& edx2 = state.mean_sq_update[i];
    eg2 = rho * eg2.array() + (1 - rho) * g.array().square();
    const Vector dx = -((edx2.array() + eps).sqrt() / (eg2.array() + eps).sqrt() *
                        g.array())
                           .matrix();
    edx2 = rho * edx2.array() + (1 - rho) * dx.array().square();
    x += dx;
  }
}

void adam_step(const ParamViews& params, const GradViews& grads,
               AdamState& state) {
  check_layout("adam_step", params, grads);
  ensure_slots("adam_step", params, state.first_moment);
  ensure_slots("adam_step", params, state.second_moment);
  ++state.step_count;
  const double t = static_cast<double>(state.step_count);
  const double correction1 = 1 - std::pow(state.beta1, t);
  const double correction2 = 1 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto n = static_cast<Index>(params[i].size());
    VecMap x(params[i].data(), n);
    ConstVecMap g(grads[i].data(), n);
    Vector& m = state.first_moment[i];
    Vector& v = state.second_moment[i];
    m = state.beta1 * m + (1 - state.beta1) * g;
    v = state.beta2 * v.array() + (1 - state.beta2) * g.array().square();
    x.array() -= state.lr * (m.array() / correction1) /
                 ((v.array() / correction2).sqrt() + state.epsilon);
  }
}

}  // namespace runwayseq
