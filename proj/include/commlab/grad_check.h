// Copyright 2026 The commlab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef COMMLAB_GRAD_CHECK_H_
#define COMMLAB_GRAD_CHECK_H_

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "commlab/autodiff.h"

namespace commlab {

// Comparison of tape gradients against central differences
// (f(p + h) - f(p - h)) / 2h. The error of one coordinate is
// |autodiff - fd| / max(1, |fd|).
struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst;  // "<input or parameter>[index]"
  std::size_t coordinates = 0;
  std::vector<std::string> non_finite;  // coordinates where f blew up

  bool passed(double tolerance) const {
    return non_finite.empty() && max_rel_error < tolerance;
  }
};

using TensorFunction = std::function<Var(Tape&, std::span<const Var>)>;
using LossFunction = std::function<Var(Tape&)>;

// Differentiates f with respect to each tensor of `point`. h must lie in
// [1e-6, 1e-4].
GradCheckReport GradCheck(const TensorFunction& f, const std::vector<Tensor>& point,
                          double h = 1e-5);

// Same comparison for a loss closed over `params`; values are perturbed in
// place and restored. Non-trainable parameters are skipped.
GradCheckReport GradCheckParams(const LossFunction& f, ParamSet& params,
                                double h = 1e-5);

// As above over several parameter sets (one per agent without sharing).
GradCheckReport GradCheckParams(const LossFunction& f,
                                std::span<ParamSet* const> params, double h = 1e-5);

}  // namespace commlab

#endif  // COMMLAB_GRAD_CHECK_H_
