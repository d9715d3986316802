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

#include "commlab/grad_check.h"

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>

namespace commlab {
namespace {

void CheckStep(double h) {
  if (!(h >= 1e-6 && h <= 1e-4)) {
    throw std::invalid_argument("grad check step must lie in [1e-6, 1e-4]");
  }
}

std::optional<double> ScalarOf(Var v) {
  const Tensor& t = v.value();
  if (t.rows() != 1 || t.cols() != 1) {
    throw std::invalid_argument("grad check: function must return a 1x1 value");
  }
  return std::isfinite(t[0]) ? std::optional<double>(t[0]) : std::nullopt;
}

std::optional<double> EvalPoint(const TensorFunction& f,
                                const std::vector<Tensor>& point) {
  Tape tape(false);
  std::vector<Var> vars;
  vars.reserve(point.size());
  try {
    for (const Tensor& t : point) vars.push_back(tape.Constant(t));
    return ScalarOf(f(tape, vars));
  } catch (const std::domain_error&) {
    return std::nullopt;
  }
}

std::optional<double> EvalLoss(const LossFunction& f) {
  Tape tape(false);
  try {
    return ScalarOf(f(tape));
  } catch (const std::domain_error&) {
    return std::nullopt;
  }
}

void Compare(GradCheckReport& report, const std::string& label, double analytic,
             std::optional<double> plus, std::optional<double> minus, double h) {
  ++report.coordinates;
  if (!plus || !minus) {
    report.non_finite.push_back(label);
    return;
  }
  const double fd = (*plus - *minus) / (2.0 * h);
  const double err = std::abs(analytic - fd) / std::max(1.0, std::abs(fd));
  if (report.worst.empty() || err > report.max_rel_error) {
    report.max_rel_error = err;
    report.worst = label;
  }
}

}  // namespace

GradCheckReport GradCheck(const TensorFunction& f, const std::vector<Tensor>& point,
                          double h) {
  CheckStep(h);
  std::vector<Tensor> analytic;
  {
    Tape tape;
    std::vector<Var> vars;
    for (const Tensor& t : point) vars.push_back(tape.Variable(t));
    Var out = f(tape, vars);
    tape.Backward(out);
    for (Var v : vars) analytic.push_back(tape.GradOf(v));
  }
  GradCheckReport report;
  std::vector<Tensor> probe = point;
  for (std::size_t k = 0; k < point.size(); ++k) {
    for (std::size_t i = 0; i < point[k].size(); ++i) {
      const double x = point[k][i];
      probe[k][i] = x + h;
      const auto plus = EvalPoint(f, probe);
      probe[k][i] = x - h;
      const auto minus = EvalPoint(f, probe);
      probe[k][i] = x;
      Compare(report,
              "input" + std::to_string(k) + "[" + std::to_string(i) + "]",
              analytic[k][i], plus, minus, h);
    }
  }
  return report;
}

GradCheckReport GradCheckParams(const LossFunction& f, ParamSet& params, double h) {
  ParamSet* sets[] = {&params};
  return GradCheckParams(f, sets, h);
}

GradCheckReport GradCheckParams(const LossFunction& f,
                                std::span<ParamSet* const> params, double h) {
  CheckStep(h);
  Gradient grad;
  {
    Tape tape;
    grad = tape.Backward(f(tape));
  }
  GradCheckReport report;
  for (std::size_t s = 0; s < params.size(); ++s) {
    ParamSet& set = *params[s];
    for (std::size_t p = 0; p < set.size(); ++p) {
      Parameter& param = set.at(p);
      if (!param.trainable) continue;
      const Tensor* g = grad.Find(param);
      for (std::size_t i = 0; i < param.value.size(); ++i) {
        const double x = param.value[i];
        param.value[i] = x + h;
        const auto plus = EvalLoss(f);
        param.value[i] = x - h;
        const auto minus = EvalLoss(f);
        param.value[i] = x;
        const std::string prefix =
            params.size() > 1 ? "set" + std::to_string(s) + ":" : std::string();
        Compare(report, prefix + param.name + "[" + std::to_string(i) + "]",
                g != nullptr ? (*g)[i] : 0.0, plus, minus, h);
      }
    }
  }
  return report;
}

}  // namespace commlab
