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

#include "commlab/nn.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace commlab {
namespace {

Tensor Uniform(std::size_t rows, std::size_t cols, double bound, Rng& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor t = Tensor::Matrix(rows, cols);
  for (double& v : t.data()) v = dist(rng);
  return t;
}

Var Affine(Tape& tape, Var x, Parameter* w, Parameter* b) {
  return AddRow(MatMulNT(x, tape.Param(*w)), tape.Param(*b));
}

}  // namespace

Linear Linear::Create(ParamSet& params, const std::string& prefix, std::size_t in,
                      std::size_t out, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  Linear l;
  l.weight = &params.Add(prefix + "/weight", Uniform(out, in, bound, rng));
  l.bias = &params.Add(prefix + "/bias", Uniform(1, out, bound, rng));
  return l;
}

Var Linear::Forward(Tape& tape, Var x) const { return Affine(tape, x, weight, bias); }

Embedding Embedding::Create(ParamSet& params, const std::string& prefix,
                            std::size_t vocab, std::size_t dim, Rng& rng) {
  Embedding e;
  e.table = &params.Add(prefix + "/table", Uniform(vocab, dim, 0.08, rng));
  return e;
}

Var Embedding::Forward(Tape& tape, std::span<const int> indices) const {
  return GatherRows(tape.Param(*table), indices);
}

GruCell GruCell::Create(ParamSet& params, const std::string& prefix, std::size_t in,
                        std::size_t hidden, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  GruCell g;
  auto add = [&](const char* name, std::size_t rows, std::size_t cols) {
    return &params.Add(prefix + "/" + name, Uniform(rows, cols, bound, rng));
  };
  g.w_update = add("w_update", hidden, in);
  g.u_update = add("u_update", hidden, hidden);
  g.b_update = add("b_update", 1, hidden);
  g.w_reset = add("w_reset", hidden, in);
  g.u_reset = add("u_reset", hidden, hidden);
  g.b_reset = add("b_reset", 1, hidden);
  g.w_cand = add("w_cand", hidden, in);
  g.u_cand = add("u_cand", hidden, hidden);
  g.b_cand = add("b_cand", 1, hidden);
  return g;
}

Var GruCell::Step(Tape& tape, Var x, Var h) const {
  if (x.cols() != in() || h.cols() != hidden() || x.rows() != h.rows()) {
    throw std::invalid_argument("GruCell: input " + x.value().shape_string() +
                                " / state " + h.value().shape_string() +
                                " do not match cell (" + std::to_string(in()) +
                                " -> " + std::to_string(hidden()) + ")");
  }
  auto gate = [&](Parameter* w, Parameter* u, Parameter* b, Var state) {
    return AddRow(Add(MatMulNT(x, tape.Param(*w)), MatMulNT(state, tape.Param(*u))),
                  tape.Param(*b));
  };
  Var z = Sigmoid(gate(w_update, u_update, b_update, h));
  Var r = Sigmoid(gate(w_reset, u_reset, b_reset, h));
  Var cand = Tanh(gate(w_cand, u_cand, b_cand, Mul(r, h)));
  return Add(h, Mul(z, Sub(cand, h)));
}

BatchNorm BatchNorm::Create(ParamSet& params, const std::string& prefix,
                            std::size_t dim, double momentum, double eps) {
  BatchNorm bn;
  bn.gamma = &params.Add(prefix + "/gamma", Tensor::Matrix(1, dim, 1.0));
  bn.beta = &params.Add(prefix + "/beta", Tensor::Matrix(1, dim, 0.0));
  bn.running_mean =
      &params.Add(prefix + "/running_mean", Tensor::Matrix(1, dim, 0.0), false);
  bn.running_var =
      &params.Add(prefix + "/running_var", Tensor::Matrix(1, dim, 1.0), false);
  bn.momentum = momentum;
  bn.eps = eps;
  return bn;
}

Var BatchNorm::Forward(Tape& tape, Var x, Mode mode, bool update_running) const {
  const std::size_t n = x.rows();
  const std::size_t dim = gamma->value.cols();
  if (x.cols() != dim) {
    throw std::invalid_argument("BatchNorm: input " + x.value().shape_string() +
                                " for " + std::to_string(dim) + " features");
  }
  Var g = RepeatRows(tape.Param(*gamma), n);
  if (mode == Mode::kEval) {
    Tensor shift = running_mean->value;
    shift *= -1.0;
    Tensor inv = Tensor::Matrix(1, dim);
    for (std::size_t c = 0; c < dim; ++c) {
      inv(0, c) = 1.0 / std::sqrt(running_var->value(0, c) + eps);
    }
    Var xhat = Mul(AddRow(x, tape.Constant(std::move(shift))),
                   RepeatRows(tape.Constant(std::move(inv)), n));
    return AddRow(Mul(xhat, g), tape.Param(*beta));
  }
  if (n < 2) {
    throw std::invalid_argument("BatchNorm: train mode needs a batch of at least 2");
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  Var mean = Scale(SumRows(x), inv_n);
  Var centered = Sub(x, RepeatRows(mean, n));
  Var var = Scale(SumRows(Square(centered)), inv_n);
  Var xhat = Mul(centered, RepeatRows(Rsqrt(var, eps), n));
  if (update_running) {
    const double unbias = static_cast<double>(n) / static_cast<double>(n - 1);
    for (std::size_t c = 0; c < dim; ++c) {
      double& rm = running_mean->value(0, c);
      double& rv = running_var->value(0, c);
      rm = (1.0 - momentum) * rm + momentum * mean.value()(0, c);
      rv = (1.0 - momentum) * rv + momentum * var.value()(0, c) * unbias;
    }
  }
  return AddRow(Mul(xhat, g), tape.Param(*beta));
}

RmsProp::RmsProp(ParamSet& params, RmsPropConfig config)
    : params_(&params), config_(config) {
  acc_.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Parameter& p = params.at(i);
    acc_.push_back(p.trainable ? Tensor(p.value.shape(), 0.0) : Tensor());
  }
}

void RmsProp::Step(const Gradient& grad) {
  if (!grad.all_finite()) {
    throw std::domain_error("RmsProp: non-finite gradient, step aborted");
  }
  const double keep = config_.decay;
  const double mix = 1.0 - config_.decay;
  for (std::size_t i = 0; i < params_->size(); ++i) {
    Parameter& p = params_->at(i);
    if (!p.trainable) continue;
    const Tensor* g = grad.Find(p);
    if (g == nullptr) continue;
    auto value = p.value.data();
    auto acc = acc_[i].data();
    auto gd = g->data();
    for (std::size_t k = 0; k < value.size(); ++k) {
      double gk = gd[k];
      if (config_.clip) gk = std::clamp(gk, -*config_.clip, *config_.clip);
      acc[k] = keep * acc[k] + mix * gk * gk;
      value[k] -= config_.learning_rate * gk / (std::sqrt(acc[k]) + config_.eps);
    }
  }
}

}  // namespace commlab
