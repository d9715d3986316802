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

#ifndef COMMLAB_NN_H_
#define COMMLAB_NN_H_

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "commlab/autodiff.h"
#include "commlab/rng.h"

namespace commlab {

// Weights and biases are drawn uniformly from +-1/sqrt(fan_in).
struct Linear {
  Parameter* weight = nullptr;  // out x in
  Parameter* bias = nullptr;    // 1 x out

  static Linear Create(ParamSet& params, const std::string& prefix,
                       std::size_t in, std::size_t out, Rng& rng);
  Var Forward(Tape& tape, Var x) const;
  std::size_t in() const { return weight->value.cols(); }
  std::size_t out() const { return weight->value.rows(); }
};

// Lookup table; rows drawn uniformly from +-0.08.
struct Embedding {
  Parameter* table = nullptr;  // vocab x dim

  static Embedding Create(ParamSet& params, const std::string& prefix,
                          std::size_t vocab, std::size_t dim, Rng& rng);
  Var Forward(Tape& tape, std::span<const int> indices) const;
  std::size_t vocab() const { return table->value.rows(); }
};

// h' = (1 - z) * h + z * tanh(W_h x + U_h (r * h) + b_h), with update gate
// z = sigmoid(W_z x + U_z h + b_z) and reset gate r = sigmoid(W_r x + U_r h + b_r).
struct GruCell {
  Parameter* w_update = nullptr;
  Parameter* u_update = nullptr;
  Parameter* b_update = nullptr;
  Parameter* w_reset = nullptr;
  Parameter* u_reset = nullptr;
  Parameter* b_reset = nullptr;
  Parameter* w_cand = nullptr;
  Parameter* u_cand = nullptr;
  Parameter* b_cand = nullptr;

  static GruCell Create(ParamSet& params, const std::string& prefix,
                        std::size_t in, std::size_t hidden, Rng& rng);
  Var Step(Tape& tape, Var x, Var h) const;
  std::size_t in() const { return w_update->value.cols(); }
  std::size_t hidden() const { return w_update->value.rows(); }
};

struct BatchNorm {
  enum class Mode { kTrain, kEval };

  Parameter* gamma = nullptr;
  Parameter* beta = nullptr;
  Parameter* running_mean = nullptr;  // non-trainable
  Parameter* running_var = nullptr;   // non-trainable
  double momentum = 0.1;
  double eps = 1e-5;

  static BatchNorm Create(ParamSet& params, const std::string& prefix,
                          std::size_t dim, double momentum = 0.1, double eps = 1e-5);

  // Train mode normalises by the batch statistics (batch >= 2) and, when
  // update_running is set, folds them into the running estimates. Eval mode
  // uses the running estimates only.
  Var Forward(Tape& tape, Var x, Mode mode, bool update_running) const;
};

struct RmsPropConfig {
  double learning_rate = 5e-4;
  double decay = 0.95;
  double eps = 1e-8;
  // Per-coordinate clip applied before the step; disabled by default.
  std::optional<double> clip;
};

// acc <- decay * acc + (1 - decay) * g^2;  p <- p - lr * g / (sqrt(acc) + eps)
class RmsProp {
 public:
  RmsProp(ParamSet& params, RmsPropConfig config);

  // Throws std::domain_error, leaving every parameter untouched, if any
  // gradient entry is non-finite. Parameters without a gradient are skipped.
  void Step(const Gradient& grad);

  const RmsPropConfig& config() const { return config_; }
  std::vector<Tensor>& accumulators() { return acc_; }
  const std::vector<Tensor>& accumulators() const { return acc_; }

 private:
  ParamSet* params_;
  RmsPropConfig config_;
  std::vector<Tensor> acc_;  // aligned with params_ (empty for non-trainable)
};

}  // namespace commlab

#endif  // COMMLAB_NN_H_
