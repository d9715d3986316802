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

// Reverse-mode differentiation over rank-2 tensors.
//
// A Tape records every primitive applied to its Vars. Backward() replays the
// record in reverse and returns the gradient of a scalar loss with respect to
// every bound Parameter. There is no implicit broadcasting: row-wise bias
// addition, per-row scaling and row repetition are separate primitives.
//
// A Tape built with record_gradients == false still evaluates values but
// stores no backward closures; it is used for rollouts and target-network
// evaluation.

#ifndef COMMLAB_AUTODIFF_H_
#define COMMLAB_AUTODIFF_H_

#include <cstddef>
#include <deque>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "commlab/tensor.h"

namespace commlab {

struct Parameter {
  std::string name;
  Tensor value;
  // Non-trainable entries (batch-norm running statistics) are checkpointed
  // but never differentiated or stepped.
  bool trainable = true;
};

// Owns a network's parameters. Addresses are stable for the lifetime of the
// set, so layers hold raw Parameter pointers.
class ParamSet {
 public:
  ParamSet() = default;
  ParamSet(const ParamSet&) = delete;
  ParamSet& operator=(const ParamSet&) = delete;
  ParamSet(ParamSet&&) = default;
  ParamSet& operator=(ParamSet&&) = default;

  Parameter& Add(std::string name, Tensor value, bool trainable = true);

  std::size_t size() const { return params_.size(); }
  Parameter& at(std::size_t i) { return *params_[i]; }
  const Parameter& at(std::size_t i) const { return *params_[i]; }
  Parameter* Find(std::string_view name);
  const Parameter* Find(std::string_view name) const;

  // Deep copy of values; throws unless names and shapes match pairwise.
  void CopyValuesFrom(const ParamSet& other);
  bool StructurallyEqual(const ParamSet& other) const;
  std::size_t NumTrainableScalars() const;

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
};

// One tensor per differentiated parameter, keyed by parameter identity.
class Gradient {
 public:
  const Tensor* Find(const Parameter& p) const;
  void Accumulate(const Parameter& p, const Tensor& g);
  void Add(const Gradient& other);
  void Scale(double s);
  bool all_finite() const;
  double max_abs() const;
  std::size_t size() const { return grads_.size(); }
  bool empty() const { return grads_.empty(); }

 private:
  std::unordered_map<const Parameter*, Tensor> grads_;
};

class Tape;

class Var {
 public:
  Var() = default;

  bool valid() const { return tape_ != nullptr; }
  const Tensor& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  Tape& tape() const;
  std::size_t id() const { return id_; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  explicit Tape(bool record_gradients = true)
      : record_(record_gradients) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return record_; }
  std::size_t size() const { return nodes_.size(); }

  // Leaves. All reject non-finite values.
  Var Constant(Tensor value);
  Var Variable(Tensor value);
  // Binds a parameter; repeated binds of the same parameter share one leaf.
  Var Param(Parameter& p);

  // Used by primitives. `inputs` must belong to this tape. The backward
  // closure is dropped when no input requires a gradient.
  Var Record(Tensor value, std::initializer_list<Var> inputs, BackwardFn fn,
             const char* op);
  Var Record(Tensor value, std::span<const Var> inputs, BackwardFn fn,
             const char* op);

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  const Tensor& grad(std::size_t id) const { return nodes_[id].grad; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  bool requires_grad(Var v) const { return requires_grad(v.id()); }
  void Accumulate(std::size_t id, const Tensor& g);

  // Seeds d(loss)/d(loss) = 1 and walks the record backwards. The loss must
  // be 1x1. A tape can be differentiated once.
  Gradient Backward(Var loss);

  // Adjoint of any node after Backward(); zeros if the node received none.
  Tensor GradOf(Var v) const;

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool has_grad = false;
    bool requires_grad = false;
    BackwardFn backward;
    Parameter* param = nullptr;
  };

  Var Push(Node node);
  void CheckOwned(Var v) const;

  bool record_;
  bool consumed_ = false;
  std::deque<Node> nodes_;
  std::unordered_map<const Parameter*, std::size_t> bound_;
};

// ---- Primitives -----------------------------------------------------------

Var MatMul(Var a, Var b);        // (n x k)(k x m)
Var MatMulNT(Var a, Var b);      // (n x k)(m x k)^T
Var Add(Var a, Var b);
Var Sub(Var a, Var b);
Var Mul(Var a, Var b);           // elementwise
Var AddRow(Var a, Var row);      // a (n x c) + row (1 x c) on every row
Var MulRows(Var a, Var weights); // row i of a times weights(i, 0)
Var RepeatRows(Var row, std::size_t n);
Var SumRows(Var a);              // (n x c) -> (1 x c)
Var Sum(Var a);                  // -> (1 x 1)
Var Affine(Var a, double alpha, double beta);
Var Scale(Var a, double s);
Var Sigmoid(Var a);
Var Tanh(Var a);
Var Relu(Var a);
Var Square(Var a);
Var Rsqrt(Var a, double eps);    // (a + eps)^(-1/2)
Var ConcatCols(std::span<const Var> parts);
Var SliceCols(Var a, std::size_t begin, std::size_t count);
Var GatherRows(Var table, std::span<const int> indices);
Var Pick(Var a, std::span<const int> columns);  // (n x c) -> (n x 1)

double Logistic(double x);

}  // namespace commlab

#endif  // COMMLAB_AUTODIFF_H_
