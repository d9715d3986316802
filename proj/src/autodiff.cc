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

#include "commlab/autodiff.h"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace commlab {
namespace {

using RowMajor =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMajor>;
using MutMap = Eigen::Map<RowMajor>;

ConstMap AsMatrix(const Tensor& t) {
  return ConstMap(t.data().data(), static_cast<Eigen::Index>(t.rows()),
                  static_cast<Eigen::Index>(t.cols()));
}

MutMap AsMatrix(Tensor& t) {
  return MutMap(t.data().data(), static_cast<Eigen::Index>(t.rows()),
                static_cast<Eigen::Index>(t.cols()));
}

[[noreturn]] void ShapeError(const char* op, const Tensor& a, const Tensor& b) {
  throw std::invalid_argument(std::string(op) + ": incompatible shapes " +
                              a.shape_string() + " and " + b.shape_string());
}

void RequireRank2(const char* op, const Tensor& t) {
  if (t.rank() != 2) {
    throw std::invalid_argument(std::string(op) + ": expected rank-2 operand, got " +
                                t.shape_string());
  }
}

void RequireSameShape(const char* op, const Tensor& a, const Tensor& b) {
  RequireRank2(op, a);
  if (!a.same_shape(b)) ShapeError(op, a, b);
}

Tape& SameTape(const char* op, Var a, Var b) {
  if (&a.tape() != &b.tape()) {
    throw std::invalid_argument(std::string(op) + ": operands on different tapes");
  }
  return a.tape();
}

template <typename F>
Tensor MapUnary(const Tensor& a, F f) {
  Tensor out(a.shape());
  auto src = a.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = f(src[i]);
  return out;
}

}  // namespace

double Logistic(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// ---- ParamSet / Gradient --------------------------------------------------

Parameter& ParamSet::Add(std::string name, Tensor value, bool trainable) {
  if (Find(name) != nullptr) {
    throw std::invalid_argument("duplicate parameter name: " + name);
  }
  params_.push_back(std::make_unique<Parameter>(
      Parameter{std::move(name), std::move(value), trainable}));
  return *params_.back();
}

Parameter* ParamSet::Find(std::string_view name) {
  for (auto& p : params_) {
    if (p->name == name) return p.get();
  }
  return nullptr;
}

const Parameter* ParamSet::Find(std::string_view name) const {
  for (const auto& p : params_) {
    if (p->name == name) return p.get();
  }
  return nullptr;
}

bool ParamSet::StructurallyEqual(const ParamSet& other) const {
  if (size() != other.size()) return false;
  for (std::size_t i = 0; i < size(); ++i) {
    if (at(i).name != other.at(i).name ||
        !at(i).value.same_shape(other.at(i).value)) {
      return false;
    }
  }
  return true;
}

void ParamSet::CopyValuesFrom(const ParamSet& other) {
  if (!StructurallyEqual(other)) {
    throw std::invalid_argument("CopyValuesFrom: parameter sets differ in structure");
  }
  for (std::size_t i = 0; i < size(); ++i) at(i).value = other.at(i).value;
}

std::size_t ParamSet::NumTrainableScalars() const {
  std::size_t n = 0;
  for (const auto& p : params_) {
    if (p->trainable) n += p->value.size();
  }
  return n;
}

const Tensor* Gradient::Find(const Parameter& p) const {
  auto it = grads_.find(&p);
  return it == grads_.end() ? nullptr : &it->second;
}

void Gradient::Accumulate(const Parameter& p, const Tensor& g) {
  if (!g.same_shape(p.value)) {
    throw std::invalid_argument("gradient for " + p.name + " has shape " +
                                g.shape_string() + ", parameter has " +
                                p.value.shape_string());
  }
  auto [it, inserted] = grads_.try_emplace(&p, g);
  if (!inserted) it->second += g;
}

void Gradient::Add(const Gradient& other) {
  for (const auto& [p, g] : other.grads_) Accumulate(*p, g);
}

void Gradient::Scale(double s) {
  for (auto& [p, g] : grads_) g *= s;
}

bool Gradient::all_finite() const {
  return std::all_of(grads_.begin(), grads_.end(),
                     [](const auto& kv) { return kv.second.all_finite(); });
}

double Gradient::max_abs() const {
  double m = 0.0;
  for (const auto& [p, g] : grads_) m = std::max(m, g.max_abs());
  return m;
}

// ---- Var / Tape -----------------------------------------------------------

const Tensor& Var::value() const { return tape().value(id_); }

Tape& Var::tape() const {
  if (tape_ == nullptr) throw std::logic_error("use of an unbound Var");
  return *tape_;
}

Var Tape::Push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

void Tape::CheckOwned(Var v) const {
  if (!v.valid() || &v.tape() != this || v.id() >= nodes_.size()) {
    throw std::invalid_argument("Var does not belong to this tape");
  }
}

Var Tape::Constant(Tensor value) {
  RequireRank2("Constant", value);
  if (!value.all_finite()) {
    throw std::domain_error("Constant: non-finite input " + value.shape_string());
  }
  Node n;
  n.value = std::move(value);
  return Push(std::move(n));
}

Var Tape::Variable(Tensor value) {
  RequireRank2("Variable", value);
  if (!value.all_finite()) {
    throw std::domain_error("Variable: non-finite input " + value.shape_string());
  }
  Node n;
  n.value = std::move(value);
  n.requires_grad = record_;
  return Push(std::move(n));
}

Var Tape::Param(Parameter& p) {
  if (auto it = bound_.find(&p); it != bound_.end()) return Var(this, it->second);
  RequireRank2(p.name.c_str(), p.value);
  if (!p.value.all_finite()) {
    throw std::domain_error("parameter " + p.name + " has non-finite entries");
  }
  Node n;
  n.value = p.value;
  n.requires_grad = record_ && p.trainable;
  n.param = &p;
  Var v = Push(std::move(n));
  bound_.emplace(&p, v.id());
  return v;
}

Var Tape::Record(Tensor value, std::initializer_list<Var> inputs, BackwardFn fn,
                 const char* op) {
  return Record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()),
                std::move(fn), op);
}

Var Tape::Record(Tensor value, std::span<const Var> inputs, BackwardFn fn,
                 const char* op) {
  if (consumed_) throw std::logic_error("tape already differentiated");
  if (!value.all_finite()) {
    throw std::domain_error(std::string(op) + ": non-finite result " +
                            value.shape_string());
  }
  Node n;
  n.value = std::move(value);
  if (record_) {
    for (Var in : inputs) {
      CheckOwned(in);
      if (nodes_[in.id()].requires_grad) n.requires_grad = true;
    }
    if (n.requires_grad) n.backward = std::move(fn);
  }
  return Push(std::move(n));
}

void Tape::Accumulate(std::size_t id, const Tensor& g) {
  Node& n = nodes_[id];
  if (!n.requires_grad) return;
  if (!n.has_grad) {
    n.grad = g;
    n.has_grad = true;
  } else {
    n.grad += g;
  }
}

Gradient Tape::Backward(Var loss) {
  CheckOwned(loss);
  if (!record_) throw std::logic_error("Backward on a non-recording tape");
  if (consumed_) throw std::logic_error("tape already differentiated");
  const Tensor& lv = loss.value();
  if (lv.rows() != 1 || lv.cols() != 1) {
    throw std::invalid_argument("Backward: loss must be a 1x1 scalar, got " +
                                lv.shape_string());
  }
  consumed_ = true;
  Gradient out;
  if (!nodes_[loss.id()].requires_grad) return out;
  Accumulate(loss.id(), Tensor::Scalar(1.0));
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.has_grad) continue;
    if (n.backward) n.backward(*this, i);
    if (n.param != nullptr) out.Accumulate(*n.param, n.grad);
  }
  return out;
}

Tensor Tape::GradOf(Var v) const {
  CheckOwned(v);
  const Node& n = nodes_[v.id()];
  if (n.has_grad) return n.grad;
  return Tensor(n.value.shape(), 0.0);
}

// ---- Primitives -----------------------------------------------------------

Var MatMul(Var a, Var b) {
  Tape& t = SameTape("MatMul", a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  RequireRank2("MatMul", av);
  RequireRank2("MatMul", bv);
  if (av.cols() != bv.rows()) ShapeError("MatMul", av, bv);
  Tensor out = Tensor::Matrix(av.rows(), bv.cols());
  AsMatrix(out).noalias() = AsMatrix(av) * AsMatrix(bv);
  const std::size_t ia = a.id(), ib = b.id();
  return t.Record(std::move(out), {a, b}, [ia, ib](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad(self);
    if (tp.requires_grad(ia)) {
      Tensor ga(tp.value(ia).shape());
      AsMatrix(ga).noalias() = AsMatrix(g) * AsMatrix(tp.value(ib)).transpose();
      tp.Accumulate(ia, ga);
    }
    if (tp.requires_grad(ib)) {
      Tensor gb(tp.value(ib).shape());
      AsMatrix(gb).noalias() = AsMatrix(tp.value(ia)).transpose() * AsMatrix(g);
      tp.Accumulate(ib, gb);
    }
  }, "MatMul");
}

Var MatMulNT(Var a, Var b) {
  Tape& t = SameTape("MatMulNT", a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  RequireRank2("MatMulNT", av);
  RequireRank2("MatMulNT", bv);
  if (av.cols() != bv.cols()) ShapeError("MatMulNT", av, bv);
  Tensor out = Tensor::Matrix(av.rows(), bv.rows());
  AsMatrix(out).noalias() = AsMatrix(av) * AsMatrix(bv).transpose();
  const std::size_t ia = a.id(), ib = b.id();
  return t.Record(std::move(out), {a, b}, [ia, ib](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad(self);
    if (tp.requires_grad(ia)) {
      Tensor ga(tp.value(ia).shape());
      AsMatrix(ga).noalias() = AsMatrix(g) * AsMatrix(tp.value(ib));
      tp.Accumulate(ia, ga);
    }
    if (tp.requires_grad(ib)) {
      Tensor gb(tp.value(ib).shape());
      AsMatrix(gb).noalias() = AsMatrix(g).transpose() * AsMatrix(tp.value(ia));
      tp.Accumulate(ib, gb);
    }
  }, "MatMulNT");
}

Var Add(Var a, Var b) {
  Tape& t = SameTape("Add", a, b);
  RequireSameShape("Add", a.value(), b.value());
  Tensor out = a.value();
  out += b.value();
  const std::size_t ia = a.id(), ib = b.id();
  return t.Record(std::move(out), {a, b}, [ia, ib](Tape& tp, std::size_t self) {
    tp.Accumulate(ia, tp.grad(self));
    tp.Accumulate(ib, tp.grad(self));
  }, "Add");
}

Var Sub(Var a, Var b) {
  Tape& t = SameTape("Sub", a, b);
  RequireSameShape("Sub", a.value(), b.value());
  Tensor out = a.value();
  auto dst = out.data();
  auto src = b.value().data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] -= src[i];
  const std::size_t ia = a.id(), ib = b.id();
  return t.Record(std::move(out), {a, b}, [ia, ib](Tape& tp, std::size_t self) {
    tp.Accumulate(ia, tp.grad(self));
    if (tp.requires_grad(ib)) {
      Tensor g = tp.grad(self);
      g *= -1.0;
      tp.Accumulate(ib, g);
    }
  }, "Sub");
}

Var Mul(Var a, Var b) {
  Tape& t = SameTape("Mul", a, b);
  RequireSameShape("Mul", a.value(), b.value());
  Tensor out = a.value();
  auto dst = out.data();
  auto src = b.value().data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] *= src[i];
  const std::size_t ia = a.id(), ib = b.id();
  return t.Record(std::move(out), {a, b}, [ia, ib](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad(self);
    auto product = [&](std::size_t other) {
      Tensor r = g;
      auto d = r.data();
      auto o = tp.value(other).data();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] *= o[i];
      return r;
    };
    if (tp.requires_grad(ia)) tp.Accumulate(ia, product(ib));
    if (tp.requires_grad(ib)) tp.Accumulate(ib, product(ia));
  }, "Mul");
}

Var AddRow(Var a, Var row) {
  Tape& t = SameTape("AddRow", a, row);
  const Tensor& av = a.value();
  const Tensor& rv = row.value();
  RequireRank2("AddRow", av);
  RequireRank2("AddRow", rv);
  if (rv.rows() != 1 || rv.cols() != av.cols()) ShapeError("AddRow", av, rv);
  Tensor out = av;
  AsMatrix(out).rowwise() += AsMatrix(rv).row(0);
  const std::size_t ia = a.id(), ir = row.id();
  return t.Record(std::move(out), {a, row}, [ia, ir](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad(self);
    tp.Accumulate(ia, g);
    if (tp.requires_grad(ir)) {
      Tensor gr = Tensor::Matrix(1, g.cols());
      AsMatrix(gr) = AsMatrix(g).colwise().sum();
      tp.Accumulate(ir, gr);
    }
  }, "AddRow");
}

Var MulRows(Var a, Var weights) {
  Tape& t = SameTape("MulRows", a, weights);
  const Tensor& av = a.value();
  const Tensor& wv = weights.value();
  RequireRank2("MulRows", av);
  RequireRank2("MulRows", wv);
  if (wv.cols() != 1 || wv.rows() != av.rows()) ShapeError("MulRows", av, wv);
  Tensor out = av;
  for (std::size_t r = 0; r < av.rows(); ++r) {
    for (std::size_t c = 0; c < av.cols(); ++c) out(r, c) *= wv(r, 0);
  }
  const std::size_t ia = a.id(), iw = weights.id();
  return t.Record(std::move(out), {a, weights}, [ia, iw](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad(self);
    const Tensor& w = tp.value(iw);
    const Tensor& x = tp.value(ia);
    if (tp.requires_grad(ia)) {
      Tensor ga = g;
      for (std::size_t r = 0; r < g.rows(); ++r) {
        for (std::size_t c = 0; c < g.cols(); ++c) ga(r, c) *= w(r, 0);
      }
      tp.Accumulate(ia, ga);
    }
    if (tp.requires_grad(iw)) {
      Tensor gw = Tensor::Matrix(g.rows(), 1);
      for (std::size_t r = 0; r < g.rows(); ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < g.cols(); ++c) s += g(r, c) * x(r, c);
        gw(r, 0) = s;
      }
      tp.Accumulate(iw, gw);
    }
  }, "MulRows");
}

Var RepeatRows(Var row, std::size_t n) {
  const Tensor& rv = row.value();
  RequireRank2("RepeatRows", rv);
  if (rv.rows() != 1 || n == 0) {
    throw std::invalid_argument("RepeatRows: need a 1 x c row and n > 0, got " +
                                rv.shape_string());
  }
  Tensor out = Tensor::Matrix(n, rv.cols());
  AsMatrix(out).rowwise() = AsMatrix(rv).row(0);
  const std::size_t ir = row.id();
  return row.tape().Record(std::move(out), {row}, [ir](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad(self);
    Tensor gr = Tensor::Matrix(1, g.cols());
    AsMatrix(gr) = AsMatrix(g).colwise().sum();
    tp.Accumulate(ir, gr);
  }, "RepeatRows");
}

Var SumRows(Var a) {
  const Tensor& av = a.value();
  RequireRank2("SumRows", av);
  Tensor out = Tensor::Matrix(1, av.cols());
  AsMatrix(out) = AsMatrix(av).colwise().sum();
  const std::size_t ia = a.id();
  return a.tape().Record(std::move(out), {a}, [ia](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad(self);
    Tensor ga(tp.value(ia).shape());
    AsMatrix(ga).rowwise() = AsMatrix(g).row(0);
    tp.Accumulate(ia, ga);
  }, "SumRows");
}

Var Sum(Var a) {
  RequireRank2("Sum", a.value());
  Tensor out = Tensor::Scalar(a.value().sum());
  const std::size_t ia = a.id();
  return a.tape().Record(std::move(out), {a}, [ia](Tape& tp, std::size_t self) {
    tp.Accumulate(ia, Tensor(tp.value(ia).shape(), tp.grad(self)[0]));
  }, "Sum");
}

Var Affine(Var a, double alpha, double beta) {
  RequireRank2("Affine", a.value());
  Tensor out = MapUnary(a.value(), [=](double x) { return alpha * x + beta; });
  const std::size_t ia = a.id();
  return a.tape().Record(std::move(out), {a}, [ia, alpha](Tape& tp, std::size_t self) {
    Tensor g = tp.grad(self);
    g *= alpha;
    tp.Accumulate(ia, g);
  }, "Affine");
}

Var Scale(Var a, double s) { return Affine(a, s, 0.0); }

namespace {

// Elementwise op whose derivative is a function of (input, output).
template <typename Fwd, typename Deriv>
Var Elementwise(Var a, const char* op, Fwd fwd, Deriv deriv) {
  RequireRank2(op, a.value());
  Tensor out = MapUnary(a.value(), fwd);
  const std::size_t ia = a.id();
  return a.tape().Record(std::move(out), {a}, [ia, deriv](Tape& tp, std::size_t self) {
    Tensor g = tp.grad(self);
    auto x = tp.value(ia).data();
    auto y = tp.value(self).data();
    auto d = g.data();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] *= deriv(x[i], y[i]);
    tp.Accumulate(ia, g);
  }, op);
}

}  // namespace

Var Sigmoid(Var a) {
  return Elementwise(a, "Sigmoid", Logistic,
                     [](double, double y) { return y * (1.0 - y); });
}

Var Tanh(Var a) {
  return Elementwise(a, "Tanh", [](double x) { return std::tanh(x); },
                     [](double, double y) { return 1.0 - y * y; });
}

Var Relu(Var a) {
  return Elementwise(a, "Relu", [](double x) { return x > 0.0 ? x : 0.0; },
                     [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var Square(Var a) {
  return Elementwise(a, "Square", [](double x) { return x * x; },
                     [](double x, double) { return 2.0 * x; });
}

Var Rsqrt(Var a, double eps) {
  return Elementwise(
      a, "Rsqrt", [eps](double x) { return 1.0 / std::sqrt(x + eps); },
      [](double, double y) { return -0.5 * y * y * y; });
}

Var ConcatCols(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("ConcatCols: no operands");
  Tape& t = parts.front().tape();
  const std::size_t rows = parts.front().value().rows();
  std::size_t cols = 0;
  for (Var p : parts) {
    if (&p.tape() != &t) throw std::invalid_argument("ConcatCols: mixed tapes");
    if (p.value().rows() != rows) ShapeError("ConcatCols", parts.front().value(), p.value());
    cols += p.value().cols();
  }
  Tensor out = Tensor::Matrix(rows, cols);
  std::vector<std::size_t> ids, offsets;
  std::size_t offset = 0;
  for (Var p : parts) {
    const Tensor& v = p.value();
    AsMatrix(out).middleCols(static_cast<Eigen::Index>(offset),
                             static_cast<Eigen::Index>(v.cols())) = AsMatrix(v);
    ids.push_back(p.id());
    offsets.push_back(offset);
    offset += v.cols();
  }
  return t.Record(std::move(out), parts, [ids, offsets](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad(self);
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (!tp.requires_grad(ids[k])) continue;
      Tensor gk(tp.value(ids[k]).shape());
      AsMatrix(gk) = AsMatrix(g).middleCols(static_cast<Eigen::Index>(offsets[k]),
                                           static_cast<Eigen::Index>(gk.cols()));
      tp.Accumulate(ids[k], gk);
    }
  }, "ConcatCols");
}

Var SliceCols(Var a, std::size_t begin, std::size_t count) {
  const Tensor& av = a.value();
  RequireRank2("SliceCols", av);
  if (count == 0 || begin + count > av.cols()) {
    throw std::invalid_argument("SliceCols: columns [" + std::to_string(begin) +
                                ", " + std::to_string(begin + count) +
                                ") out of range for " + av.shape_string());
  }
  Tensor out = Tensor::Matrix(av.rows(), count);
  AsMatrix(out) = AsMatrix(av).middleCols(static_cast<Eigen::Index>(begin),
                                         static_cast<Eigen::Index>(count));
  const std::size_t ia = a.id();
  return a.tape().Record(std::move(out), {a}, [ia, begin, count](Tape& tp, std::size_t self) {
    Tensor ga(tp.value(ia).shape(), 0.0);
    AsMatrix(ga).middleCols(static_cast<Eigen::Index>(begin),
                            static_cast<Eigen::Index>(count)) = AsMatrix(tp.grad(self));
    tp.Accumulate(ia, ga);
  }, "SliceCols");
}

Var GatherRows(Var table, std::span<const int> indices) {
  const Tensor& tv = table.value();
  RequireRank2("GatherRows", tv);
  if (indices.empty()) throw std::invalid_argument("GatherRows: no indices");
  Tensor out = Tensor::Matrix(indices.size(), tv.cols());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const int idx = indices[r];
    if (idx < 0 || static_cast<std::size_t>(idx) >= tv.rows()) {
      throw std::out_of_range("GatherRows: index " + std::to_string(idx) +
                              " outside table " + tv.shape_string());
    }
    AsMatrix(out).row(static_cast<Eigen::Index>(r)) = AsMatrix(tv).row(idx);
  }
  const std::size_t it = table.id();
  std::vector<int> idx(indices.begin(), indices.end());
  return table.tape().Record(std::move(out), {table}, [it, idx](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad(self);
    Tensor gt(tp.value(it).shape(), 0.0);
    for (std::size_t r = 0; r < idx.size(); ++r) {
      AsMatrix(gt).row(idx[r]) += AsMatrix(g).row(static_cast<Eigen::Index>(r));
    }
    tp.Accumulate(it, gt);
  }, "GatherRows");
}

Var Pick(Var a, std::span<const int> columns) {
  const Tensor& av = a.value();
  RequireRank2("Pick", av);
  if (columns.size() != av.rows()) {
    throw std::invalid_argument("Pick: " + std::to_string(columns.size()) +
                                " indices for " + av.shape_string());
  }
  Tensor out = Tensor::Matrix(av.rows(), 1);
  for (std::size_t r = 0; r < av.rows(); ++r) {
    const int c = columns[r];
    if (c < 0 || static_cast<std::size_t>(c) >= av.cols()) {
      throw std::out_of_range("Pick: column " + std::to_string(c) + " outside " +
                              av.shape_string());
    }
    out(r, 0) = av(r, static_cast<std::size_t>(c));
  }
  const std::size_t ia = a.id();
  std::vector<int> cols(columns.begin(), columns.end());
  return a.tape().Record(std::move(out), {a}, [ia, cols](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad(self);
    Tensor ga(tp.value(ia).shape(), 0.0);
    for (std::size_t r = 0; r < cols.size(); ++r) {
      ga(r, static_cast<std::size_t>(cols[r])) = g(r, 0);
    }
    tp.Accumulate(ia, ga);
  }, "Pick");
}

}  // namespace commlab
