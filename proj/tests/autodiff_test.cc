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

#include <cmath>
#include <limits>
#include <stdexcept>

#include <doctest.h>

#include "commlab/analysis.h"
#include "commlab/autodiff.h"
#include "commlab/grad_check.h"

using namespace commlab;

TEST_CASE("tensor construction and access") {
  Tensor t = Tensor::FromRows({{1, 2, 3}, {4, 5, 6}});
  CHECK(t.rows() == 2);
  CHECK(t.cols() == 3);
  CHECK(t(1, 2) == 6);
  CHECK(t.sum() == 21);
  CHECK(t.max_abs() == 6);
  CHECK_THROWS_AS(Tensor::FromRows({{1, 2}, {3}}), std::invalid_argument);
  CHECK_THROWS_AS(Tensor::Matrix(0, 3), std::invalid_argument);
  Tensor i = Tensor::Identity(3);
  CHECK(i(0, 0) == 1);
  CHECK(i(0, 1) == 0);
}

TEST_CASE("matmul value matches hand computation") {
  Tape tape(false);
  Var a = tape.Constant(Tensor::FromRows({{1, 2}, {3, 4}}));
  Var b = tape.Constant(Tensor::FromRows({{5, 6}, {7, 8}}));
  const Tensor& c = MatMul(a, b).value();
  CHECK(c(0, 0) == 19);
  CHECK(c(0, 1) == 22);
  CHECK(c(1, 0) == 43);
  CHECK(c(1, 1) == 50);
  const Tensor& d = MatMulNT(a, b).value();
  CHECK(d(0, 0) == 17);
  CHECK(d(1, 1) == 53);
}

TEST_CASE("gradient of a small expression by hand") {
  // f = sum(sigmoid(w x)), df/dw = sigmoid' (w x) x^T.
  ParamSet ps;
  Parameter& w = ps.Add("w", Tensor::FromRows({{0.5, -1.0}}));
  Tape tape;
  Var x = tape.Constant(Tensor::FromRows({{2.0}, {1.0}}));
  Var f = Sum(Sigmoid(MatMul(tape.Param(w), x)));
  Gradient g = tape.Backward(f);
  const double z = 0.5 * 2.0 - 1.0;
  const double s = 1.0 / (1.0 + std::exp(-z));
  const Tensor* gw = g.Find(w);
  REQUIRE(gw != nullptr);
  CHECK((*gw)(0, 0) == doctest::Approx(s * (1 - s) * 2.0).epsilon(1e-14));
  CHECK((*gw)(0, 1) == doctest::Approx(s * (1 - s) * 1.0).epsilon(1e-14));
}

TEST_CASE("tape misuse is rejected") {
  ParamSet ps;
  Parameter& w = ps.Add("w", Tensor::Matrix(2, 2, 1.0));
  SUBCASE("non-scalar loss") {
    Tape tape;
    CHECK_THROWS_AS(tape.Backward(tape.Param(w)), std::invalid_argument);
  }
  SUBCASE("second backward") {
    Tape tape;
    Var l = Sum(tape.Param(w));
    tape.Backward(l);
    CHECK_THROWS_AS(tape.Backward(l), std::logic_error);
  }
  SUBCASE("non-recording tape") {
    Tape tape(false);
    CHECK_THROWS_AS(tape.Backward(Sum(tape.Param(w))), std::logic_error);
  }
  SUBCASE("mixed tapes") {
    Tape a, b;
    CHECK_THROWS_AS(Add(a.Param(w), b.Param(w)), std::invalid_argument);
  }
  SUBCASE("shape mismatch") {
    Tape tape;
    Var x = tape.Constant(Tensor::Matrix(3, 2));
    CHECK_THROWS_AS(MatMul(x, x), std::invalid_argument);
  }
  SUBCASE("non-finite inputs") {
    Tape tape;
    CHECK_THROWS_AS(tape.Constant(Tensor::Matrix(1, 1, std::nan(""))), std::domain_error);
  }
  SUBCASE("out of range indices") {
    Tape tape;
    const int bad[] = {5};
    CHECK_THROWS_AS(GatherRows(tape.Param(w), bad), std::out_of_range);
    const int bad_col[] = {0, 7};
    CHECK_THROWS_AS(Pick(tape.Param(w), bad_col), std::out_of_range);
  }
  SUBCASE("duplicate parameter") {
    CHECK_THROWS_AS(ps.Add("w", Tensor::Matrix(1, 1)), std::invalid_argument);
  }
}

TEST_CASE("gradient accumulates over shared uses") {
  // f = sum(w * w) + sum(w): df/dw = 2w + 1.
  ParamSet ps;
  Parameter& w = ps.Add("w", Tensor::FromRows({{1.5, -2.0, 0.25}}));
  Tape tape;
  Var v = tape.Param(w);
  Gradient g = tape.Backward(Add(Sum(Mul(v, v)), Sum(v)));
  const Tensor& gw = *g.Find(w);
  CHECK(gw(0, 0) == doctest::Approx(4.0));
  CHECK(gw(0, 1) == doctest::Approx(-3.0));
  CHECK(gw(0, 2) == doctest::Approx(1.5));
}

TEST_CASE("non-trainable parameters get no gradient") {
  ParamSet ps;
  Parameter& w = ps.Add("w", Tensor::Matrix(1, 2, 1.0));
  Parameter& frozen = ps.Add("frozen", Tensor::Matrix(1, 2, 3.0), false);
  Tape tape;
  Gradient g = tape.Backward(Sum(Mul(tape.Param(w), tape.Param(frozen))));
  CHECK(g.Find(w) != nullptr);
  CHECK(g.Find(frozen) == nullptr);
  CHECK(ps.NumTrainableScalars() == 2);
}

TEST_CASE("finite-difference suite: primitives and layers") {
  const auto rows = RunGradCheckSuite(3);
  int primitives = 0;
  for (const auto& r : rows) {
    CAPTURE(r.name);
    CAPTURE(r.max_rel_error);
    if (r.suite != "unroll") CHECK(r.tolerance == 1e-6);
    CHECK(r.passed);
    CHECK(r.coordinates > 0);
    primitives += r.suite == "primitive";
  }
  CHECK(primitives == 21);
}

TEST_CASE("grad check detects a wrong derivative") {
  // A primitive with a deliberately wrong backward pass must fail.
  auto broken = [](Tape& t, std::span<const Var> in) {
    Var x = in[0];
    Tensor y = x.value();
    for (double& v : y.data()) v = v * v;
    return Sum(t.Record(
        y, {x},
        [x](Tape& tape, std::size_t self) {
          Tensor g = tape.grad(self);  // claims d(x^2)/dx = 1
          tape.Accumulate(x.id(), g);
        },
        "broken"));
  };
  const GradCheckReport r = GradCheck(broken, {Tensor::FromRows({{0.7, -1.3}})});
  CHECK_FALSE(r.passed(1e-6));
}
