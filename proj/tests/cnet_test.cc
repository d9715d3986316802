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
#include <vector>

#include <doctest.h>

#include "commlab/cnet.h"

using namespace commlab;

namespace {

CNetConfig SmallConfig(Method m) {
  CNetConfig c;
  c.method = m;
  c.num_agents = 3;
  c.num_actions = 2;
  c.message_bits = 1;
  c.embed = 8;
  c.obs_vocab = 2;
  return c;
}

struct Inputs {
  std::vector<int> obs{0, 1, 1};
  std::vector<int> prev_action{2, 0, 1};
  std::vector<int> prev_message{2, 0, 1};
};

CNet::Output Run(const CNet& net, Tape& tape, const Inputs& in, int agent = 0) {
  CNet::Input x;
  x.obs_index = in.obs;
  x.prev_action = in.prev_action;
  x.prev_message = in.prev_message;
  x.agent = agent;
  if (net.config().incoming_width() > 0) {
    x.incoming = tape.Constant(Tensor::FromRows({{0.0}, {1.0}, {0.5}}));
  }
  x.h1 = net.InitialHidden(tape, 3);
  x.h2 = net.InitialHidden(tape, 3);
  return net.Forward(tape, x, BatchNorm::Mode::kTrain, false);
}

// Fresh tape each time: a tape caches parameter values on first use.
double FirstQ(const CNet& net) {
  Tape tape(false);
  return Run(net, tape, Inputs{}).q.value()(0, 0);
}

}  // namespace

TEST_CASE("head widths per method") {
  CHECK(SmallConfig(Method::kDial).head_width() == 1);
  CHECK(SmallConfig(Method::kRial).head_width() == 2);
  CHECK(SmallConfig(Method::kNoComm).head_width() == 0);
  CHECK(SmallConfig(Method::kNoComm).incoming_width() == 0);
  CHECK(ParseMethod("dial") == Method::kDial);
  CHECK_THROWS_AS(ParseMethod("DIAL"), std::invalid_argument);
  CNetConfig bad = SmallConfig(Method::kDial);
  bad.obs_dim = 4;
  CHECK_THROWS_AS(ValidateCNetConfig(bad), std::invalid_argument);
}

TEST_CASE("forward shapes") {
  for (Method m : {Method::kDial, Method::kRial, Method::kNoComm}) {
    Rng rng(1);
    CNet net(SmallConfig(m), rng);
    Tape tape(false);
    const CNet::Output out = Run(net, tape, Inputs{});
    CHECK(out.q.rows() == 3);
    CHECK(out.q.cols() == 2);
    CHECK(out.h1.cols() == 8);
    CHECK(out.h2.cols() == 8);
    if (m == Method::kNoComm) {
      CHECK_FALSE(out.message.valid());
    } else {
      CHECK(out.message.cols() == net.config().head_width());
    }
  }
}

TEST_CASE("agent index changes the output") {
  Rng rng(2);
  CNet net(SmallConfig(Method::kDial), rng);
  Tape tape(false);
  const Tensor a = Run(net, tape, Inputs{}, 0).q.value();
  const Tensor b = Run(net, tape, Inputs{}, 1).q.value();  // copies, the tape grows
  CHECK(a(0, 0) != b(0, 0));
  CHECK_THROWS_AS(Run(net, tape, Inputs{}, 3), std::out_of_range);
}

TEST_CASE("forward rejects bad inputs") {
  Rng rng(3);
  CNet net(SmallConfig(Method::kDial), rng);
  Tape tape(false);
  SUBCASE("missing hidden state") {
    CNet::Input x;
    const std::vector<int> obs{0}, act{0};
    x.obs_index = obs;
    x.prev_action = act;
    x.incoming = tape.Constant(Tensor::Matrix(1, 1));
    CHECK_THROWS_AS(net.Forward(tape, x, BatchNorm::Mode::kEval, false), std::invalid_argument);
  }
  SUBCASE("row mismatch") {
    Inputs in;
    in.obs = {0, 1};
    CHECK_THROWS_AS(Run(net, tape, in), std::invalid_argument);
  }
  SUBCASE("missing incoming message") {
    CNet::Input x;
    const std::vector<int> obs{0, 1}, act{0, 1};
    x.obs_index = obs;
    x.prev_action = act;
    x.h1 = net.InitialHidden(tape, 2);
    x.h2 = net.InitialHidden(tape, 2);
    CHECK_THROWS_AS(net.Forward(tape, x, BatchNorm::Mode::kTrain, false),
                    std::invalid_argument);
  }
}

TEST_CASE("clone and target sync") {
  Rng rng(4);
  CNet net(SmallConfig(Method::kRial), rng);
  auto copy = net.Clone();
  const double original = FirstQ(net);
  CHECK(FirstQ(*copy) == original);
  Rng other(5);
  CNet target(SmallConfig(Method::kRial), other);
  CHECK(FirstQ(target) != original);
  SyncTarget(net, target);
  CHECK(FirstQ(target) == original);
}

TEST_CASE("greedy selection respects legality and breaks ties low") {
  Rng rng(6);
  const double q[] = {1.0, 3.0, 3.0, 2.0};
  CHECK(EpsilonGreedy(q, {}, 0.0, rng) == 1);
  const char legal[] = {1, 0, 1, 1};
  CHECK(EpsilonGreedy(q, legal, 0.0, rng) == 2);
  const char none[] = {0, 0, 0, 0};
  CHECK_THROWS_AS(EpsilonGreedy(q, none, 0.0, rng), std::invalid_argument);
  CHECK_THROWS_AS(EpsilonGreedy(q, {}, 1.5, rng), std::invalid_argument);
  // epsilon = 0 leaves the stream untouched.
  Rng a(7), b(7);
  EpsilonGreedy(q, {}, 0.0, a);
  CHECK(a() == b());
}

TEST_CASE("exploration is uniform over legal actions") {
  Rng rng(8);
  const double q[] = {0.0, 5.0, 0.0, 0.0};
  const char legal[] = {1, 1, 0, 1};
  const int n = 30000;
  std::vector<int> count(4, 0);
  for (int i = 0; i < n; ++i) count[EpsilonGreedy(q, legal, 1.0, rng)] += 1;
  CHECK(count[2] == 0);
  const double expected = n / 3.0;
  double chi2 = 0.0;
  for (int i : {0, 1, 3}) chi2 += (count[i] - expected) * (count[i] - expected) / expected;
  CHECK(chi2 < 13.82);  // df = 2, p = 0.001

  // With epsilon = 0.3 the greedy action gets 0.7 + 0.1.
  int greedy = 0;
  for (int i = 0; i < n; ++i) greedy += EpsilonGreedy(q, legal, 0.3, rng) == 1;
  const double p = 0.8;
  CHECK(std::abs(greedy - p * n) < 4.0 * std::sqrt(n * p * (1 - p)));
}

TEST_CASE("action and message are explored independently") {
  Rng rng(9);
  const double qa[] = {1.0, 0.0};
  const double qm[] = {1.0, 0.0};
  const int n = 40000;
  int both = 0, action = 0, message = 0;
  for (int i = 0; i < n; ++i) {
    const RialChoice c = SelectRial(qa, {}, qm, 0.5, rng);
    action += c.action == 1;
    message += c.message == 1;
    both += c.action == 1 && c.message == 1;
  }
  // Each off-greedy with probability 0.25; jointly 1/16.
  CHECK(std::abs(action / double(n) - 0.25) < 0.01);
  CHECK(std::abs(message / double(n) - 0.25) < 0.01);
  CHECK(std::abs(both / double(n) - 0.0625) < 0.006);
}

TEST_CASE("message bits") {
  CHECK(MessageBits(0, 2) == std::vector<double>{0, 0});
  CHECK(MessageBits(2, 2) == std::vector<double>{0, 1});
  CHECK(MessageBits(3, 2) == std::vector<double>{1, 1});
  CHECK_THROWS_AS(MessageBits(4, 2), std::out_of_range);
  CHECK_THROWS_AS(MessageBits(-1, 2), std::out_of_range);
}

TEST_CASE("dial selection passes the message through the channel") {
  Rng rng(10);
  const double q[] = {0.0, 1.0};
  const double m[] = {-0.3, 0.4};
  const DialChoice c = SelectDial(q, {}, m, 0.0, DruConfig{0.0, DruMode::kExec}, rng);
  CHECK(c.action == 1);
  CHECK(c.message == std::vector<double>{0.0, 1.0});
}
