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


#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <doctest.h>

#include "commlab/trainer.h"

using namespace commlab;

namespace {

RunConfig SmallSwitch(Method m) {
  RunConfig c;
  c.env.name = "switch";
  c.env.n = 3;
  c.train.method = m;
  c.train.batch = 4;
  c.train.embed = 6;
  c.train.episodes = 20;
  c.train.eval_every = 10;
  c.train.eval_episodes = 16;
  c.train.target_reset = 5;
  return c;
}

CNetConfig SwitchNet(Method m, int agents) {
  CNetConfig c;
  c.method = m;
  c.num_agents = agents;
  c.num_actions = 2;
  c.message_bits = 1;
  c.embed = 5;
  c.obs_vocab = 2;
  return c;
}

struct Fixture {
  explicit Fixture(Method m, int n = 3, int batch = 5, double eps = 0.3)
      : team(SwitchNet(m, n), true, 11) {
    for (int b = 0; b < batch; ++b) {
      envs.push_back(std::make_unique<SwitchRiddle>(n));
      seeds.push_back(100 + b);
    }
    opts.epsilon = eps;
    opts.dru = {1.0, DruMode::kTrain};
    opts.update_running = false;
  }
  TrajectoryBatch Roll() {
    Rng explore(1), noise(2);
    return Rollout(envs, seeds, team, opts, explore, noise);
  }
  Team team;
  std::vector<std::unique_ptr<Environment>> envs;
  std::vector<std::uint64_t> seeds;
  RolloutOptions opts;
};

double LossValue(const TrajectoryBatch& tb, Team& team, const TdTargets& fixed) {
  Tape tape(false);
  return TrainingLoss(tape, tb, team, 1.0, &fixed).value()(0, 0);
}

std::string Slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<double> Values(const Tensor& t) {
  return {t.data().begin(), t.data().end()};
}

void ZeroAll(CNet& net) {
  ParamSet& ps = net.params();
  for (std::size_t i = 0; i < ps.size(); ++i) {
    if (ps.at(i).name.find("running_var") != std::string::npos) continue;
    for (double& v : ps.at(i).value.data()) v = 0.0;
  }
}

}  // namespace

TEST_CASE("rollout respects horizon and masks finished episodes") {
  Fixture f(Method::kDial, 3, 8, 0.5);
  const TrajectoryBatch tb = f.Roll();
  CHECK(tb.steps.size() <= 6);
  for (int b = 0; b < 8; ++b) {
    const int len = tb.episode_length[b];
    CHECK(len >= 1);
    CHECK(len <= 6);
    double total = 0.0;
    for (std::size_t t = 0; t < tb.steps.size(); ++t) {
      const bool alive = t < static_cast<std::size_t>(len);
      CHECK(static_cast<bool>(tb.steps[t].alive[b]) == alive);
      CHECK(static_cast<bool>(tb.steps[t].terminal[b]) == (t + 1 == static_cast<std::size_t>(len)));
      total += tb.steps[t].reward[b];
      if (!alive) CHECK(tb.steps[t].reward[b] == 0.0);
    }
    CHECK(total == tb.episode_reward[b]);
  }
  // Messages travel only to the current occupant from the previous one.
  for (std::size_t t = 1; t < tb.steps.size(); ++t) {
    for (int b = 0; b < 8; ++b) {
      if (!tb.steps[t].alive[b]) continue;
      double routes = 0.0;
      for (int a = 0; a < 3; ++a) {
        for (int s = 0; s < 3; ++s) routes += tb.steps[t].route[a][s](b, 0);
      }
      CHECK(routes == 1.0);
    }
  }
}

TEST_CASE("rollout rejects mismatched inputs") {
  Fixture f(Method::kDial);
  Rng e(1), z(2);
  std::vector<std::uint64_t> too_many(9, 1);
  CHECK_THROWS_AS(Rollout(f.envs, too_many, f.team, f.opts, e, z), std::invalid_argument);
  Team wrong(SwitchNet(Method::kDial, 2), true, 1);
  CHECK_THROWS_AS(Rollout(f.envs, f.seeds, wrong, f.opts, e, z), std::invalid_argument);
}

TEST_CASE("replay gradient matches finite differences through the channel") {
  Fixture f(Method::kDial, 3, 4, 0.5);
  const TrajectoryBatch tb = f.Roll();
  TdTargets targets;
  double loss = 0.0;
  Gradient g;
  {
    Tape tape;
    Var l = TrainingLoss(tape, tb, f.team, 1.0, nullptr, &targets);
    loss = l.value()(0, 0);
    g = tape.Backward(l);
  }
  CHECK(loss == doctest::Approx(LossValue(tb, f.team, targets)));
  ParamSet& ps = f.team.online_net(0).params();
  Rng pick(3);
  int checked = 0;
  double worst = 0.0;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    Parameter& p = ps.at(i);
    if (!p.trainable) continue;
    const Tensor* grad = g.Find(p);
    auto data = p.value.data();
    for (int k = 0; k < 3; ++k) {
      const std::size_t j = std::uniform_int_distribution<std::size_t>(0, data.size() - 1)(pick);
      const double keep = data[j];
      const double h = 1e-6;
      data[j] = keep + h;
      const double up = LossValue(tb, f.team, targets);
      data[j] = keep - h;
      const double down = LossValue(tb, f.team, targets);
      data[j] = keep;
      const double numeric = (up - down) / (2 * h);
      const double analytic = grad ? grad->data()[j] : 0.0;
      const double rel = std::abs(numeric - analytic) /
                         std::max(1e-6, std::abs(numeric) + std::abs(analytic));
      worst = std::max(worst, rel);
      ++checked;
    }
  }
  CAPTURE(worst);
  CHECK(checked > 30);
  CHECK(worst < 1e-4);
  // The message head only reaches the loss through the receiver.
  const Tensor* head = g.Find(*ps.Find("out/fc2/weight"));
  REQUIRE(head != nullptr);
  double message_row = 0.0;
  for (std::size_t c = 0; c < head->cols(); ++c) message_row += std::abs((*head)(2, c));
  CHECK(message_row > 0.0);
}

TEST_CASE("zero network: loss is the squared episode reward per agent") {
  Fixture f(Method::kDial, 3, 6, 1.0);
  ZeroAll(f.team.online_net(0));
  ZeroAll(f.team.target_net(0));
  const TrajectoryBatch tb = f.Roll();
  double expected = 0.0;
  for (double r : tb.episode_reward) expected += 3.0 * r * r;
  expected /= 6.0;
  double loss = -1.0;
  DialBackward(tb, f.team, 1.0, &loss);
  CHECK(loss == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("backward passes check the channel") {
  Fixture dial(Method::kDial);
  dial.opts.dru.mode = DruMode::kExec;
  const TrajectoryBatch exec = dial.Roll();
  CHECK_THROWS_AS(DialBackward(exec, dial.team, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(RialBackward(exec, dial.team, 1.0), std::invalid_argument);
  Fixture rial(Method::kRial);
  const TrajectoryBatch tb = rial.Roll();
  CHECK_THROWS_AS(DialBackward(tb, rial.team, 1.0), std::invalid_argument);
  double loss = -1.0;
  const Gradient g = RialBackward(tb, rial.team, 1.0, &loss);
  CHECK(loss >= 0.0);
  CHECK(g.all_finite());
  // Discrete messages carry no gradient between agents.
  for (std::size_t t = 0; t < tb.steps.size(); ++t) {
    for (int a = 0; a < 3; ++a) {
      for (double v : tb.steps[t].sent[a].data()) CHECK((v == 0.0 || v == 1.0));
    }
  }
}

TEST_CASE("saturation fraction") {
  const double v[] = {0.0, 0.05, 0.5, 0.94, 0.95, 1.0};
  CHECK(SaturationFraction(v) == doctest::Approx(4.0 / 6.0));
  CHECK(SaturationFraction({}) == 0.0);
}

TEST_CASE("training is deterministic for a fixed seed") {
  const auto root = std::filesystem::temp_directory_path() / "commlab_det";
  std::filesystem::remove_all(root);
  // Live blocks of odd sizes shift where later buffers land, so the runs see
  // different heap addresses.
  std::vector<std::unique_ptr<char[]>> shift;
  for (const char* run : {"a", "b", "c"}) {
    shift.push_back(std::make_unique<char[]>(8 * shift.size() + 24));
    RunConfig c = SmallSwitch(Method::kDial);
    c.train.out_dir = (root / run).string();
    Trainer t(c);
    const LearningCurve curve = t.Run();
    CHECK(curve.rows.size() == 3);
    CHECK(curve.rows.front().episode == 0);
    CHECK(curve.rows.back().episode == 20);
    CHECK(t.target_syncs() == 4);
  }
  const std::string a = Slurp(root / "a" / "curve.csv");
  CHECK(a.find("episode,raw_reward,norm_reward,loss,saturation_frac") != std::string::npos);
  CHECK(a == Slurp(root / "b" / "curve.csv"));
  CHECK(a == Slurp(root / "c" / "curve.csv"));
  CHECK(std::filesystem::exists(root / "a" / "checkpoint_latest.txt"));
  std::filesystem::remove_all(root);
}

TEST_CASE("resuming from a checkpoint continues the same run") {
  RunConfig c = SmallSwitch(Method::kRial);
  c.train.eval_every = 1000;
  Trainer straight(c);
  for (int i = 0; i < 8; ++i) straight.TrainBatch();

  Trainer first(c);
  for (int i = 0; i < 4; ++i) first.TrainBatch();
  const auto path = std::filesystem::temp_directory_path() / "commlab_resume.txt";
  first.SaveCheckpoint(path);
  const RunConfig stored = Trainer::CheckpointConfig(Checkpoint::Load(path));
  CHECK(ConfigHash(stored) == ConfigHash(c));
  Trainer second(stored);
  second.LoadCheckpoint(path);
  CHECK(second.episodes_done() == 4);
  for (int i = 0; i < 4; ++i) second.TrainBatch();
  const ParamSet& x = straight.team().online(0).params();
  const ParamSet& y = second.team().online(0).params();
  for (std::size_t i = 0; i < x.size(); ++i) {
    CHECK(Values(x.at(i).value) == Values(y.at(i).value));
  }
  std::filesystem::remove(path);
}

TEST_CASE("game episode unit counts individual games") {
  RunConfig c = SmallSwitch(Method::kNoComm);
  c.train.episode_unit = EpisodeUnit::kGame;
  c.train.episodes = 8;
  c.train.eval_every = 4;
  Trainer t(c);
  const LearningCurve curve = t.Run();
  CHECK(t.episodes_done() == 8);
  CHECK(curve.rows.size() == 3);
}

TEST_CASE("divergence restores the last good parameters") {
  RunConfig c = SmallSwitch(Method::kDial);
  c.train.rms.learning_rate = 1e305;
  Trainer t(c);
  const std::vector<double> before = Values(t.team().online(0).params().at(0).value);
  bool diverged = false;
  try {
    for (int i = 0; i < 5; ++i) t.TrainBatch();
  } catch (const TrainingDiverged&) {
    diverged = true;
  }
  REQUIRE(diverged);
  CHECK(Values(t.team().online(0).params().at(0).value) == before);
}

TEST_CASE("evaluation is normalised by the oracle") {
  RunConfig c = SmallSwitch(Method::kDial);
  Trainer t(c);
  const EvalResult r = t.Evaluate(40, 5);
  CHECK(r.normalized == doctest::Approx(r.mean / (540.0 / 729.0)));
  CHECK(r.std_error >= 0.0);
  CHECK_THROWS_AS(t.Evaluate(1), std::invalid_argument);
}

TEST_CASE("parity toy: expected reward and discrete update vanish") {
  const ParityReport rep = ToyParityDemo(6, 4);
  CHECK(rep.expected_reward_fixed_action[0] == 0.0);
  CHECK(rep.expected_reward_fixed_action[1] == 0.0);
  CHECK(rep.expected_td_update == 0.0);
  REQUIRE(rep.dial_gradient.size() == 6);
  // At theta = 0 the channel outputs 1/2 with slope 1/4; the gradient is
  // -(1/32) sum over s2, u2 of r(s1, s2, u2) w[s2][u2].
  for (int draw = 0; draw < 6; ++draw) {
    Rng rng = MakeRng(4, Stream::kAnalysis, draw);
    std::normal_distribution<double> normal(0.0, 1.0);
    double w[2][2];
    for (auto& row : w) {
      for (double& v : row) v = normal(rng);
    }
    for (int s1 = 0; s1 < 2; ++s1) {
      double expected = 0.0;
      for (int s2 = 0; s2 < 2; ++s2) {
        for (int u2 = 0; u2 < 2; ++u2) {
          const double r = (s1 + s2 + u2) % 2 == 0 ? 1.0 : -1.0;
          expected -= r * w[s2][u2] / 32.0;
        }
      }
      CHECK(rep.dial_gradient[draw][s1] == doctest::Approx(expected).epsilon(1e-12));
    }
    CHECK(rep.dial_gradient_norm[draw] > 0.0);
  }
}
