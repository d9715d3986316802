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

// Batched rollouts and the two learning rules.
//
// A batch of episodes runs in lock step, one row per episode. Rollouts are
// forward-only; the loss is rebuilt afterwards on a recording tape by
// replaying the recorded observations, actions, routing and channel noise,
// so the gradient of the replayed loss is exactly what gets optimised.
//
// With the differentiable channel all agents share one tape and the
// receivers' errors flow back into the senders through the logistic
// channel, across agents and steps. With the discrete channel messages are
// data, and each head is regressed on its own target.

#ifndef COMMLAB_TRAINER_H_
#define COMMLAB_TRAINER_H_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "commlab/checkpoint.h"
#include "commlab/cnet.h"
#include "commlab/config.h"
#include "commlab/env.h"

namespace commlab {

// Builds environments sharing one digit dataset.
class EnvFactory {
 public:
  explicit EnvFactory(const EnvConfig& cfg);
  std::unique_ptr<Environment> Make() const;
  const EnvSpec& spec() const { return spec_; }
  double oracle() const { return oracle_; }
  const EnvConfig& config() const { return cfg_; }
  std::shared_ptr<const DigitDataset> dataset() const { return data_; }

 private:
  EnvConfig cfg_;
  std::shared_ptr<const DigitDataset> data_;
  EnvSpec spec_;
  double oracle_ = 0.0;
};

// Online and target networks: one pair shared by all agents, or one per agent.
class Team {
 public:
  Team(const CNetConfig& cfg, bool share, std::uint64_t seed);

  int num_agents() const { return cfg_.num_agents; }
  int num_nets() const { return static_cast<int>(online_.size()); }
  bool shared() const { return share_; }
  const CNetConfig& config() const { return cfg_; }

  CNet& online(int agent) { return *online_[share_ ? 0 : agent]; }
  const CNet& online(int agent) const { return *online_[share_ ? 0 : agent]; }
  CNet& target(int agent) { return *target_[share_ ? 0 : agent]; }
  const CNet& target(int agent) const { return *target_[share_ ? 0 : agent]; }
  CNet& online_net(int i) { return *online_[i]; }
  CNet& target_net(int i) { return *target_[i]; }

  void SyncTargets();
  std::vector<ParamSet*> online_params();

 private:
  CNetConfig cfg_;
  bool share_;
  std::vector<std::unique_ptr<CNet>> online_;
  std::vector<std::unique_ptr<CNet>> target_;
};

// One lock-step time step of a batch. Index [agent][row] unless noted.
struct StepRecord {
  std::vector<char> alive;                        // [row]
  std::vector<std::vector<int>> obs_index;
  std::vector<Tensor> obs_dense;                  // [agent] B x obs_dim
  // route[agent][sender](row, 0) = 1 when sender's previous message reaches
  // agent in that row.
  std::vector<std::vector<Tensor>> route;
  std::vector<std::vector<int>> prev_action;
  std::vector<std::vector<int>> prev_message;     // discrete channel
  std::vector<std::vector<int>> action;
  std::vector<std::vector<int>> message;          // discrete channel choice
  std::vector<Tensor> noise;                      // [agent] B x bits
  std::vector<std::vector<char>> legal;           // [agent][row * U + u]
  std::vector<double> reward;                     // [row]
  std::vector<char> terminal;                     // [row]
  // Snapshots from the rollout.
  std::vector<Tensor> q;                          // [agent] B x U
  std::vector<Tensor> message_head;               // [agent] pre-channel
  std::vector<Tensor> incoming;                   // [agent] B x bits, as received
  std::vector<Tensor> sent;                       // [agent] B x bits, channel output
};

struct TrajectoryBatch {
  Method method = Method::kDial;
  DruMode channel = DruMode::kTrain;
  int batch = 0;
  int agents = 0;
  int num_actions = 0;
  int message_bits = 0;
  std::vector<StepRecord> steps;
  std::vector<double> episode_reward;       // [row]
  std::vector<int> episode_length;          // [row]
  std::vector<std::vector<int>> labels;     // [row][agent], hidden digits
};

struct RolloutOptions {
  double epsilon = 0.05;
  DruConfig dru;
  BatchNorm::Mode bn = BatchNorm::Mode::kTrain;
  bool update_running = true;
};

// Resets envs[i] with seeds[i] and plays all of them to the end.
TrajectoryBatch Rollout(std::span<const std::unique_ptr<Environment>> envs,
                        std::span<const std::uint64_t> seeds, Team& team,
                        const RolloutOptions& opts, Rng& explore, Rng& noise);

// Sum over steps, agents and live rows of squared TD errors, divided by the
// batch size. Targets come from the target networks evaluated one step
// ahead on the recorded inputs and the online recurrent state, and are
// constants. Terminal steps regress on the reward alone.
//
// `computed`, when given, receives the targets; `fixed`, when given, is used
// instead of evaluating the target networks. Holding targets fixed makes the
// loss a pure function of the online parameters (finite-difference checks).
struct TdTargets {
  // [step][agent][row]
  std::vector<std::vector<std::vector<double>>> action;
  std::vector<std::vector<std::vector<double>>> message;  // discrete channel
};
Var TrainingLoss(Tape& tape, const TrajectoryBatch& batch, Team& team, double gamma,
                 const TdTargets* fixed = nullptr, TdTargets* computed = nullptr);

// Gradient of TrainingLoss for a differentiable-channel batch; rejects
// batches recorded with the threshold channel.
Gradient DialBackward(const TrajectoryBatch& batch, Team& team, double gamma,
                      double* loss = nullptr);
// Gradient for a discrete-channel batch: both heads, no cross-agent terms.
Gradient RialBackward(const TrajectoryBatch& batch, Team& team, double gamma,
                      double* loss = nullptr);

// Fraction of delivered train-mode channel outputs outside (0.05, 0.95).
double SaturationFraction(std::span<const double> delivered);
std::vector<double> DeliveredMessages(const TrajectoryBatch& batch);

struct CurveRow {
  long episode = 0;
  double raw_reward = 0.0;
  double norm_reward = 0.0;
  double loss = 0.0;
  double saturation = 0.0;
};

struct LearningCurve {
  std::vector<CurveRow> rows;
  double best_norm() const;
  double final_norm() const;
};

struct EvalResult {
  double mean = 0.0;
  double std_error = 0.0;
  double normalized = 0.0;
};

class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(const std::string& what, std::filesystem::path checkpoint)
      : std::runtime_error(what), checkpoint_(std::move(checkpoint)) {}
  const std::filesystem::path& checkpoint() const { return checkpoint_; }

 private:
  std::filesystem::path checkpoint_;
};

class Trainer {
 public:
  explicit Trainer(const RunConfig& cfg);

  // One batch: rollout, gradient, optimiser step, target sync and, when an
  // evaluation boundary is crossed, an evaluation row.
  void TrainBatch();
  // Trains until the episode budget is spent; writes curve.csv and
  // checkpoints when out_dir is set.
  LearningCurve Run();

  // Greedy, threshold channel, running batch-norm statistics.
  EvalResult Evaluate(int episodes);
  EvalResult Evaluate(int episodes, std::uint64_t seed);

  Checkpoint MakeCheckpoint() const;
  void SaveCheckpoint(const std::filesystem::path& path) const;
  void LoadCheckpoint(const std::filesystem::path& path);
  void RestoreCheckpoint(const Checkpoint& ckpt);
  // Run configuration stored in a checkpoint.
  static RunConfig CheckpointConfig(const Checkpoint& ckpt);

  const RunConfig& config() const { return cfg_; }
  const EnvFactory& factory() const { return factory_; }
  Team& team() { return team_; }
  const Team& team() const { return team_; }
  long episodes_done() const { return episodes_; }
  long target_syncs() const { return syncs_; }
  const LearningCurve& curve() const { return curve_; }

 private:
  void EvaluationPoint();

  RunConfig cfg_;
  EnvFactory factory_;
  Team team_;
  std::vector<std::unique_ptr<RmsProp>> optimisers_;
  std::vector<std::unique_ptr<Environment>> envs_;
  long episodes_ = 0;
  long batches_ = 0;
  long syncs_ = 0;
  LearningCurve curve_;
  double loss_sum_ = 0.0;
  long loss_count_ = 0;
  std::vector<double> delivered_;
  std::unique_ptr<Checkpoint> last_good_;
  std::unique_ptr<CsvWriter> csv_;
};

// Expected-value analysis of a two-agent parity game r = (-1)^(s1 + s2 + u2)
// with a one-bit message from agent 1 to agent 2, enumerated exactly.
struct ParityReport {
  double expected_reward_fixed_action[2] = {0.0, 0.0};
  double expected_td_update = 0.0;          // sender's discrete message value
  std::vector<double> dial_gradient_norm;   // one per receiver draw
  std::vector<std::vector<double>> dial_gradient;  // d E[loss] / d sender params
};
ParityReport ToyParityDemo(int receiver_draws = 20, std::uint64_t seed = 1);

}  // namespace commlab

#endif  // COMMLAB_TRAINER_H_
