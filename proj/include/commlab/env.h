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

// Cooperative, partially observable games with a fixed message channel.
//
// Steps are 1-based. At step t every agent observes, then messages sent by
// Senders(a) at step t-1 arrive, then all agents act and the environment
// advances once. The environment knows nothing about message contents; the
// channel is owned by the trainer.

#ifndef COMMLAB_ENV_H_
#define COMMLAB_ENV_H_

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "commlab/digits.h"
#include "commlab/rng.h"

namespace commlab {

struct EnvSpec {
  std::string name;
  int num_agents = 0;
  int num_actions = 0;
  int message_bits = 0;
  int horizon = 0;
  int obs_vocab = 0;  // > 0: observation is an index in [0, obs_vocab)
  int obs_dim = 0;    // > 0: observation is a dense vector
};

struct Observation {
  int index = 0;
  std::vector<double> dense;
};

struct StepResult {
  std::vector<double> rewards;  // one per agent, all equal
  bool done = false;
  double team_reward() const { return rewards.empty() ? 0.0 : rewards.front(); }
};

class Environment {
 public:
  virtual ~Environment() = default;

  virtual const EnvSpec& spec() const = 0;
  virtual void Reset(std::uint64_t seed) = 0;
  virtual int time() const = 0;
  virtual bool done() const = 0;
  virtual Observation Observe(int agent) const = 0;
  // Agents whose step t-1 message reaches `agent` at the current step.
  virtual std::vector<int> Senders(int agent) const = 0;
  virtual bool IsLegal(int agent, int action) const = 0;
  // Throws std::invalid_argument for illegal actions, std::logic_error once
  // the episode is over.
  virtual StepResult Step(std::span<const int> actions) = 0;
  // Expected episode reward of the best policy that sees the full state.
  virtual double OracleReward() const = 0;
  virtual std::unique_ptr<Environment> Clone() const = 0;
  // Hidden per-agent labels (digits) for protocol analysis; empty if none.
  virtual std::vector<int> Labels() const { return {}; }
};

// ---- Switch riddle --------------------------------------------------------

inline constexpr int kNone = 0;
inline constexpr int kTell = 1;

int SwitchHorizon(int n);  // 4n - 6, at least 1

struct SwitchState {
  int n = 0;
  int t = 0;
  int horizon = 0;
  std::vector<bool> visited;
  int occupant = -1;
  int previous_occupant = -1;
  bool done = false;
};

class SwitchRiddle final : public Environment {
 public:
  explicit SwitchRiddle(int n, int horizon = 0);  // horizon 0: 4n - 6

  const EnvSpec& spec() const override { return spec_; }
  void Reset(std::uint64_t seed) override;
  int time() const override { return state_.t; }
  bool done() const override { return state_.done; }
  Observation Observe(int agent) const override;
  std::vector<int> Senders(int agent) const override;
  bool IsLegal(int agent, int action) const override;
  StepResult Step(std::span<const int> actions) override;
  double OracleReward() const override;
  std::unique_ptr<Environment> Clone() const override;

  const SwitchState& state() const { return state_; }

 private:
  void CheckAgent(int agent) const;

  EnvSpec spec_;
  SwitchState state_;
  Rng rng_;
};

// P(every prisoner has visited by day `horizon`), by dynamic programming
// over (distinct visitors, day).
double SwitchOracleExact(int n, int horizon);

struct MonteCarloEstimate {
  double mean = 0.0;
  double std_error = 0.0;
};

// Simulates the full-state policy (Tell on the day the set completes).
MonteCarloEstimate SwitchOracleMonteCarlo(int n, int horizon, int episodes, Rng& rng);

using BigInt = boost::multiprecision::cpp_int;

// Exponent e in |policy space| = 4^e for horizon T: (3^(T+1) - 3) / 2.
BigInt PolicySpaceExponent(int horizon);

struct PolicySpaceSize {
  int horizon = 0;
  BigInt single_agent;
  BigInt multi_agent;  // n * single_agent
};
PolicySpaceSize PolicySpaceForAgents(int n);

// ---- Digit games ----------------------------------------------------------

// r(a) = 2 (-1)^(u_a + c_a + d_b) + (-1)^(u_a + d_a + c_b), digits by parity.
// Returns r(0) + r(1).
int ColourDigitReward(std::span<const int> actions, std::span<const int> colours,
                      std::span<const int> digits);
// Best expected team reward with full state when digits are drawn uniformly
// from `classes` and colours uniformly from {0, 1}.
double ColourDigitOracle(std::span<const int> classes);

class ColourDigitGame final : public Environment {
 public:
  explicit ColourDigitGame(std::shared_ptr<const DigitDataset> data);

  const EnvSpec& spec() const override { return spec_; }
  void Reset(std::uint64_t seed) override;
  int time() const override { return t_; }
  bool done() const override { return done_; }
  Observation Observe(int agent) const override;
  std::vector<int> Senders(int agent) const override;
  bool IsLegal(int agent, int action) const override;
  StepResult Step(std::span<const int> actions) override;
  double OracleReward() const override { return oracle_; }
  std::unique_ptr<Environment> Clone() const override;

  std::vector<int> Labels() const override { return {digit(0), digit(1)}; }
  int digit(int agent) const { return data_->at(sample_[agent]).label; }
  int colour(int agent) const { return colour_[agent]; }

 private:
  std::shared_ptr<const DigitDataset> data_;
  EnvSpec spec_;
  double oracle_ = 0.0;
  int t_ = 0;
  bool done_ = true;
  int sample_[2] = {0, 0};
  int colour_[2] = {0, 0};
  Rng rng_;
};

// 0.5 for each agent whose guess equals the other agent's digit.
double MultiStepReward(std::span<const int> guesses, std::span<const int> digits);

class MultiStepGame final : public Environment {
 public:
  static constexpr int kGuesses = 10;

  MultiStepGame(std::shared_ptr<const DigitDataset> data, int steps = 5);

  const EnvSpec& spec() const override { return spec_; }
  void Reset(std::uint64_t seed) override;
  int time() const override { return t_; }
  bool done() const override { return done_; }
  Observation Observe(int agent) const override;
  std::vector<int> Senders(int agent) const override;
  bool IsLegal(int agent, int action) const override;
  StepResult Step(std::span<const int> actions) override;
  double OracleReward() const override { return 1.0; }
  std::unique_ptr<Environment> Clone() const override;
  std::vector<int> Labels() const override { return {digit(0), digit(1)}; }

  int digit(int agent) const { return data_->at(sample_[agent]).label; }

 private:
  std::shared_ptr<const DigitDataset> data_;
  EnvSpec spec_;
  int t_ = 0;
  bool done_ = true;
  int sample_[2] = {0, 0};
  Rng rng_;
};

// Best expected multi-step reward of any deterministic protocol in which
// each agent sends `bits` bits about its digit, digits uniform over
// `num_classes` classes. Exhaustive over set partitions of the classes.
double MultiStepProtocolOracle(int num_classes, int bits);

}  // namespace commlab

#endif  // COMMLAB_ENV_H_
