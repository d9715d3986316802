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
#include <stdexcept>
#include <string>

#include "commlab/env.h"

namespace commlab {

int SwitchHorizon(int n) {
  if (n < 1) throw std::invalid_argument("switch riddle needs n >= 1");
  return std::max(4 * n - 6, 1);
}

SwitchRiddle::SwitchRiddle(int n, int horizon) {
  spec_.name = "switch";
  spec_.num_agents = n;
  spec_.num_actions = 2;
  spec_.message_bits = 1;
  spec_.horizon = horizon > 0 ? horizon : SwitchHorizon(n);
  spec_.obs_vocab = 2;
  state_.n = n;
  state_.horizon = spec_.horizon;
  state_.visited.assign(n, false);
  state_.done = true;
}

void SwitchRiddle::Reset(std::uint64_t seed) {
  rng_.seed(seed);
  state_.t = 1;
  state_.done = false;
  state_.visited.assign(state_.n, false);
  state_.previous_occupant = -1;
  state_.occupant = std::uniform_int_distribution<int>(0, state_.n - 1)(rng_);
  state_.visited[state_.occupant] = true;
}

void SwitchRiddle::CheckAgent(int agent) const {
  if (agent < 0 || agent >= state_.n) {
    throw std::out_of_range("agent " + std::to_string(agent) + " of " +
                            std::to_string(state_.n));
  }
}

Observation SwitchRiddle::Observe(int agent) const {
  CheckAgent(agent);
  return {agent == state_.occupant ? 1 : 0, {}};
}

std::vector<int> SwitchRiddle::Senders(int agent) const {
  CheckAgent(agent);
  if (agent != state_.occupant || state_.previous_occupant < 0) return {};
  return {state_.previous_occupant};
}

bool SwitchRiddle::IsLegal(int agent, int action) const {
  CheckAgent(agent);
  if (action == kNone) return true;
  return action == kTell && agent == state_.occupant;
}

StepResult SwitchRiddle::Step(std::span<const int> actions) {
  if (state_.done) throw std::logic_error("switch riddle: step after episode end");
  if (actions.size() != static_cast<std::size_t>(state_.n)) {
    throw std::invalid_argument("switch riddle: expected " + std::to_string(state_.n) +
                                " actions, got " + std::to_string(actions.size()));
  }
  for (int a = 0; a < state_.n; ++a) {
    if (!IsLegal(a, actions[a])) {
      throw std::invalid_argument("switch riddle: agent " + std::to_string(a) +
                                  " cannot take action " + std::to_string(actions[a]) +
                                  (a == state_.occupant ? "" : " outside the room"));
    }
  }
  double reward = 0.0;
  if (actions[state_.occupant] == kTell) {
    const bool all = std::all_of(state_.visited.begin(), state_.visited.end(),
                                 [](bool v) { return v; });
    reward = all ? 1.0 : -1.0;
    state_.done = true;
  } else if (state_.t >= state_.horizon) {
    state_.done = true;
  } else {
    ++state_.t;
    state_.previous_occupant = state_.occupant;
    state_.occupant = std::uniform_int_distribution<int>(0, state_.n - 1)(rng_);
    state_.visited[state_.occupant] = true;
  }
  return {std::vector<double>(state_.n, reward), state_.done};
}

double SwitchRiddle::OracleReward() const {
  return SwitchOracleExact(state_.n, state_.horizon);
}

std::unique_ptr<Environment> SwitchRiddle::Clone() const {
  return std::make_unique<SwitchRiddle>(*this);
}

double SwitchOracleExact(int n, int horizon) {
  if (n < 1 || horizon < 1) throw std::invalid_argument("switch oracle: bad n or horizon");
  // p[k]: probability of k distinct visitors after the current day.
  std::vector<double> p(n + 1, 0.0);
  p[1] = 1.0;
  for (int day = 2; day <= horizon; ++day) {
    std::vector<double> next(n + 1, 0.0);
    next[n] = p[n];
    for (int k = 1; k < n; ++k) {
      const double fresh = static_cast<double>(n - k) / n;
      next[k] += p[k] * (1.0 - fresh);
      next[k + 1] += p[k] * fresh;
    }
    p = std::move(next);
  }
  return p[n];
}

MonteCarloEstimate SwitchOracleMonteCarlo(int n, int horizon, int episodes, Rng& rng) {
  if (episodes < 2) throw std::invalid_argument("switch oracle: need >= 2 episodes");
  SwitchRiddle env(n, horizon);
  double sum = 0.0, sum_sq = 0.0;
  std::vector<int> actions(n, kNone);
  for (int e = 0; e < episodes; ++e) {
    env.Reset(rng());
    double total = 0.0;
    while (!env.done()) {
      const auto& s = env.state();
      std::fill(actions.begin(), actions.end(), kNone);
      if (std::all_of(s.visited.begin(), s.visited.end(), [](bool v) { return v; })) {
        actions[s.occupant] = kTell;
      }
      total += env.Step(actions).team_reward();
    }
    sum += total;
    sum_sq += total * total;
  }
  const double mean = sum / episodes;
  const double var = std::max(0.0, (sum_sq - episodes * mean * mean) / (episodes - 1));
  return {mean, std::sqrt(var / episodes)};
}

BigInt PolicySpaceExponent(int horizon) {
  if (horizon < 1) throw std::invalid_argument("policy space: horizon must be >= 1");
  BigInt p = 1;
  for (int i = 0; i <= horizon; ++i) p *= 3;
  return (p - 3) / 2;
}

PolicySpaceSize PolicySpaceForAgents(int n) {
  PolicySpaceSize s;
  s.horizon = SwitchHorizon(n);
  s.single_agent = PolicySpaceExponent(s.horizon);
  s.multi_agent = s.single_agent * n;
  return s;
}

}  // namespace commlab
