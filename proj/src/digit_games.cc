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
#include <cstdlib>
#include <functional>
#include <stdexcept>
#include <string>

#include "commlab/env.h"

namespace commlab {
namespace {

int Sign(int exponent) { return (exponent % 2 == 0) ? 1 : -1; }

void CheckTwo(std::span<const int> v, const char* what) {
  if (v.size() != 2) {
    throw std::invalid_argument(std::string(what) + ": expected 2 entries, got " +
                                std::to_string(v.size()));
  }
}

void CheckData(const std::shared_ptr<const DigitDataset>& data) {
  if (!data || data->size() == 0) throw std::invalid_argument("digit game needs samples");
}

}  // namespace

int ColourDigitReward(std::span<const int> actions, std::span<const int> colours,
                      std::span<const int> digits) {
  CheckTwo(actions, "actions");
  CheckTwo(colours, "colours");
  CheckTwo(digits, "digits");
  int total = 0;
  for (int a = 0; a < 2; ++a) {
    const int b = 1 - a;
    total += 2 * Sign(actions[a] + colours[a] + digits[b] % 2) +
             Sign(actions[a] + digits[a] % 2 + colours[b]);
  }
  return total;
}

double ColourDigitOracle(std::span<const int> classes) {
  if (classes.empty()) throw std::invalid_argument("colour-digit oracle: no classes");
  double sum = 0.0;
  int cases = 0;
  for (int c0 = 0; c0 < 2; ++c0) {
    for (int c1 = 0; c1 < 2; ++c1) {
      for (int d0 : classes) {
        for (int d1 : classes) {
          const int colours[2] = {c0, c1};
          const int digits[2] = {d0, d1};
          // Each agent's term depends on its own action only.
          int best = 0;
          for (int a = 0; a < 2; ++a) {
            const int b = 1 - a;
            best += std::abs(2 * Sign(colours[a] + digits[b] % 2) +
                             Sign(digits[a] % 2 + colours[b]));
          }
          sum += best;
          ++cases;
        }
      }
    }
  }
  return sum / cases;
}

ColourDigitGame::ColourDigitGame(std::shared_ptr<const DigitDataset> data)
    : data_(std::move(data)) {
  CheckData(data_);
  spec_.name = "colour_digit";
  spec_.num_agents = 2;
  spec_.num_actions = 2;
  spec_.message_bits = 1;
  spec_.horizon = 2;
  spec_.obs_dim = 2 * data_->side() * data_->side();
  oracle_ = ColourDigitOracle(data_->classes());
}

void ColourDigitGame::Reset(std::uint64_t seed) {
  rng_.seed(seed);
  std::uniform_int_distribution<int> pick(0, static_cast<int>(data_->size()) - 1);
  std::uniform_int_distribution<int> coin(0, 1);
  for (int a = 0; a < 2; ++a) {
    sample_[a] = pick(rng_);
    colour_[a] = coin(rng_);
  }
  t_ = 1;
  done_ = false;
}

Observation ColourDigitGame::Observe(int agent) const {
  if (agent < 0 || agent > 1) throw std::out_of_range("colour-digit agent");
  return {0, ColourWrap(data_->at(sample_[agent]).pixels, colour_[agent])};
}

std::vector<int> ColourDigitGame::Senders(int agent) const {
  if (agent < 0 || agent > 1) throw std::out_of_range("colour-digit agent");
  if (t_ < 2) return {};
  return {1 - agent};
}

bool ColourDigitGame::IsLegal(int agent, int action) const {
  if (agent < 0 || agent > 1) throw std::out_of_range("colour-digit agent");
  return t_ == 1 ? action == 0 : (action == 0 || action == 1);
}

StepResult ColourDigitGame::Step(std::span<const int> actions) {
  if (done_) throw std::logic_error("colour-digit: step after episode end");
  CheckTwo(actions, "colour-digit actions");
  for (int a = 0; a < 2; ++a) {
    if (!IsLegal(a, actions[a])) {
      throw std::invalid_argument("colour-digit: action " + std::to_string(actions[a]) +
                                  " out of range at step " + std::to_string(t_));
    }
  }
  if (t_ == 1) {
    t_ = 2;
    return {{0.0, 0.0}, false};
  }
  const int digits[2] = {digit(0), digit(1)};
  const double r = ColourDigitReward(actions, colour_, digits);
  done_ = true;
  return {{r, r}, true};
}

std::unique_ptr<Environment> ColourDigitGame::Clone() const {
  return std::make_unique<ColourDigitGame>(*this);
}

double MultiStepReward(std::span<const int> guesses, std::span<const int> digits) {
  CheckTwo(guesses, "guesses");
  CheckTwo(digits, "digits");
  double r = 0.0;
  for (int a = 0; a < 2; ++a) {
    if (guesses[a] < 0 || guesses[a] >= MultiStepGame::kGuesses) {
      throw std::invalid_argument("multi-step: guess " + std::to_string(guesses[a]) +
                                  " out of range");
    }
    if (guesses[a] == digits[1 - a]) r += 0.5;
  }
  return r;
}

MultiStepGame::MultiStepGame(std::shared_ptr<const DigitDataset> data, int steps)
    : data_(std::move(data)) {
  CheckData(data_);
  if (steps < 1) throw std::invalid_argument("multi-step: steps must be >= 1");
  spec_.name = "multi_step";
  spec_.num_agents = 2;
  spec_.num_actions = kGuesses;
  spec_.message_bits = 1;
  spec_.horizon = steps;
  spec_.obs_dim = data_->side() * data_->side();
}

void MultiStepGame::Reset(std::uint64_t seed) {
  rng_.seed(seed);
  std::uniform_int_distribution<int> pick(0, static_cast<int>(data_->size()) - 1);
  for (int a = 0; a < 2; ++a) sample_[a] = pick(rng_);
  t_ = 1;
  done_ = false;
}

Observation MultiStepGame::Observe(int agent) const {
  if (agent < 0 || agent > 1) throw std::out_of_range("multi-step agent");
  return {0, data_->at(sample_[agent]).pixels};
}

std::vector<int> MultiStepGame::Senders(int agent) const {
  if (agent < 0 || agent > 1) throw std::out_of_range("multi-step agent");
  if (t_ < 2) return {};
  return {1 - agent};
}

bool MultiStepGame::IsLegal(int agent, int action) const {
  if (agent < 0 || agent > 1) throw std::out_of_range("multi-step agent");
  return action >= 0 && action < kGuesses;
}

StepResult MultiStepGame::Step(std::span<const int> actions) {
  if (done_) throw std::logic_error("multi-step: step after episode end");
  CheckTwo(actions, "multi-step actions");
  for (int a = 0; a < 2; ++a) {
    if (!IsLegal(a, actions[a])) {
      throw std::invalid_argument("multi-step: guess " + std::to_string(actions[a]) +
                                  " out of range");
    }
  }
  if (t_ < spec_.horizon) {
    ++t_;
    return {{0.0, 0.0}, false};
  }
  const int digits[2] = {digit(0), digit(1)};
  const double r = MultiStepReward(actions, digits);
  done_ = true;
  return {{r, r}, true};
}

std::unique_ptr<Environment> MultiStepGame::Clone() const {
  return std::make_unique<MultiStepGame>(*this);
}

double MultiStepProtocolOracle(int num_classes, int bits) {
  if (num_classes < 1 || num_classes > 10) {
    throw std::invalid_argument("protocol oracle: 1..10 classes");
  }
  if (bits < 0 || bits > 4) throw std::invalid_argument("protocol oracle: 0..4 bits");
  const int codes = 1 << bits;
  // Enumerate encoders class -> code up to relabelling of codes (restricted
  // growth strings); a receiver guesses the likeliest class per code.
  std::vector<int> code(num_classes, 0);
  double best = 0.0;
  const double p = 1.0 / num_classes;
  std::function<void(int, int)> rec = [&](int i, int used) {
    if (i == num_classes) {
      std::vector<double> mass(used, 0.0);
      for (int c = 0; c < num_classes; ++c) mass[code[c]] = std::max(mass[code[c]], p);
      double hit = 0.0;
      for (double m : mass) hit += m;
      // Two symmetric directions, 0.5 each.
      best = std::max(best, 2 * 0.5 * hit);
      return;
    }
    for (int k = 0; k <= std::min(used, codes - 1); ++k) {
      code[i] = k;
      rec(i + 1, std::max(used, k + 1));
    }
  };
  rec(0, 0);
  return best;
}

}  // namespace commlab
