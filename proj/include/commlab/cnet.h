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

// Recurrent agent network with an action head and a message head.
//
//   z  = Task(obs) + MessageMlp(BN(incoming)) + Lookup(prev action)
//        + Lookup(agent) [+ Lookup(own previous message), discrete channel]
//   h1 = GRU(z, h1);  h2 = GRU(h1, h2)
//   out = Linear(ReLU(Linear(h2)))  ->  [Q over actions | message head]
//
// Task is a lookup table for index observations and
// Linear -> BN -> ReLU -> Linear for dense ones. The message head is a
// real vector of `message_bits` entries for the differentiable channel, Q
// values over 2^message_bits messages for the discrete one, and absent
// without communication. Every tensor has one row per parallel episode.

#ifndef COMMLAB_CNET_H_
#define COMMLAB_CNET_H_

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "commlab/autodiff.h"
#include "commlab/dru.h"
#include "commlab/nn.h"
#include "commlab/rng.h"

namespace commlab {

enum class Method { kRial, kDial, kNoComm };

const char* MethodName(Method m);
Method ParseMethod(const std::string& s);

struct CNetConfig {
  Method method = Method::kDial;
  int num_agents = 1;
  int num_actions = 2;
  int message_bits = 1;
  int embed = 32;
  int obs_vocab = 0;
  int obs_dim = 0;

  // Width of the message head: bits, 2^bits or 0.
  int head_width() const;
  // Size of the incoming message vector (0 without communication).
  int incoming_width() const { return method == Method::kNoComm ? 0 : message_bits; }
  int num_messages() const { return 1 << message_bits; }
};

void ValidateCNetConfig(const CNetConfig& cfg);

class CNet {
 public:
  struct Input {
    std::span<const int> obs_index;      // index observations
    const Tensor* obs_dense = nullptr;   // dense observations, B x obs_dim
    Var incoming;                        // B x incoming_width
    std::span<const int> prev_action;    // num_actions means "none yet"
    std::span<const int> prev_message;   // discrete channel; num_messages means none
    int agent = 0;
    Var h1;
    Var h2;
  };

  struct Output {
    Var q;        // B x num_actions
    Var message;  // B x head_width (invalid without communication)
    Var h1;
    Var h2;
  };

  CNet(const CNetConfig& cfg, Rng& rng);
  CNet(const CNet&) = delete;
  CNet& operator=(const CNet&) = delete;

  // Same structure and values.
  std::unique_ptr<CNet> Clone() const;

  Output Forward(Tape& tape, const Input& in, BatchNorm::Mode mode,
                 bool update_running) const;

  // Zero hidden state for `batch` rows.
  Var InitialHidden(Tape& tape, std::size_t batch) const;

  const CNetConfig& config() const { return cfg_; }
  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }

 private:
  CNetConfig cfg_;
  ParamSet params_;
  Embedding obs_table_;
  Linear task1_, task2_;
  BatchNorm task_bn_;
  BatchNorm msg_bn_;
  Linear msg_in_;
  Embedding action_table_;
  Embedding agent_table_;
  Embedding own_msg_table_;
  GruCell gru1_, gru2_;
  Linear out1_, out2_;
};

// Copies online values into the target network.
void SyncTarget(const CNet& online, CNet& target);

// Random legal action with probability epsilon, else the greedy legal one
// (ties to the lowest index). `legal` may be empty, meaning all legal.
int EpsilonGreedy(std::span<const double> q, std::span<const char> legal,
                  double epsilon, Rng& rng);

struct RialChoice {
  int action = 0;
  int message = 0;
};
// Independent epsilon-greedy over the action and message heads.
RialChoice SelectRial(std::span<const double> q_action, std::span<const char> legal,
                      std::span<const double> q_message, double epsilon, Rng& rng);

struct DialChoice {
  int action = 0;
  std::vector<double> message;  // channel output
};
// Epsilon-greedy over actions only; the message goes through the channel.
DialChoice SelectDial(std::span<const double> q_action, std::span<const char> legal,
                      std::span<const double> message, double epsilon,
                      const DruConfig& dru, Rng& rng);

// Binary expansion of a message index, least significant bit first.
std::vector<double> MessageBits(int message, int bits);

}  // namespace commlab

#endif  // COMMLAB_CNET_H_
