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

#include "commlab/cnet.h"

#include <stdexcept>
#include <string>

namespace commlab {

const char* MethodName(Method m) {
  switch (m) {
    case Method::kRial: return "rial";
    case Method::kDial: return "dial";
    case Method::kNoComm: return "nocomm";
  }
  return "?";
}

Method ParseMethod(const std::string& s) {
  if (s == "rial") return Method::kRial;
  if (s == "dial") return Method::kDial;
  if (s == "nocomm") return Method::kNoComm;
  throw std::invalid_argument("unknown method '" + s + "' (rial, dial, nocomm)");
}

int CNetConfig::head_width() const {
  switch (method) {
    case Method::kRial: return num_messages();
    case Method::kDial: return message_bits;
    case Method::kNoComm: return 0;
  }
  return 0;
}

void ValidateCNetConfig(const CNetConfig& cfg) {
  if (cfg.num_agents < 1) throw std::invalid_argument("cnet: num_agents must be >= 1");
  if (cfg.num_actions < 1) throw std::invalid_argument("cnet: num_actions must be >= 1");
  if (cfg.embed < 1) throw std::invalid_argument("cnet: embed must be >= 1");
  if (cfg.method != Method::kNoComm && (cfg.message_bits < 1 || cfg.message_bits > 16)) {
    throw std::invalid_argument("cnet: message_bits must be in 1..16");
  }
  if ((cfg.obs_vocab > 0) == (cfg.obs_dim > 0)) {
    throw std::invalid_argument("cnet: exactly one of obs_vocab / obs_dim must be set");
  }
}

CNet::CNet(const CNetConfig& cfg, Rng& rng) : cfg_(cfg) {
  ValidateCNetConfig(cfg);
  const std::size_t e = cfg.embed;
  if (cfg.obs_vocab > 0) {
    obs_table_ = Embedding::Create(params_, "task/table", cfg.obs_vocab, e, rng);
  } else {
    task1_ = Linear::Create(params_, "task/fc1", cfg.obs_dim, e, rng);
    task_bn_ = BatchNorm::Create(params_, "task/bn", e);
    task2_ = Linear::Create(params_, "task/fc2", e, e, rng);
  }
  if (cfg.incoming_width() > 0) {
    msg_bn_ = BatchNorm::Create(params_, "message/bn", cfg.incoming_width());
    msg_in_ = Linear::Create(params_, "message/fc", cfg.incoming_width(), e, rng);
  }
  action_table_ = Embedding::Create(params_, "prev_action", cfg.num_actions + 1, e, rng);
  agent_table_ = Embedding::Create(params_, "agent", cfg.num_agents, e, rng);
  if (cfg.method == Method::kRial) {
    own_msg_table_ =
        Embedding::Create(params_, "prev_message", cfg.num_messages() + 1, e, rng);
  }
  gru1_ = GruCell::Create(params_, "gru1", e, e, rng);
  gru2_ = GruCell::Create(params_, "gru2", e, e, rng);
  out1_ = Linear::Create(params_, "out/fc1", e, e, rng);
  out2_ = Linear::Create(params_, "out/fc2", e, cfg.num_actions + cfg.head_width(), rng);
}

std::unique_ptr<CNet> CNet::Clone() const {
  Rng scratch(0);
  auto copy = std::make_unique<CNet>(cfg_, scratch);
  copy->params_.CopyValuesFrom(params_);
  return copy;
}

Var CNet::InitialHidden(Tape& tape, std::size_t batch) const {
  return tape.Constant(Tensor::Matrix(batch, cfg_.embed, 0.0));
}

CNet::Output CNet::Forward(Tape& tape, const Input& in, BatchNorm::Mode mode,
                           bool update_running) const {
  if (!in.h1.valid() || !in.h2.valid()) {
    throw std::invalid_argument("cnet: hidden state not initialised");
  }
  const std::size_t batch = in.prev_action.size();
  if (batch == 0) throw std::invalid_argument("cnet: empty batch");
  auto check_rows = [&](std::size_t rows, const char* what) {
    if (rows != batch) {
      throw std::invalid_argument(std::string("cnet: ") + what + " has " +
                                  std::to_string(rows) + " rows, batch is " +
                                  std::to_string(batch));
    }
  };
  if (in.agent < 0 || in.agent >= cfg_.num_agents) {
    throw std::out_of_range("cnet: agent index " + std::to_string(in.agent));
  }

  Var z;
  if (cfg_.obs_vocab > 0) {
    check_rows(in.obs_index.size(), "observation");
    z = obs_table_.Forward(tape, in.obs_index);
  } else {
    if (in.obs_dense == nullptr) throw std::invalid_argument("cnet: missing dense observation");
    check_rows(in.obs_dense->rows(), "observation");
    Var x = tape.Constant(*in.obs_dense);
    Var hidden = Relu(task_bn_.Forward(tape, task1_.Forward(tape, x), mode, update_running));
    z = task2_.Forward(tape, hidden);
  }
  if (cfg_.incoming_width() > 0) {
    if (!in.incoming.valid()) throw std::invalid_argument("cnet: missing incoming message");
    check_rows(in.incoming.rows(), "incoming message");
    Var normed = msg_bn_.Forward(tape, in.incoming, mode, update_running);
    z = Add(z, Relu(msg_in_.Forward(tape, normed)));
  }
  z = Add(z, action_table_.Forward(tape, in.prev_action));
  const std::vector<int> agent(batch, in.agent);
  z = Add(z, agent_table_.Forward(tape, agent));
  if (cfg_.method == Method::kRial) {
    check_rows(in.prev_message.size(), "previous message");
    z = Add(z, own_msg_table_.Forward(tape, in.prev_message));
  }

  Output out;
  out.h1 = gru1_.Step(tape, z, in.h1);
  out.h2 = gru2_.Step(tape, out.h1, in.h2);
  Var head = out2_.Forward(tape, Relu(out1_.Forward(tape, out.h2)));
  out.q = SliceCols(head, 0, cfg_.num_actions);
  if (cfg_.head_width() > 0) {
    out.message = SliceCols(head, cfg_.num_actions, cfg_.head_width());
  }
  return out;
}

void SyncTarget(const CNet& online, CNet& target) {
  target.params().CopyValuesFrom(online.params());
}

int EpsilonGreedy(std::span<const double> q, std::span<const char> legal,
                  double epsilon, Rng& rng) {
  if (q.empty()) throw std::invalid_argument("epsilon-greedy: empty action set");
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) {
    throw std::invalid_argument("epsilon-greedy: epsilon must be in [0, 1]");
  }
  if (!legal.empty() && legal.size() != q.size()) {
    throw std::invalid_argument("epsilon-greedy: legal mask size mismatch");
  }
  auto ok = [&](std::size_t i) { return legal.empty() || legal[i]; };
  std::vector<int> allowed;
  for (std::size_t i = 0; i < q.size(); ++i) {
    if (ok(i)) allowed.push_back(static_cast<int>(i));
  }
  if (allowed.empty()) throw std::invalid_argument("epsilon-greedy: no legal action");
  // The uniform draw is consumed only when exploring is possible, so that
  // epsilon = 0 leaves the stream untouched.
  if (epsilon > 0.0 && std::uniform_real_distribution<double>(0.0, 1.0)(rng) < epsilon) {
    return allowed[std::uniform_int_distribution<std::size_t>(0, allowed.size() - 1)(rng)];
  }
  int best = allowed.front();
  for (int i : allowed) {
    if (q[i] > q[best]) best = i;
  }
  return best;
}

RialChoice SelectRial(std::span<const double> q_action, std::span<const char> legal,
                      std::span<const double> q_message, double epsilon, Rng& rng) {
  RialChoice c;
  c.action = EpsilonGreedy(q_action, legal, epsilon, rng);
  c.message = EpsilonGreedy(q_message, {}, epsilon, rng);
  return c;
}

DialChoice SelectDial(std::span<const double> q_action, std::span<const char> legal,
                      std::span<const double> message, double epsilon,
                      const DruConfig& dru, Rng& rng) {
  DialChoice c;
  c.action = EpsilonGreedy(q_action, legal, epsilon, rng);
  c.message = Dru(message, dru, rng);
  return c;
}

std::vector<double> MessageBits(int message, int bits) {
  if (message < 0 || (bits < 31 && message >= (1 << bits))) {
    throw std::out_of_range("message " + std::to_string(message) + " does not fit " +
                            std::to_string(bits) + " bits");
  }
  std::vector<double> out(bits);
  for (int b = 0; b < bits; ++b) out[b] = (message >> b) & 1;
  return out;
}

}  // namespace commlab
