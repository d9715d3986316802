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

#include "commlab/trainer.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace commlab {
namespace {

std::vector<int> DefaultClasses(const EnvConfig& cfg) {
  if (!cfg.classes.empty()) return cfg.classes;
  if (cfg.name == "colour_digit") return {0, 1};
  return {0, 1, 2, 3};
}

bool AnyNonZero(const Tensor& t) {
  for (double v : t.data()) {
    if (v != 0.0) return true;
  }
  return false;
}

// Routes the previous step's channel outputs to `agent`.
Var RouteMessages(Tape& tape, const StepRecord& rec, int agent,
                  const std::vector<Var>& prev_sent, std::size_t batch, int bits) {
  Var acc;
  for (std::size_t s = 0; s < prev_sent.size(); ++s) {
    const Tensor& w = rec.route[agent][s];
    if (!AnyNonZero(w)) continue;
    Var term = MulRows(prev_sent[s], tape.Constant(w));
    acc = acc.valid() ? Add(acc, term) : term;
  }
  if (!acc.valid()) acc = tape.Constant(Tensor::Matrix(batch, bits, 0.0));
  return acc;
}

CNetConfig NetConfig(const RunConfig& cfg, const EnvSpec& spec) {
  CNetConfig c;
  c.method = cfg.train.method;
  c.num_agents = spec.num_agents;
  c.num_actions = spec.num_actions;
  c.message_bits = spec.message_bits;
  c.embed = cfg.train.embed;
  c.obs_vocab = spec.obs_vocab;
  c.obs_dim = spec.obs_dim;
  return c;
}

double MaxLegal(const Tensor& q, std::size_t row, const std::vector<char>& legal,
                int num_actions) {
  double best = -std::numeric_limits<double>::infinity();
  for (int u = 0; u < num_actions; ++u) {
    if (legal.empty() || legal[row * num_actions + u]) best = std::max(best, q(row, u));
  }
  return best;
}

}  // namespace

// ---- EnvFactory ------------------------------------------------------------

EnvFactory::EnvFactory(const EnvConfig& cfg) : cfg_(cfg) {
  if (cfg.name != "switch") {
    const std::vector<int> classes = DefaultClasses(cfg);
    DigitDataset raw;
    if (!cfg.mnist_images.empty()) {
      raw = LoadMnist(cfg.mnist_images, cfg.mnist_labels).FilterClasses(classes);
    } else {
      Rng rng(cfg.data_seed);
      raw = SyntheticDigits(classes, cfg.synthetic_per_class, rng);
    }
    if (raw.size() == 0) throw std::invalid_argument("no digit samples for the chosen classes");
    data_ = std::make_shared<const DigitDataset>(raw.Downsample(cfg.downsample));
  }
  auto env = Make();
  spec_ = env->spec();
  oracle_ = env->OracleReward();
}

std::unique_ptr<Environment> EnvFactory::Make() const {
  if (cfg_.name == "switch") return std::make_unique<SwitchRiddle>(cfg_.n, cfg_.horizon);
  if (cfg_.name == "colour_digit") return std::make_unique<ColourDigitGame>(data_);
  if (cfg_.name == "multi_step") return std::make_unique<MultiStepGame>(data_, cfg_.steps);
  throw std::invalid_argument("unknown environment '" + cfg_.name + "'");
}

// ---- Team ------------------------------------------------------------------

Team::Team(const CNetConfig& cfg, bool share, std::uint64_t seed)
    : cfg_(cfg), share_(share) {
  const int nets = share ? 1 : cfg.num_agents;
  for (int i = 0; i < nets; ++i) {
    Rng rng = MakeRng(seed, Stream::kInit, i);
    online_.push_back(std::make_unique<CNet>(cfg, rng));
    target_.push_back(online_.back()->Clone());
  }
}

void Team::SyncTargets() {
  for (std::size_t i = 0; i < online_.size(); ++i) SyncTarget(*online_[i], *target_[i]);
}

std::vector<ParamSet*> Team::online_params() {
  std::vector<ParamSet*> out;
  for (auto& net : online_) out.push_back(&net->params());
  return out;
}

// ---- Rollout ---------------------------------------------------------------

TrajectoryBatch Rollout(std::span<const std::unique_ptr<Environment>> envs,
                        std::span<const std::uint64_t> seeds, Team& team,
                        const RolloutOptions& opts, Rng& explore, Rng& noise) {
  const std::size_t batch = seeds.size();
  if (batch == 0 || envs.size() < batch) {
    throw std::invalid_argument("rollout: need one environment per seed");
  }
  ValidateDruConfig(opts.dru);
  const EnvSpec& spec = envs[0]->spec();
  const CNetConfig& nc = team.config();
  if (spec.num_agents != nc.num_agents || spec.num_actions != nc.num_actions) {
    throw std::invalid_argument("rollout: team does not match environment " + spec.name);
  }
  const int n = spec.num_agents;
  const int num_actions = spec.num_actions;
  const int bits = spec.message_bits;
  const int num_messages = nc.num_messages();

  TrajectoryBatch out;
  out.method = nc.method;
  out.channel = opts.dru.mode;
  out.batch = static_cast<int>(batch);
  out.agents = n;
  out.num_actions = num_actions;
  out.message_bits = bits;
  out.episode_reward.assign(batch, 0.0);
  out.episode_length.assign(batch, 0);
  out.labels.resize(batch);
  for (std::size_t b = 0; b < batch; ++b) {
    envs[b]->Reset(seeds[b]);
    out.labels[b] = envs[b]->Labels();
  }

  Tape tape(false);
  std::vector<Var> h1(n), h2(n);
  for (int a = 0; a < n; ++a) {
    h1[a] = team.online(a).InitialHidden(tape, batch);
    h2[a] = team.online(a).InitialHidden(tape, batch);
  }
  std::vector<std::vector<int>> prev_action(n, std::vector<int>(batch, num_actions));
  std::vector<std::vector<int>> prev_message(n, std::vector<int>(batch, num_messages));
  std::vector<Tensor> prev_sent(n, Tensor::Matrix(batch, bits, 0.0));
  std::vector<char> alive(batch, 1);
  std::vector<int> joint(n);

  for (int t = 1; std::find(alive.begin(), alive.end(), 1) != alive.end(); ++t) {
    StepRecord rec;
    rec.alive = alive;
    rec.obs_index.assign(n, std::vector<int>(batch, 0));
    rec.route.assign(n, std::vector<Tensor>(n, Tensor::Matrix(batch, 1, 0.0)));
    rec.prev_action = prev_action;
    rec.prev_message = prev_message;
    rec.action.assign(n, std::vector<int>(batch, 0));
    rec.message.assign(n, std::vector<int>(batch, 0));
    rec.legal.assign(n, std::vector<char>(batch * num_actions, 0));
    rec.reward.assign(batch, 0.0);
    rec.terminal.assign(batch, 0);

    for (int a = 0; a < n; ++a) {
      if (spec.obs_dim > 0) rec.obs_dense.push_back(Tensor::Matrix(batch, spec.obs_dim, 0.0));
      Tensor incoming = Tensor::Matrix(batch, bits, 0.0);
      for (std::size_t b = 0; b < batch; ++b) {
        if (!alive[b]) {
          rec.legal[a][b * num_actions] = 1;
          continue;
        }
        const Environment& env = *envs[b];
        Observation obs = env.Observe(a);
        if (spec.obs_dim > 0) {
          if (obs.dense.size() != static_cast<std::size_t>(spec.obs_dim)) {
            throw std::logic_error("rollout: observation width mismatch");
          }
          std::copy(obs.dense.begin(), obs.dense.end(),
                    rec.obs_dense[a].data().begin() + b * spec.obs_dim);
        } else {
          rec.obs_index[a][b] = obs.index;
        }
        for (int s : env.Senders(a)) {
          rec.route[a][s](b, 0) += 1.0;
          for (int k = 0; k < bits; ++k) incoming(b, k) += prev_sent[s](b, k);
        }
        for (int u = 0; u < num_actions; ++u) {
          rec.legal[a][b * num_actions + u] = env.IsLegal(a, u) ? 1 : 0;
        }
      }
      rec.incoming.push_back(std::move(incoming));
    }

    std::vector<Tensor> sent(n);
    for (int a = 0; a < n; ++a) {
      const CNet& net = team.online(a);
      CNet::Input in;
      in.obs_index = rec.obs_index[a];
      in.obs_dense = spec.obs_dim > 0 ? &rec.obs_dense[a] : nullptr;
      if (nc.incoming_width() > 0) in.incoming = tape.Constant(rec.incoming[a]);
      in.prev_action = rec.prev_action[a];
      in.prev_message = rec.prev_message[a];
      in.agent = a;
      in.h1 = h1[a];
      in.h2 = h2[a];
      CNet::Output o = net.Forward(tape, in, opts.bn, opts.update_running);
      h1[a] = o.h1;
      h2[a] = o.h2;
      const Tensor& q = o.q.value();
      rec.q.push_back(q);
      rec.message_head.push_back(o.message.valid() ? o.message.value()
                                                   : Tensor::Matrix(batch, bits, 0.0));

      for (std::size_t b = 0; b < batch; ++b) {
        if (!alive[b]) continue;
        std::span<const char> legal(rec.legal[a].data() + b * num_actions, num_actions);
        if (nc.method == Method::kRial) {
          RialChoice c = SelectRial(q.row(b), legal, o.message.value().row(b),
                                    opts.epsilon, explore);
          rec.action[a][b] = c.action;
          rec.message[a][b] = c.message;
        } else {
          rec.action[a][b] = EpsilonGreedy(q.row(b), legal, opts.epsilon, explore);
        }
      }

      Tensor out_msg = Tensor::Matrix(batch, bits, 0.0);
      if (nc.method == Method::kDial) {
        Tensor eps = opts.dru.mode == DruMode::kTrain
                         ? SampleDruNoise(o.message.value(), opts.dru.sigma, noise)
                         : Tensor::Matrix(batch, bits, 0.0);
        Var hat = opts.dru.mode == DruMode::kTrain ? DruTrain(tape, o.message, eps)
                                                   : DruExec(tape, o.message);
        out_msg = hat.value();
        rec.noise.push_back(std::move(eps));
      } else if (nc.method == Method::kRial) {
        for (std::size_t b = 0; b < batch; ++b) {
          const auto code = MessageBits(rec.message[a][b], bits);
          for (int k = 0; k < bits; ++k) out_msg(b, k) = code[k];
        }
      }
      sent[a] = out_msg;
    }

    for (std::size_t b = 0; b < batch; ++b) {
      if (!alive[b]) continue;
      for (int a = 0; a < n; ++a) joint[a] = rec.action[a][b];
      StepResult res;
      try {
        res = envs[b]->Step(joint);
      } catch (const std::exception& err) {
        throw std::runtime_error("episode " + std::to_string(b) + ", step " +
                                 std::to_string(t) + ": " + err.what());
      }
      for (double r : res.rewards) {
        if (r != res.team_reward()) throw std::logic_error("rollout: rewards differ across agents");
      }
      rec.reward[b] = res.team_reward();
      rec.terminal[b] = res.done ? 1 : 0;
      out.episode_reward[b] += res.team_reward();
      out.episode_length[b] = t;
      if (res.done) alive[b] = 0;
    }

    prev_action = rec.action;
    prev_message = rec.message;
    prev_sent = sent;
    rec.sent = std::move(sent);
    out.steps.push_back(std::move(rec));
    if (t > spec.horizon) throw std::logic_error("rollout: episode exceeded its horizon");
  }
  return out;
}

// ---- Loss ------------------------------------------------------------------

Var TrainingLoss(Tape& tape, const TrajectoryBatch& batch, Team& team, double gamma,
                 const TdTargets* fixed, TdTargets* computed) {
  const CNetConfig& nc = team.config();
  if (batch.method != nc.method) {
    throw std::invalid_argument(std::string("training loss: batch recorded with ") +
                                MethodName(batch.method) + ", team uses " +
                                MethodName(nc.method));
  }
  const int n = batch.agents;
  const std::size_t rows = batch.batch;
  const int bits = batch.message_bits;
  const int num_actions = batch.num_actions;
  const std::size_t steps = batch.steps.size();
  const bool dial = nc.method == Method::kDial;
  const bool rial = nc.method == Method::kRial;

  // Online replay on the recording tape.
  std::vector<std::vector<CNet::Output>> outs(steps, std::vector<CNet::Output>(n));
  std::vector<std::vector<Var>> sent(steps, std::vector<Var>(n));
  std::vector<Var> h1(n), h2(n);
  for (int a = 0; a < n; ++a) {
    h1[a] = team.online(a).InitialHidden(tape, rows);
    h2[a] = team.online(a).InitialHidden(tape, rows);
  }
  auto make_input = [&](Tape& tp, std::size_t t, int a, Var incoming, Var hh1, Var hh2) {
    const StepRecord& rec = batch.steps[t];
    CNet::Input in;
    in.obs_index = rec.obs_index[a];
    in.obs_dense = rec.obs_dense.empty() ? nullptr : &rec.obs_dense[a];
    in.incoming = incoming;
    in.prev_action = rec.prev_action[a];
    in.prev_message = rec.prev_message[a];
    in.agent = a;
    in.h1 = hh1;
    in.h2 = hh2;
    (void)tp;
    return in;
  };

  for (std::size_t t = 0; t < steps; ++t) {
    const StepRecord& rec = batch.steps[t];
    for (int a = 0; a < n; ++a) {
      Var incoming;
      if (dial) {
        incoming = t == 0 ? tape.Constant(Tensor::Matrix(rows, bits, 0.0))
                          : RouteMessages(tape, rec, a, sent[t - 1], rows, bits);
      } else if (rial) {
        incoming = tape.Constant(rec.incoming[a]);
      }
      CNet::Output o = team.online(a).Forward(tape, make_input(tape, t, a, incoming, h1[a], h2[a]),
                                              BatchNorm::Mode::kTrain, false);
      h1[a] = o.h1;
      h2[a] = o.h2;
      if (dial) {
        sent[t][a] = batch.channel == DruMode::kTrain ? DruTrain(tape, o.message, rec.noise[a])
                                                      : DruExec(tape, o.message);
      }
      outs[t][a] = o;
    }
  }

  // Bootstrap targets from the target networks, one step ahead. Constants.
  TdTargets own;
  auto& y = own.action;
  auto& y_msg = own.message;
  y.assign(steps, std::vector<std::vector<double>>(n));
  y_msg.assign(steps, std::vector<std::vector<double>>(n));
  Tape frozen(false);
  for (std::size_t t = 0; t < steps && fixed == nullptr; ++t) {
    const StepRecord& rec = batch.steps[t];
    std::vector<Var> frozen_sent(n);
    if (dial) {
      for (int a = 0; a < n; ++a) frozen_sent[a] = frozen.Constant(sent[t][a].value());
    }
    for (int a = 0; a < n; ++a) {
      y[t][a].assign(rows, 0.0);
      y_msg[t][a].assign(rows, 0.0);
      for (std::size_t b = 0; b < rows; ++b) y[t][a][b] = y_msg[t][a][b] = rec.reward[b];
      if (t + 1 >= steps) continue;
      const StepRecord& next = batch.steps[t + 1];
      Var incoming;
      if (dial) {
        incoming = RouteMessages(frozen, next, a, frozen_sent, rows, bits);
      } else if (rial) {
        incoming = frozen.Constant(next.incoming[a]);
      }
      CNet::Output o = team.target(a).Forward(
          frozen,
          make_input(frozen, t + 1, a, incoming, frozen.Constant(outs[t][a].h1.value()),
                     frozen.Constant(outs[t][a].h2.value())),
          BatchNorm::Mode::kTrain, false);
      const Tensor& q_next = o.q.value();
      for (std::size_t b = 0; b < rows; ++b) {
        if (!rec.alive[b] || rec.terminal[b]) continue;
        y[t][a][b] += gamma * MaxLegal(q_next, b, next.legal[a], num_actions);
        if (rial) y_msg[t][a][b] += gamma * MaxLegal(o.message.value(), b, {}, nc.num_messages());
      }
    }
  }

  if (fixed != nullptr) {
    if (fixed->action.size() != steps || (rial && fixed->message.size() != steps)) {
      throw std::invalid_argument("training loss: fixed targets do not match the batch");
    }
    own = *fixed;
  }
  if (computed != nullptr) *computed = own;

  Var total;
  auto add_term = [&](Var q, const std::vector<int>& chosen, const std::vector<double>& target,
                      const std::vector<char>& alive) {
    Tensor y_col = Tensor::Matrix(rows, 1, 0.0);
    Tensor mask = Tensor::Matrix(rows, 1, 0.0);
    for (std::size_t b = 0; b < rows; ++b) {
      y_col(b, 0) = alive[b] ? target[b] : 0.0;
      mask(b, 0) = alive[b] ? 1.0 : 0.0;
    }
    Var diff = MulRows(Sub(Pick(q, chosen), tape.Constant(std::move(y_col))),
                       tape.Constant(std::move(mask)));
    Var term = Sum(Square(diff));
    total = total.valid() ? Add(total, term) : term;
  };
  for (std::size_t t = 0; t < steps; ++t) {
    const StepRecord& rec = batch.steps[t];
    for (int a = 0; a < n; ++a) {
      add_term(outs[t][a].q, rec.action[a], y[t][a], rec.alive);
      if (rial) add_term(outs[t][a].message, rec.message[a], y_msg[t][a], rec.alive);
    }
  }
  return Scale(total, 1.0 / static_cast<double>(rows));
}

Gradient DialBackward(const TrajectoryBatch& batch, Team& team, double gamma, double* loss) {
  if (batch.method == Method::kRial) {
    throw std::invalid_argument("dial backward: batch uses the discrete channel");
  }
  if (batch.method == Method::kDial && batch.channel != DruMode::kTrain) {
    throw std::invalid_argument(
        "dial backward: batch was recorded with the threshold channel, which has no "
        "gradient");
  }
  Tape tape;
  Var l = TrainingLoss(tape, batch, team, gamma);
  if (loss != nullptr) *loss = l.value()(0, 0);
  return tape.Backward(l);
}

Gradient RialBackward(const TrajectoryBatch& batch, Team& team, double gamma, double* loss) {
  if (batch.method != Method::kRial) {
    throw std::invalid_argument("rial backward: batch does not use the discrete channel");
  }
  Tape tape;
  Var l = TrainingLoss(tape, batch, team, gamma);
  if (loss != nullptr) *loss = l.value()(0, 0);
  return tape.Backward(l);
}

double SaturationFraction(std::span<const double> delivered) {
  if (delivered.empty()) return 0.0;
  std::size_t out = 0;
  for (double v : delivered) {
    if (v <= 0.05 || v >= 0.95) ++out;
  }
  return static_cast<double>(out) / static_cast<double>(delivered.size());
}

std::vector<double> DeliveredMessages(const TrajectoryBatch& batch) {
  std::vector<double> out;
  if (batch.method == Method::kNoComm) return out;
  for (std::size_t t = 1; t < batch.steps.size(); ++t) {
    const StepRecord& rec = batch.steps[t];
    const StepRecord& prev = batch.steps[t - 1];
    for (int a = 0; a < batch.agents; ++a) {
      for (int s = 0; s < batch.agents; ++s) {
        for (int b = 0; b < batch.batch; ++b) {
          if (!rec.alive[b] || rec.route[a][s](b, 0) == 0.0) continue;
          for (int k = 0; k < batch.message_bits; ++k) out.push_back(prev.sent[s](b, k));
        }
      }
    }
  }
  return out;
}

// ---- Curve -----------------------------------------------------------------

double LearningCurve::best_norm() const {
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& r : rows) best = std::max(best, r.norm_reward);
  return best;
}

double LearningCurve::final_norm() const {
  return rows.empty() ? std::numeric_limits<double>::quiet_NaN() : rows.back().norm_reward;
}

// ---- Trainer ---------------------------------------------------------------

Trainer::Trainer(const RunConfig& cfg)
    : cfg_((ValidateConfig(cfg), cfg)),
      factory_(cfg.env),
      team_(NetConfig(cfg, factory_.spec()), cfg.train.share, cfg.train.seed) {
  if (!(factory_.oracle() > 0.0)) throw std::logic_error("oracle reward must be positive");
  for (int i = 0; i < team_.num_nets(); ++i) {
    optimisers_.push_back(std::make_unique<RmsProp>(team_.online_net(i).params(), cfg.train.rms));
  }
  for (int i = 0; i < cfg.train.batch; ++i) envs_.push_back(factory_.Make());
  last_good_ = std::make_unique<Checkpoint>(MakeCheckpoint());
}

EvalResult Trainer::Evaluate(int episodes) {
  return Evaluate(episodes, StreamSeed(cfg_.train.seed, Stream::kEval, 0));
}

EvalResult Trainer::Evaluate(int episodes, std::uint64_t seed) {
  if (episodes < 2) throw std::invalid_argument("evaluate: need >= 2 episodes");
  std::vector<std::unique_ptr<Environment>> envs;
  std::vector<std::uint64_t> seeds;
  for (int i = 0; i < episodes; ++i) {
    envs.push_back(factory_.Make());
    seeds.push_back(StreamSeed(seed, Stream::kEval, i));
  }
  RolloutOptions opts;
  opts.epsilon = 0.0;
  opts.dru = {cfg_.train.sigma, DruMode::kExec};
  opts.bn = BatchNorm::Mode::kEval;
  opts.update_running = false;
  Rng unused(0);
  TrajectoryBatch tb = Rollout(envs, seeds, team_, opts, unused, unused);
  double sum = 0.0, sq = 0.0;
  for (double r : tb.episode_reward) {
    sum += r;
    sq += r * r;
  }
  EvalResult res;
  res.mean = sum / episodes;
  res.std_error = std::sqrt(std::max(0.0, (sq - episodes * res.mean * res.mean) /
                                              (episodes - 1)) / episodes);
  res.normalized = res.mean / factory_.oracle();
  return res;
}

void Trainer::TrainBatch() {
  const TrainConfig& tc = cfg_.train;
  std::vector<std::uint64_t> seeds(tc.batch);
  for (int i = 0; i < tc.batch; ++i) {
    seeds[i] = StreamSeed(tc.seed, Stream::kEnv, static_cast<std::uint64_t>(batches_) * tc.batch + i);
  }
  Rng explore = MakeRng(tc.seed, Stream::kExplore, batches_);
  Rng noise = MakeRng(tc.seed, Stream::kNoise, batches_);
  RolloutOptions opts;
  opts.epsilon = tc.epsilon;
  opts.dru = {tc.sigma, DruMode::kTrain};

  double loss = 0.0;
  try {
    TrajectoryBatch tb = Rollout(envs_, seeds, team_, opts, explore, noise);
    Gradient grad = tc.method == Method::kRial ? RialBackward(tb, team_, tc.gamma, &loss)
                                               : DialBackward(tb, team_, tc.gamma, &loss);
    if (!std::isfinite(loss)) throw std::domain_error("non-finite loss");
    for (auto& opt : optimisers_) opt->Step(grad);
    const auto d = DeliveredMessages(tb);
    delivered_.insert(delivered_.end(), d.begin(), d.end());
  } catch (const std::domain_error& err) {
    RestoreCheckpoint(*last_good_);
    std::filesystem::path where;
    if (!tc.out_dir.empty()) {
      where = std::filesystem::path(tc.out_dir) / "checkpoint_last_good.txt";
      last_good_->Save(where);
    }
    throw TrainingDiverged(std::string("training diverged after ") + std::to_string(episodes_) +
                               " episodes: " + err.what(),
                           where);
  }
  loss_sum_ += loss;
  ++loss_count_;

  const long before = episodes_;
  episodes_ += tc.episode_unit == EpisodeUnit::kBatch ? 1 : tc.batch;
  ++batches_;
  if (episodes_ / tc.target_reset > before / tc.target_reset) {
    team_.SyncTargets();
    ++syncs_;
  }
  if (episodes_ / tc.eval_every > before / tc.eval_every) EvaluationPoint();
  if (csv_ && tc.checkpoint_every > 0 &&
      episodes_ / tc.checkpoint_every > before / tc.checkpoint_every) {
    SaveCheckpoint(std::filesystem::path(tc.out_dir) /
                   ("checkpoint_" + std::to_string(episodes_) + ".txt"));
  }
}

void Trainer::EvaluationPoint() {
  const EvalResult ev = Evaluate(cfg_.train.eval_episodes);
  CurveRow row;
  row.episode = episodes_;
  row.raw_reward = ev.mean;
  row.norm_reward = ev.normalized;
  row.loss = loss_count_ > 0 ? loss_sum_ / loss_count_ : 0.0;
  row.saturation = SaturationFraction(delivered_);
  loss_sum_ = 0.0;
  loss_count_ = 0;
  delivered_.clear();
  curve_.rows.push_back(row);
  *last_good_ = MakeCheckpoint();
  if (csv_) {
    csv_->Row({std::to_string(row.episode), FormatDouble(row.raw_reward),
               FormatDouble(row.norm_reward), FormatDouble(row.loss),
               FormatDouble(row.saturation)});
    last_good_->Save(std::filesystem::path(cfg_.train.out_dir) / "checkpoint_latest.txt");
  }
}

LearningCurve Trainer::Run() {
  const TrainConfig& tc = cfg_.train;
  if (!tc.out_dir.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(tc.out_dir, ec);
    if (ec) throw std::runtime_error("cannot create out dir " + tc.out_dir + ": " + ec.message());
    csv_ = std::make_unique<CsvWriter>(
        std::filesystem::path(tc.out_dir) / "curve.csv", RunMetadata(cfg_),
        std::vector<std::string>{"episode", "raw_reward", "norm_reward", "loss",
                                 "saturation_frac"});
  }
  if (curve_.rows.empty()) EvaluationPoint();
  while (episodes_ < tc.episodes) TrainBatch();
  if (csv_) {
    SaveCheckpoint(std::filesystem::path(tc.out_dir) / "checkpoint_latest.txt");
    csv_.reset();
  }
  return curve_;
}

Checkpoint Trainer::MakeCheckpoint() const {
  Checkpoint c;
  for (const auto& [k, v] : ConfigEntries(cfg_)) c.meta["config." + k] = v;
  c.meta["version"] = kVersion;
  c.meta["episodes"] = std::to_string(episodes_);
  c.meta["batches"] = std::to_string(batches_);
  c.meta["target_syncs"] = std::to_string(syncs_);
  for (int i = 0; i < team_.num_nets(); ++i) {
    const std::string net = "net" + std::to_string(i);
    auto& self = const_cast<Team&>(team_);
    c.Put(net + "/online", self.online_net(i).params());
    c.Put(net + "/target", self.target_net(i).params());
    const ParamSet& ps = self.online_net(i).params();
    const auto& acc = optimisers_[i]->accumulators();
    for (std::size_t k = 0; k < ps.size(); ++k) {
      if (ps.at(k).trainable) c.tensors[net + "/rms/" + ps.at(k).name] = acc[k];
    }
  }
  return c;
}

void Trainer::SaveCheckpoint(const std::filesystem::path& path) const {
  MakeCheckpoint().Save(path);
}

void Trainer::RestoreCheckpoint(const Checkpoint& c) {
  for (int i = 0; i < team_.num_nets(); ++i) {
    const std::string net = "net" + std::to_string(i);
    c.Get(net + "/online", team_.online_net(i).params());
    c.Get(net + "/target", team_.target_net(i).params());
    const ParamSet& ps = team_.online_net(i).params();
    auto& acc = optimisers_[i]->accumulators();
    for (std::size_t k = 0; k < ps.size(); ++k) {
      if (!ps.at(k).trainable) continue;
      auto it = c.tensors.find(net + "/rms/" + ps.at(k).name);
      if (it == c.tensors.end()) throw std::runtime_error("checkpoint lacks optimiser state");
      acc[k] = it->second;
    }
  }
  auto number = [&](const char* key) {
    auto it = c.meta.find(key);
    return it == c.meta.end() ? 0L : std::stol(it->second);
  };
  episodes_ = number("episodes");
  batches_ = number("batches");
  syncs_ = number("target_syncs");
}

void Trainer::LoadCheckpoint(const std::filesystem::path& path) {
  RestoreCheckpoint(Checkpoint::Load(path));
}

RunConfig Trainer::CheckpointConfig(const Checkpoint& ckpt) {
  RunConfig cfg;
  for (const auto& [k, v] : ckpt.meta) {
    if (k.rfind("config.", 0) == 0) ApplySetting(cfg, k.substr(7), v);
  }
  ValidateConfig(cfg);
  return cfg;
}

// ---- Parity demo -------------------------------------------------------------

ParityReport ToyParityDemo(int receiver_draws, std::uint64_t seed) {
  ParityReport rep;
  auto reward = [](int s1, int s2, int u2) { return ((s1 + s2 + u2) % 2 == 0) ? 1.0 : -1.0; };
  for (int u2 = 0; u2 < 2; ++u2) {
    double sum = 0.0;
    for (int s1 = 0; s1 < 2; ++s1) {
      for (int s2 = 0; s2 < 2; ++s2) sum += reward(s1, s2, u2);
    }
    rep.expected_reward_fixed_action[u2] = sum / 4.0;
  }
  // Discrete sender: Q(s1, m) starts at 0 and regresses on the reward, which
  // the message cannot influence before the receiver has learned anything.
  double worst = 0.0;
  for (int s1 = 0; s1 < 2; ++s1) {
    for (int m = 0; m < 2; ++m) {
      double expected_r = 0.0;
      for (int s2 = 0; s2 < 2; ++s2) {
        for (int u2 = 0; u2 < 2; ++u2) expected_r += 0.25 * reward(s1, s2, u2);
      }
      const double q = 0.0;
      const double td = expected_r - q;
      if (std::abs(td) > std::abs(worst)) worst = td;
    }
  }
  rep.expected_td_update = worst;

  // Differentiable sender: m(s1) = theta[s1] (starting at 0), channel
  // Logistic(m), receiver Q(s2, m_hat, u2) = w[s2][u2] (m_hat - 1/2), so every
  // Q starts at 0. Expected loss over uniform (s1, s2, u2) of (Q - r)^2 / 2.
  for (int draw = 0; draw < receiver_draws; ++draw) {
    Rng rng = MakeRng(seed, Stream::kAnalysis, draw);
    std::normal_distribution<double> normal(0.0, 1.0);
    ParamSet params;
    Parameter& theta = params.Add("sender", Tensor::Matrix(1, 2, 0.0));
    Tensor w_init = Tensor::Matrix(2, 2);
    for (double& v : w_init.data()) v = normal(rng);
    Parameter& w = params.Add("receiver", w_init);
    Tape tape;
    Var th = tape.Param(theta);
    Var wv = tape.Param(w);
    Var total;
    for (int s1 = 0; s1 < 2; ++s1) {
      const int s1_idx[1] = {s1};
      Var m_hat = Sigmoid(Pick(th, s1_idx));
      for (int s2 = 0; s2 < 2; ++s2) {
        const int s2_idx[1] = {s2};
        Var w_row = GatherRows(wv, s2_idx);
        for (int u2 = 0; u2 < 2; ++u2) {
          const int u2_idx[1] = {u2};
          Var q = Mul(Pick(w_row, u2_idx), Affine(m_hat, 1.0, -0.5));
          Var err = Affine(q, 1.0, -reward(s1, s2, u2));
          Var term = Scale(Square(err), 0.5 / 8.0);
          total = total.valid() ? Add(total, term) : term;
        }
      }
    }
    Gradient g = tape.Backward(total);
    const Tensor* gt = g.Find(theta);
    std::vector<double> grad(gt->data().begin(), gt->data().end());
    double norm = 0.0;
    for (double v : grad) norm += v * v;
    rep.dial_gradient.push_back(grad);
    rep.dial_gradient_norm.push_back(std::sqrt(norm));
  }
  return rep;
}

}  // namespace commlab
