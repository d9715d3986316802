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

#include "commlab/analysis.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

#include "commlab/grad_check.h"

namespace commlab {

TrajectoryBatch SampleEpisodes(Team& team, const EnvFactory& factory, int episodes,
                               std::uint64_t seed, DruMode channel, double sigma) {
  if (episodes < 2) throw std::invalid_argument("analysis: need >= 2 episodes");
  std::vector<std::unique_ptr<Environment>> envs;
  std::vector<std::uint64_t> seeds;
  for (int i = 0; i < episodes; ++i) {
    envs.push_back(factory.Make());
    seeds.push_back(StreamSeed(seed, Stream::kAnalysis, i));
  }
  RolloutOptions opts;
  opts.epsilon = 0.0;
  opts.dru = {sigma, channel};
  opts.bn = BatchNorm::Mode::kEval;
  opts.update_running = false;
  Rng explore(0);
  Rng noise = MakeRng(seed, Stream::kNoise, 0);
  return Rollout(envs, seeds, team, opts, explore, noise);
}

// ---- Switch protocol --------------------------------------------------------

SwitchPolicyTable SwitchProtocol::table() const {
  SwitchPolicyTable t;
  for (const auto& r : rows) t[{r.day, r.bit_seen, r.visited_before}] = {r.action, r.bit};
  return t;
}

SwitchProtocol ExtractSwitchProtocol(const TrajectoryBatch& batch, int n, int horizon) {
  if (batch.agents != n) throw std::invalid_argument("protocol: agent count mismatch");
  std::map<SwitchKey, std::array<long, 4>> counts;
  std::vector<std::vector<char>> seen(batch.batch, std::vector<char>(n, 0));
  for (std::size_t t = 0; t < batch.steps.size(); ++t) {
    const StepRecord& rec = batch.steps[t];
    for (int b = 0; b < batch.batch; ++b) {
      if (!rec.alive[b]) continue;
      int occupant = -1;
      for (int a = 0; a < n; ++a) {
        if (rec.obs_index[a][b] == 1) occupant = a;
      }
      if (occupant < 0) throw std::logic_error("protocol: no occupant in a live episode");
      const int bit_seen =
          batch.message_bits > 0 && rec.incoming[occupant](b, 0) > 0.5 ? 1 : 0;
      const int bit_out = batch.message_bits > 0 && rec.sent[occupant](b, 0) > 0.5 ? 1 : 0;
      const SwitchKey key{static_cast<int>(t) + 1, bit_seen, seen[b][occupant]};
      counts[key][rec.action[occupant][b] * 2 + bit_out] += 1;
      seen[b][occupant] = 1;
    }
  }

  SwitchProtocol p;
  p.n = n;
  p.horizon = horizon;
  p.episodes = batch.batch;
  long total = 0;
  long agree = 0;
  for (const auto& [key, c] : counts) {
    SwitchProtocolRow row;
    std::tie(row.day, row.bit_seen, row.visited_before) = key;
    for (long v : c) row.samples += v;
    int best = 0;
    for (int k = 0; k < 4; ++k) {
      row.freq[k / 2][k % 2] = static_cast<double>(c[k]) / row.samples;
      if (c[k] > c[best]) best = k;
    }
    row.action = best / 2;
    row.bit = best % 2;
    total += row.samples;
    agree += c[best];
    p.rows.push_back(row);
  }
  p.consistency = total > 0 ? static_cast<double>(agree) / total : 0.0;
  p.replay_reward = ReplaySwitchTable(p.table(), n, horizon);
  p.replay_normalized = p.replay_reward / SwitchOracleExact(n, horizon);
  p.optimal = p.replay_normalized >= kOptimalThreshold;
  p.low_consistency = p.consistency < kConsistencyThreshold;
  return p;
}

double ReplaySwitchTable(const SwitchPolicyTable& table, int n, int horizon) {
  if (n < 1 || n > 20) throw std::invalid_argument("replay: n must be in [1, 20]");
  if (horizon < 1) throw std::invalid_argument("replay: horizon must be >= 1");
  const std::size_t masks = std::size_t{1} << n;
  const std::uint32_t all = static_cast<std::uint32_t>(masks - 1);
  // prob[mask * 2 + bit] of reaching the start of the day in that state.
  std::vector<double> prob(masks * 2, 0.0), next(masks * 2, 0.0);
  prob[0] = 1.0;
  double expected = 0.0;
  for (int day = 1; day <= horizon; ++day) {
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t s = 0; s < prob.size(); ++s) {
      if (prob[s] == 0.0) continue;
      const std::uint32_t mask = static_cast<std::uint32_t>(s / 2);
      const int bit = static_cast<int>(s % 2);
      for (int i = 0; i < n; ++i) {
        const double p = prob[s] / n;
        const int before = (mask >> i) & 1u;
        int action = kNone;
        int written = bit;
        auto it = table.find({day, bit, before});
        if (it != table.end()) std::tie(action, written) = it->second;
        const std::uint32_t after = mask | (1u << i);
        if (action == kTell) {
          expected += p * (after == all ? 1.0 : -1.0);
        } else {
          next[after * 2 + written] += p;
        }
      }
    }
    prob.swap(next);
  }
  return expected;
}

void WriteSwitchProtocolCsv(const std::filesystem::path& path,
                            const std::vector<std::pair<std::string, std::string>>& meta,
                            const SwitchProtocol& p) {
  auto m = meta;
  m.emplace_back("episodes", std::to_string(p.episodes));
  m.emplace_back("consistency", FormatDouble(p.consistency));
  m.emplace_back("replay_normalized", FormatDouble(p.replay_normalized));
  m.emplace_back("optimal", p.optimal ? "1" : "0");
  m.emplace_back("low_consistency", p.low_consistency ? "1" : "0");
  CsvWriter csv(path, m,
                {"day", "bit_seen", "visited_before", "samples", "freq_none_off",
                 "freq_none_on", "freq_tell_off", "freq_tell_on", "action", "bit"});
  for (const auto& r : p.rows) {
    csv.Row({std::to_string(r.day), std::to_string(r.bit_seen),
             std::to_string(r.visited_before), std::to_string(r.samples),
             FormatDouble(r.freq[0][0]), FormatDouble(r.freq[0][1]),
             FormatDouble(r.freq[1][0]), FormatDouble(r.freq[1][1]),
             r.action == kTell ? "tell" : "none", std::to_string(r.bit)});
  }
}

// ---- Digit codes ------------------------------------------------------------

DigitCodeTable ExtractDigitCodes(const TrajectoryBatch& batch, int agent) {
  if (agent < 0 || agent >= batch.agents) throw std::invalid_argument("codes: bad agent");
  if (batch.labels.size() != static_cast<std::size_t>(batch.batch)) {
    throw std::invalid_argument("codes: batch has no digit labels");
  }
  std::map<int, std::map<std::string, long>> counts;
  for (int b = 0; b < batch.batch; ++b) {
    if (batch.labels[b].size() <= static_cast<std::size_t>(agent)) {
      throw std::invalid_argument("codes: environment has no digit labels");
    }
    std::string code;
    for (std::size_t t = 0; t + 1 < batch.steps.size(); ++t) {
      const StepRecord& next = batch.steps[t + 1];
      bool delivered = false;
      for (int r = 0; r < batch.agents; ++r) {
        if (next.alive[b] && next.route[r][agent](b, 0) != 0.0) delivered = true;
      }
      if (!delivered) continue;
      for (int k = 0; k < batch.message_bits; ++k) {
        code += batch.steps[t].sent[agent](b, k) > 0.5 ? '1' : '0';
      }
    }
    counts[batch.labels[b][agent]][code] += 1;
  }

  DigitCodeTable table;
  table.agent = agent;
  long total = 0;
  long agree = 0;
  std::set<std::string> codes;
  for (const auto& [digit, by_code] : counts) {
    DigitCodeRow row;
    row.digit = digit;
    long best = -1;
    for (const auto& [code, c] : by_code) {
      row.samples += c;
      if (c > best) {
        best = c;
        row.code = code;
      }
    }
    row.consistency = static_cast<double>(best) / row.samples;
    total += row.samples;
    agree += best;
    codes.insert(row.code);
    table.rows.push_back(row);
  }
  table.consistency = total > 0 ? static_cast<double>(agree) / total : 0.0;
  table.injective = codes.size() == table.rows.size();
  return table;
}

void WriteDigitCodesCsv(const std::filesystem::path& path,
                        const std::vector<std::pair<std::string, std::string>>& meta,
                        const DigitCodeTable& t) {
  auto m = meta;
  m.emplace_back("agent", std::to_string(t.agent));
  m.emplace_back("consistency", FormatDouble(t.consistency));
  m.emplace_back("injective", t.injective ? "1" : "0");
  CsvWriter csv(path, m, {"digit", "code", "samples", "freq"});
  for (const auto& r : t.rows) {
    csv.Row({std::to_string(r.digit), r.code.empty() ? "-" : r.code,
             std::to_string(r.samples), FormatDouble(r.consistency)});
  }
}

// ---- Histograms -------------------------------------------------------------

Histogram MakeHistogram(std::span<const double> values, double lo, double hi, int bins) {
  if (bins < 1) throw std::invalid_argument("histogram: bins must be >= 1");
  if (!(hi > lo)) throw std::invalid_argument("histogram: need lo < hi");
  Histogram h;
  h.lo = lo;
  h.hi = hi;
  h.mass.assign(bins, 0.0);
  h.samples = values.size();
  if (values.empty()) return h;
  const double width = (hi - lo) / bins;
  for (double v : values) {
    int k = static_cast<int>(std::floor((v - lo) / width));
    h.mass[std::clamp(k, 0, bins - 1)] += 1.0;
  }
  for (double& m : h.mass) m /= static_cast<double>(values.size());
  return h;
}

ActivationReport ActivationHistogram(Team& team, const EnvFactory& factory, double sigma,
                                     int episodes, std::uint64_t seed) {
  if (team.config().method != Method::kDial) {
    throw std::invalid_argument("histogram: needs the differentiable channel");
  }
  TrajectoryBatch tb = SampleEpisodes(team, factory, episodes, seed, DruMode::kTrain, sigma);
  std::vector<double> out, logits;
  for (std::size_t t = 1; t < tb.steps.size(); ++t) {
    const StepRecord& rec = tb.steps[t];
    const StepRecord& prev = tb.steps[t - 1];
    for (int a = 0; a < tb.agents; ++a) {
      for (int s = 0; s < tb.agents; ++s) {
        for (int b = 0; b < tb.batch; ++b) {
          if (!rec.alive[b] || rec.route[a][s](b, 0) == 0.0) continue;
          for (int k = 0; k < tb.message_bits; ++k) {
            out.push_back(prev.sent[s](b, k));
            logits.push_back(prev.message_head[s](b, k));
          }
        }
      }
    }
  }
  ActivationReport rep;
  rep.message = MakeHistogram(out, 0.0, 1.0);
  double lo = -1.0, hi = 1.0;
  if (!logits.empty()) {
    lo = *std::min_element(logits.begin(), logits.end());
    hi = *std::max_element(logits.begin(), logits.end());
    if (!(hi > lo)) {
      lo -= 0.5;
      hi += 0.5;
    }
  }
  rep.logit = MakeHistogram(logits, lo, hi);
  rep.saturation = SaturationFraction(out);
  return rep;
}

void WriteHistogramCsv(const std::filesystem::path& path,
                       const std::vector<std::pair<std::string, std::string>>& meta,
                       const Histogram& h) {
  auto m = meta;
  m.emplace_back("samples", std::to_string(h.samples));
  CsvWriter csv(path, m, {"bin_lo", "bin_hi", "mass"});
  const double width = (h.hi - h.lo) / static_cast<double>(h.mass.size());
  for (std::size_t k = 0; k < h.mass.size(); ++k) {
    csv.Row({FormatDouble(h.lo + width * k), FormatDouble(h.lo + width * (k + 1)),
             FormatDouble(h.mass[k])});
  }
}

// ---- Sweep ------------------------------------------------------------------

std::vector<SweepCell> SigmaSweep(const RunConfig& base, std::span<const double> sigmas,
                                  std::span<const int> steps,
                                  const std::function<void(const SweepCell&)>& on_cell) {
  std::vector<SweepCell> cells;
  for (int s : steps) {
    for (double sigma : sigmas) {
      SweepCell cell;
      cell.sigma = sigma;
      cell.steps = s;
      RunConfig cfg = base;
      cfg.env.name = "multi_step";
      cfg.env.steps = s;
      cfg.train.method = Method::kDial;
      cfg.train.sigma = sigma;
      cfg.train.out_dir.clear();
      try {
        Trainer trainer(cfg);
        trainer.Run();
        const int episodes = cfg.train.eval_episodes;
        const std::uint64_t seed = StreamSeed(cfg.train.seed, Stream::kEval, 1);
        auto mean = [](const TrajectoryBatch& tb) {
          double sum = 0.0;
          for (double r : tb.episode_reward) sum += r;
          return sum / static_cast<double>(tb.episode_reward.size());
        };
        cell.eval_reward = mean(SampleEpisodes(trainer.team(), trainer.factory(), episodes,
                                               seed, DruMode::kExec, sigma));
        cell.train_reward = mean(SampleEpisodes(trainer.team(), trainer.factory(), episodes,
                                                seed, DruMode::kTrain, sigma));
        cell.ratio = cell.train_reward > 0.0 ? cell.eval_reward / cell.train_reward
                                             : std::numeric_limits<double>::quiet_NaN();
      } catch (const TrainingDiverged& err) {
        cell.status = err.what();
        cell.ratio = std::numeric_limits<double>::quiet_NaN();
      }
      if (on_cell) on_cell(cell);
      cells.push_back(cell);
    }
  }
  return cells;
}

void WriteSweepCsv(const std::filesystem::path& path,
                   const std::vector<std::pair<std::string, std::string>>& meta,
                   std::span<const SweepCell> cells) {
  CsvWriter csv(path, meta,
                {"sigma", "steps", "ratio", "eval_reward", "train_reward", "status"});
  for (const auto& c : cells) {
    std::string status = c.status;
    std::replace(status.begin(), status.end(), ',', ';');
    csv.Row({FormatDouble(c.sigma), std::to_string(c.steps), FormatDouble(c.ratio),
             FormatDouble(c.eval_reward), FormatDouble(c.train_reward), status});
  }
}

void WriteLevelsCsv(const std::filesystem::path& path,
                    const std::vector<std::pair<std::string, std::string>>& meta,
                    std::span<const double> sigmas, double epsilon, double lo, double hi) {
  CsvWriter csv(path, meta, {"sigma", "epsilon", "level_count", "interval_lo", "interval_hi"});
  for (double sigma : sigmas) {
    const DecodableLevels levels = ComputeDecodableLevels(sigma, epsilon, lo, hi);
    if (levels.count == 0) {
      csv.Row({FormatDouble(sigma), FormatDouble(epsilon), "0", "nan", "nan"});
      continue;
    }
    for (const auto& iv : levels.intervals) {
      csv.Row({FormatDouble(sigma), FormatDouble(epsilon), std::to_string(levels.count),
               FormatDouble(iv.lo), FormatDouble(iv.hi)});
    }
  }
}

// ---- Finite differences -----------------------------------------------------

namespace {

Tensor RandomMatrix(std::size_t r, std::size_t c, Rng& rng, double lo = -1.0,
                    double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t = Tensor::Matrix(r, c);
  for (double& v : t.data()) v = u(rng);
  return t;
}

// Values bounded away from zero, for kinks.
Tensor AwayFromZero(std::size_t r, std::size_t c, Rng& rng) {
  Tensor t = RandomMatrix(r, c, rng, 0.2, 1.0);
  std::bernoulli_distribution flip(0.5);
  for (double& v : t.data()) {
    if (flip(rng)) v = -v;
  }
  return t;
}

// Contracts an output with fixed random weights so every entry matters.
Var Contract(Var y, const Tensor& w) { return Sum(Mul(y, y.tape().Constant(w))); }

}  // namespace

std::vector<GradCheckRow> RunGradCheckSuite(std::uint64_t seed) {
  constexpr double kTight = 1e-6;
  constexpr double kUnroll = 1e-4;
  std::vector<GradCheckRow> rows;
  Rng rng = MakeRng(seed, Stream::kAnalysis, 0);
  auto add = [&](const std::string& suite, const std::string& name,
                 const GradCheckReport& r, double tol) {
    GradCheckRow row;
    row.suite = suite;
    row.name = name;
    row.max_rel_error = r.max_rel_error;
    row.tolerance = tol;
    row.coordinates = r.coordinates;
    row.passed = r.passed(tol);
    rows.push_back(row);
  };
  auto primitive = [&](const std::string& name, std::vector<Tensor> point,
                       std::function<Var(std::span<const Var>)> f) {
    Tape probe(false);
    std::vector<Var> vs;
    for (const auto& p : point) vs.push_back(probe.Constant(p));
    const Tensor y = f(vs).value();
    const Tensor w = RandomMatrix(y.rows(), y.cols(), rng);
    add("primitive", name,
        GradCheck([&](Tape&, std::span<const Var> in) { return Contract(f(in), w); }, point),
        kTight);
  };

  const Tensor a34 = RandomMatrix(3, 4, rng);
  const Tensor b34 = RandomMatrix(3, 4, rng);
  const Tensor b45 = RandomMatrix(4, 5, rng);
  const Tensor b54 = RandomMatrix(5, 4, rng);
  const Tensor row4 = RandomMatrix(1, 4, rng);
  const Tensor col3 = RandomMatrix(3, 1, rng);
  const Tensor pos34 = RandomMatrix(3, 4, rng, 0.5, 2.0);
  const std::vector<int> gather = {2, 0, 2, 1};
  const std::vector<int> pick = {3, 0, 1};

  primitive("matmul", {a34, b45}, [](auto v) { return MatMul(v[0], v[1]); });
  primitive("matmul_nt", {a34, b54}, [](auto v) { return MatMulNT(v[0], v[1]); });
  primitive("add", {a34, b34}, [](auto v) { return Add(v[0], v[1]); });
  primitive("sub", {a34, b34}, [](auto v) { return Sub(v[0], v[1]); });
  primitive("mul", {a34, b34}, [](auto v) { return Mul(v[0], v[1]); });
  primitive("add_row", {a34, row4}, [](auto v) { return AddRow(v[0], v[1]); });
  primitive("mul_rows", {a34, col3}, [](auto v) { return MulRows(v[0], v[1]); });
  primitive("repeat_rows", {row4}, [](auto v) { return RepeatRows(v[0], 3); });
  primitive("sum_rows", {a34}, [](auto v) { return SumRows(v[0]); });
  primitive("sum", {a34}, [](auto v) { return Sum(v[0]); });
  primitive("affine", {a34}, [](auto v) { return Affine(v[0], -1.5, 0.25); });
  primitive("scale", {a34}, [](auto v) { return Scale(v[0], 0.7); });
  primitive("sigmoid", {a34}, [](auto v) { return Sigmoid(v[0]); });
  primitive("tanh", {a34}, [](auto v) { return Tanh(v[0]); });
  primitive("relu", {AwayFromZero(3, 4, rng)}, [](auto v) { return Relu(v[0]); });
  primitive("square", {a34}, [](auto v) { return Square(v[0]); });
  primitive("rsqrt", {pos34}, [](auto v) { return Rsqrt(v[0], 1e-5); });
  primitive("concat_cols", {a34, col3}, [](auto v) {
    const Var parts[] = {v[0], v[1]};
    return ConcatCols(parts);
  });
  primitive("slice_cols", {a34}, [](auto v) { return SliceCols(v[0], 1, 2); });
  primitive("gather_rows", {a34}, [&](auto v) { return GatherRows(v[0], gather); });
  primitive("pick", {a34}, [&](auto v) { return Pick(v[0], pick); });

  // Layers: parameters and inputs together.
  auto layer = [&](const std::string& name, ParamSet& params, const Tensor& x,
                   std::function<Var(Tape&, Var)> f) {
    Tape probe(false);
    const Tensor y = f(probe, probe.Constant(x)).value();
    const Tensor w = RandomMatrix(y.rows(), y.cols(), rng);
    add("layer", name + " (params)",
        GradCheckParams([&](Tape& t) { return Contract(f(t, t.Constant(x)), w); }, params),
        kTight);
    add("layer", name + " (input)",
        GradCheck([&](Tape& t, std::span<const Var> in) { return Contract(f(t, in[0]), w); },
                  {x}),
        kTight);
  };
  {
    ParamSet ps;
    Linear lin = Linear::Create(ps, "fc", 4, 3, rng);
    layer("linear", ps, RandomMatrix(5, 4, rng), [&](Tape& t, Var x) { return lin.Forward(t, x); });
  }
  {
    ParamSet ps;
    Embedding emb = Embedding::Create(ps, "table", 6, 3, rng);
    const std::vector<int> idx = {5, 0, 3, 3};
    Tape probe(false);
    const Tensor w = RandomMatrix(4, 3, rng);
    add("layer", "embedding (params)",
        GradCheckParams([&](Tape& t) { return Contract(emb.Forward(t, idx), w); }, ps), kTight);
  }
  {
    ParamSet ps;
    GruCell gru = GruCell::Create(ps, "gru", 4, 3, rng);
    const Tensor h = RandomMatrix(5, 3, rng);
    layer("gru", ps, RandomMatrix(5, 4, rng),
          [&](Tape& t, Var x) { return gru.Step(t, x, t.Constant(h)); });
    const Tensor x = RandomMatrix(5, 4, rng);
    const Tensor w = RandomMatrix(5, 3, rng);
    add("layer", "gru (hidden)",
        GradCheck([&](Tape& t, std::span<const Var> in) {
          return Contract(gru.Step(t, t.Constant(x), in[0]), w);
        }, {h}),
        kTight);
  }
  {
    ParamSet ps;
    BatchNorm bn = BatchNorm::Create(ps, "bn", 4);
    bn.running_mean->value = RandomMatrix(1, 4, rng);
    bn.running_var->value = RandomMatrix(1, 4, rng, 0.5, 2.0);
    bn.gamma->value = RandomMatrix(1, 4, rng, 0.5, 1.5);
    bn.beta->value = RandomMatrix(1, 4, rng);
    layer("batchnorm eval", ps, RandomMatrix(6, 4, rng),
          [&](Tape& t, Var x) { return bn.Forward(t, x, BatchNorm::Mode::kEval, false); });
    layer("batchnorm train", ps, RandomMatrix(6, 4, rng),
          [&](Tape& t, Var x) { return bn.Forward(t, x, BatchNorm::Mode::kTrain, false); });
  }
  {
    const Tensor m = RandomMatrix(5, 2, rng, -3.0, 3.0);
    const Tensor noise = SampleDruNoise(m, 2.0, rng);
    const Tensor w = RandomMatrix(5, 2, rng);
    add("layer", "channel (train)",
        GradCheck([&](Tape& t, std::span<const Var> in) {
          return Contract(DruTrain(t, in[0], noise), w);
        }, {m}),
        kTight);
  }
  {
    CNetConfig nc;
    nc.method = Method::kDial;
    nc.num_agents = 2;
    nc.num_actions = 3;
    nc.message_bits = 2;
    nc.embed = 6;
    nc.obs_vocab = 4;
    CNet net(nc, rng);
    const std::vector<int> obs = {0, 3, 1, 2};
    const std::vector<int> prev = {3, 0, 2, 1};
    const Tensor incoming = RandomMatrix(4, 2, rng, 0.0, 1.0);
    const Tensor h1 = RandomMatrix(4, 6, rng);
    const Tensor h2 = RandomMatrix(4, 6, rng);
    const Tensor wq = RandomMatrix(4, 3, rng);
    const Tensor wm = RandomMatrix(4, 2, rng);
    add("layer", "c-net step (params)",
        GradCheckParams([&](Tape& t) {
          CNet::Input in;
          in.obs_index = obs;
          in.incoming = t.Constant(incoming);
          in.prev_action = prev;
          in.agent = 1;
          in.h1 = t.Constant(h1);
          in.h2 = t.Constant(h2);
          CNet::Output o = net.Forward(t, in, BatchNorm::Mode::kTrain, false);
          return Add(Contract(o.q, wq), Contract(o.message, wm));
        }, net.params()),
        kTight);
  }

  // Full unroll: two agents, three steps, both directions every step.
  {
    EnvConfig ec;
    ec.name = "multi_step";
    ec.steps = 3;
    ec.classes = {0, 1, 2, 3};
    ec.downsample = 4;
    ec.synthetic_per_class = 4;
    EnvFactory factory(ec);
    CNetConfig nc;
    nc.method = Method::kDial;
    nc.num_agents = 2;
    nc.num_actions = factory.spec().num_actions;
    nc.message_bits = factory.spec().message_bits;
    nc.embed = 6;
    nc.obs_dim = factory.spec().obs_dim;
    Team team(nc, false, seed);
    std::vector<std::unique_ptr<Environment>> envs;
    std::vector<std::uint64_t> seeds;
    for (int i = 0; i < 4; ++i) {
      envs.push_back(factory.Make());
      seeds.push_back(StreamSeed(seed, Stream::kEnv, i));
    }
    RolloutOptions opts;
    opts.epsilon = 0.5;
    opts.dru = {2.0, DruMode::kTrain};
    opts.update_running = false;
    Rng explore = MakeRng(seed, Stream::kExplore, 0);
    Rng noise = MakeRng(seed, Stream::kNoise, 0);
    const TrajectoryBatch tb = Rollout(envs, seeds, team, opts, explore, noise);
    TdTargets targets;
    {
      Tape t(false);
      TrainingLoss(t, tb, team, 1.0, nullptr, &targets);
    }
    add("unroll", "dial 2 agents x 3 steps",
        GradCheckParams([&](Tape& t) { return TrainingLoss(t, tb, team, 1.0, &targets); },
                        team.online_params()),
        kUnroll);
  }
  return rows;
}

}  // namespace commlab
