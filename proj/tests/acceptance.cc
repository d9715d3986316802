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


// Acceptance checks. One PASS/FAIL line per criterion on stdout, details
// indented underneath. Exit status is nonzero if any criterion fails.
//
// Budgets count episodes in the trainer's default unit: one episode is one
// lock-step batch of `batch` games followed by one optimiser step.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <memory>
#include <string>
#include <vector>

#include <boost/math/quadrature/tanh_sinh.hpp>

#include "commlab/analysis.h"
#include "commlab/dru.h"
#include "commlab/env.h"
#include "commlab/trainer.h"

using namespace commlab;

namespace {

constexpr int kSeeds = 5;
constexpr int kNeeded = 3;
// Evaluation used to confirm an early stop, on its own seed stream.
constexpr int kConfirmEpisodes = 2000;
constexpr std::uint64_t kConfirmStream = 1000003;

using Clock = std::chrono::steady_clock;

double Seconds(Clock::time_point since) {
  return std::chrono::duration<double>(Clock::now() - since).count();
}

int failures = 0;

void Verdict(int id, bool pass, const std::string& summary) {
  std::printf("criterion %d: %s  %s\n", id, pass ? "PASS" : "FAIL", summary.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

template <typename... Args>
void Detail(const char* fmt, Args... args) {
  std::printf("  ");
  std::printf(fmt, args...);
  std::printf("\n");
  std::fflush(stdout);
}

std::string Fmt(const char* fmt, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), fmt, a, b, c);
  return buf;
}

const char* Label(const RunConfig& c) {
  static std::string s;
  s = std::string(MethodName(c.train.method)) + (c.train.share ? "-ps" : "-ns");
  return s.c_str();
}

struct RunResult {
  std::unique_ptr<Trainer> trainer;
  bool reached = false;       // early-stop goal met and confirmed
  double final_norm = 0.0;    // last curve row, or the confirming evaluation
  double final_saturation = 0.0;
  long episodes = 0;
  double seconds = 0.0;
};

// Trains to the budget. With a goal, stops at the first evaluation row that
// meets it and is confirmed by a larger evaluation.
RunResult Train(const RunConfig& cfg, std::function<bool(double)> goal = {}) {
  RunResult r;
  const auto start = Clock::now();
  r.trainer = std::make_unique<Trainer>(cfg);
  Trainer& t = *r.trainer;
  std::size_t seen = 0;
  while (t.episodes_done() < cfg.train.episodes) {
    t.TrainBatch();
    if (!goal || t.curve().rows.size() == seen) continue;
    seen = t.curve().rows.size();
    if (!goal(t.curve().rows.back().norm_reward)) continue;
    const EvalResult confirm =
        t.Evaluate(kConfirmEpisodes, StreamSeed(cfg.train.seed, Stream::kEval, kConfirmStream));
    if (goal(confirm.normalized)) {
      r.reached = true;
      r.final_norm = confirm.normalized;
      break;
    }
  }
  const auto& rows = t.curve().rows;
  if (!r.reached) r.final_norm = rows.empty() ? 0.0 : rows.back().norm_reward;
  r.final_saturation = rows.empty() ? 0.0 : rows.back().saturation;
  r.episodes = t.episodes_done();
  r.seconds = Seconds(start);
  return r;
}

RunConfig Switch(int n, Method m, bool share, std::uint64_t seed, long episodes) {
  RunConfig c;
  c.env.name = "switch";
  c.env.n = n;
  c.train.method = m;
  c.train.share = share;
  c.train.seed = seed;
  c.train.episodes = episodes;
  return c;
}

// ---------------------------------------------------------------------------

void GradientKeystone() {
  const auto start = Clock::now();
  const auto rows = RunGradCheckSuite(1);
  const double secs = Seconds(start);
  bool ok = !rows.empty() && secs < 60.0;
  double worst_tight = 0.0, worst_unroll = 0.0;
  for (const auto& r : rows) {
    const double limit = r.suite == "unroll" ? 1e-4 : 1e-6;
    ok = ok && r.max_rel_error < limit;
    if (r.suite == "unroll") {
      worst_unroll = std::max(worst_unroll, r.max_rel_error);
    } else {
      worst_tight = std::max(worst_tight, r.max_rel_error);
    }
    if (r.max_rel_error >= limit) Detail("%s %s: %.3e", r.suite.c_str(), r.name.c_str(), r.max_rel_error);
  }
  Verdict(1, ok,
          std::to_string(rows.size()) + " checks; " +
              Fmt("primitives/layers max %.2e, unroll max %.2e, %.1f s", worst_tight,
                  worst_unroll, secs));
}

struct SwitchRuns {
  std::vector<RunResult> dial_ps;  // per seed tried
  std::vector<std::uint64_t> seeds;
  int successes = 0;
};

SwitchRuns SwitchThree() {
  constexpr long kBudget = 10000;
  SwitchRuns out;
  for (std::uint64_t seed = 1; seed <= kSeeds; ++seed) {
    if (out.successes >= kNeeded) break;
    if (out.successes + (kSeeds - static_cast<int>(seed) + 1) < kNeeded) break;
    RunResult r = Train(Switch(3, Method::kDial, true, seed, kBudget),
                        [](double v) { return v >= 0.95; });
    Detail("switch n=3 dial-ps seed %d: %s %.3f after %ld episodes (%.0f s)",
           static_cast<int>(seed), r.reached ? "reached" : "ended at", r.final_norm, r.episodes,
           r.seconds);
    out.successes += r.reached;
    out.seeds.push_back(seed);
    out.dial_ps.push_back(std::move(r));
  }

  RunResult nocomm = Train(Switch(3, Method::kNoComm, true, 1, kBudget));
  Detail("switch n=3 nocomm seed 1: final %.3f (%.0f s)", nocomm.final_norm, nocomm.seconds);
  bool all_beat = out.dial_ps.front().final_norm > nocomm.final_norm;
  Detail("switch n=3 dial-ps seed 1: final %.3f", out.dial_ps.front().final_norm);
  for (auto [m, share] : {std::pair{Method::kDial, false}, std::pair{Method::kRial, true},
                          std::pair{Method::kRial, false}}) {
    const RunConfig c = Switch(3, m, share, 1, kBudget);
    RunResult r = Train(c);
    Detail("switch n=3 %s seed 1: final %.3f (%.0f s)", Label(c), r.final_norm, r.seconds);
    all_beat = all_beat && r.final_norm > nocomm.final_norm;
  }
  Verdict(2, out.successes >= kNeeded && all_beat,
          std::to_string(out.successes) + "/" + std::to_string(out.seeds.size()) +
              " dial-ps seeds reached 0.95 within 10000 episodes; all methods above nocomm: " +
              (all_beat ? "yes" : "no"));
  return out;
}

// DIAL-PS against NoComm on the same seed: success when DIAL-PS reaches the
// NoComm final reward plus `margin` within the budget.
void BeatsBaseline(int id, const std::string& name, std::function<RunConfig(Method, std::uint64_t)> make,
                   double margin) {
  int successes = 0, tried = 0;
  for (std::uint64_t seed = 1; seed <= kSeeds; ++seed) {
    if (successes >= kNeeded) break;
    if (successes + (kSeeds - static_cast<int>(seed) + 1) < kNeeded) break;
    ++tried;
    const RunResult base = Train(make(Method::kNoComm, seed));
    const double bar = base.final_norm + margin;
    const RunResult dial = Train(make(Method::kDial, seed), [bar](double v) { return v >= bar; });
    Detail("%s seed %d: nocomm final %.3f, dial-ps %s %.3f after %ld episodes (%.0f s + %.0f s)",
           name.c_str(), static_cast<int>(seed), base.final_norm,
           dial.reached ? "reached" : "ended at", dial.final_norm, dial.episodes, base.seconds,
           dial.seconds);
    successes += dial.reached;
  }
  Verdict(id, successes >= kNeeded,
          std::to_string(successes) + "/" + std::to_string(tried) + " seeds with dial-ps >= nocomm + " +
              Fmt("%.1f", margin));
}

void ParityDemo() {
  const ParityReport r = ToyParityDemo(20, 1);
  int nonzero = 0;
  for (double g : r.dial_gradient_norm) nonzero += g > 0.0;
  const bool ok = r.expected_td_update == 0.0 && nonzero == 20 &&
                  r.dial_gradient_norm.size() == 20;
  Verdict(4, ok,
          Fmt("discrete sender update %.1f; nonzero message gradient for %.0f/20 receivers",
              r.expected_td_update, nonzero));
}

void Channel() {
  boost::math::quadrature::tanh_sinh<double> integrator;
  double worst = 0.0;
  for (double m : {-4.0, -2.0, 0.0, 1.0, 3.0}) {
    for (double sigma : {0.5, 1.0, 1.5, 2.0, 3.0}) {
      const double total = integrator.integrate(
          [&](double p) { return p <= 0.0 || p >= 1.0 ? 0.0 : ChannelDensity(p, m, sigma); },
          0.0, 1.0);
      worst = std::max(worst, std::abs(total - 1.0));
    }
  }
  Rng rng = MakeRng(1, Stream::kAnalysis, 5);
  const int n = 1000000;
  const double m = 0.5, sigma = 2.0;
  std::vector<double> s = Dru(std::vector<double>(n, m), DruConfig{sigma, DruMode::kTrain}, rng);
  std::sort(s.begin(), s.end());
  double ks = 0.0;
  for (int i = 0; i < n; ++i) {
    const double f = ChannelCdf(s[i], m, sigma);
    ks = std::max({ks, f - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - f});
  }
  const std::size_t levels = ComputeDecodableLevels(2.0, 0.1, -10.0, 10.0).count;
  Verdict(5, worst <= 1e-6 && ks < 0.002 && levels == 2,
          Fmt("max |integral - 1| %.1e; KS %.5f; levels(sigma=2, eps=0.1) = %.0f", worst, ks,
              static_cast<double>(levels)));
}

void PolicySpace() {
  bool ok = PolicySpaceExponent(10) == 88572;
  for (int t = 1; t <= 12; ++t) {
    BigInt sum = 0, power = 1;
    for (int k = 1; k <= t; ++k) {
      power *= 3;
      sum += power;
    }
    ok = ok && PolicySpaceExponent(t) == sum;
  }
  Verdict(6, ok, "exponent at T=10 is " + PolicySpaceExponent(10).str() +
                     "; matches the sum of powers of 3 for T <= 12");
}

void Saturation(const SwitchRuns& runs) {
  // Same seeds and episode counts as the converged noisy runs.
  double noisy = 0.0, clean = 0.0;
  int count = 0;
  for (std::size_t i = 0; i < runs.dial_ps.size(); ++i) {
    const RunResult& r = runs.dial_ps[i];
    if (!r.reached) continue;
    RunConfig c = Switch(3, Method::kDial, true, runs.seeds[i], r.episodes);
    c.train.sigma = 0.0;
    const RunResult z = Train(c);
    Detail("seed %d after %ld episodes: saturation sigma=2 %.3f, sigma=0 %.3f (reward %.3f)",
           static_cast<int>(runs.seeds[i]), r.episodes, r.final_saturation, z.final_saturation,
           z.final_norm);
    noisy += r.final_saturation;
    clean += z.final_saturation;
    ++count;
  }
  if (count > 0) {
    noisy /= count;
    clean /= count;
  }
  Verdict(8, count > 0 && noisy > clean,
          Fmt("mean saturation sigma=2 %.3f vs sigma=0 %.3f over %.0f converged seeds", noisy,
              clean, count));
}

std::string Slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void Determinism() {
  const std::filesystem::path root = "acceptance_determinism";
  std::filesystem::remove_all(root);
  for (const char* run : {"first", "second"}) {
    RunConfig c = Switch(3, Method::kDial, true, 7, 300);
    c.train.out_dir = (root / run).string();
    Trainer(c).Run();
  }
  const std::string a = Slurp(root / "first" / "curve.csv");
  const std::string b = Slurp(root / "second" / "curve.csv");
  Verdict(9, !a.empty() && a == b,
          "two runs, " + std::to_string(a.size()) + " and " + std::to_string(b.size()) +
              " bytes of curve.csv, " + (a == b ? "identical" : "different"));
}

void Protocols(const SwitchRuns& runs) {
  int checked = 0, good = 0;
  for (std::size_t i = 0; i < runs.dial_ps.size(); ++i) {
    const RunResult& r = runs.dial_ps[i];
    if (!r.reached) continue;
    const std::uint64_t seed = StreamSeed(runs.seeds[i], Stream::kAnalysis, 1);
    const TrajectoryBatch tb = SampleEpisodes(r.trainer->team(), r.trainer->factory(), 2000, seed,
                                              DruMode::kExec, 2.0);
    const SwitchProtocol p = ExtractSwitchProtocol(tb, 3, SwitchHorizon(3));
    Detail("seed %d: table of %zu rows, consistency %.3f, replay %.3f of oracle",
           static_cast<int>(runs.seeds[i]), p.rows.size(), p.consistency, p.replay_normalized);
    ++checked;
    good += p.replay_normalized >= 0.95;
  }
  Verdict(10, checked > 0 && good == checked,
          std::to_string(good) + "/" + std::to_string(checked) +
              " successful runs replay to >= 0.95 of oracle");
}

}  // namespace

int main() {
  std::printf("episode = one batch of 32 games and one optimiser step; target sync every "
              "100 episodes\n");
  std::fflush(stdout);
  const auto start = Clock::now();

  GradientKeystone();
  const SwitchRuns runs = SwitchThree();
  BeatsBaseline(3, "switch n=4",
                [](Method m, std::uint64_t seed) { return Switch(4, m, true, seed, 30000); }, 0.1);
  ParityDemo();
  Channel();
  PolicySpace();
  BeatsBaseline(7, "colour-digit",
                [](Method m, std::uint64_t seed) {
                  RunConfig c;
                  c.env.name = "colour_digit";
                  c.train.method = m;
                  c.train.seed = seed;
                  c.train.episodes = 20000;
                  return c;
                },
                0.3);
  Saturation(runs);
  Determinism();
  Protocols(runs);

  std::printf("%d of 10 criteria failed; %.0f s total\n", failures, Seconds(start));
  return failures == 0 ? 0 : 1;
}
