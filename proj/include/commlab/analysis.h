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

// Post-hoc analysis of trained teams: protocol tables, message histograms,
// noise sweeps and the finite-difference suite. Nothing here mutates the
// networks it inspects.

#ifndef COMMLAB_ANALYSIS_H_
#define COMMLAB_ANALYSIS_H_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "commlab/trainer.h"

namespace commlab {

// Greedy rollouts for analysis. `channel` picks the threshold or the noisy
// logistic channel; batch norm always uses running statistics.
TrajectoryBatch SampleEpisodes(Team& team, const EnvFactory& factory, int episodes,
                               std::uint64_t seed, DruMode channel, double sigma);

// ---- Switch protocol --------------------------------------------------------

// (day, switch bit seen, occupant visited before) -> (action, bit written).
using SwitchKey = std::tuple<int, int, int>;
using SwitchPolicyTable = std::map<SwitchKey, std::pair<int, int>>;

struct SwitchProtocolRow {
  int day = 0;
  int bit_seen = 0;
  int visited_before = 0;
  long samples = 0;
  // freq[action][bit written], sums to 1 over the row.
  double freq[2][2] = {{0.0, 0.0}, {0.0, 0.0}};
  int action = kNone;  // majority behaviour
  int bit = 0;
};

struct SwitchProtocol {
  int n = 0;
  int horizon = 0;
  long episodes = 0;
  std::vector<SwitchProtocolRow> rows;  // sorted by condition
  double consistency = 0.0;    // share of samples matching their row's majority
  double replay_reward = 0.0;  // exact expected reward of the majority table
  double replay_normalized = 0.0;
  bool optimal = false;            // replay_normalized >= optimal_threshold
  bool low_consistency = false;    // consistency < consistency_threshold
  SwitchPolicyTable table() const;
};

inline constexpr double kOptimalThreshold = 0.95;
inline constexpr double kConsistencyThreshold = 0.9;

// Aggregates occupant behaviour over the rows of a switch batch.
SwitchProtocol ExtractSwitchProtocol(const TrajectoryBatch& batch, int n, int horizon);

// Exact expected reward of an occupant table, by dynamic programming over
// (visited set, switch bit). Conditions missing from the table fall back to
// None and keeping the switch as seen. The switch starts off.
double ReplaySwitchTable(const SwitchPolicyTable& table, int n, int horizon);

void WriteSwitchProtocolCsv(const std::filesystem::path& path,
                            const std::vector<std::pair<std::string, std::string>>& meta,
                            const SwitchProtocol& protocol);

// ---- Digit codes ------------------------------------------------------------

struct DigitCodeRow {
  int digit = 0;
  std::string code;  // bits sent over the episode, first step first
  long samples = 0;
  double consistency = 0.0;  // share of episodes sending `code`
};

struct DigitCodeTable {
  int agent = 0;
  std::vector<DigitCodeRow> rows;  // sorted by digit
  double consistency = 0.0;
  bool injective = false;  // distinct digits get distinct codes
};

// Bits agent `agent` sent on steps whose message was delivered, per hidden digit.
DigitCodeTable ExtractDigitCodes(const TrajectoryBatch& batch, int agent);

void WriteDigitCodesCsv(const std::filesystem::path& path,
                        const std::vector<std::pair<std::string, std::string>>& meta,
                        const DigitCodeTable& table);

// ---- Message histograms -----------------------------------------------------

struct Histogram {
  double lo = 0.0;
  double hi = 1.0;
  std::vector<double> mass;  // sums to 1 unless empty input
  std::size_t samples = 0;
};

// Equal-width bins over [lo, hi]; values outside are clamped into the end bins.
Histogram MakeHistogram(std::span<const double> values, double lo, double hi, int bins = 50);

struct ActivationReport {
  Histogram message;  // channel output, over [0, 1]
  Histogram logit;    // pre-channel activation, over its observed range
  double saturation = 0.0;
};

// Train-mode channel, greedy actions, delivered messages only.
ActivationReport ActivationHistogram(Team& team, const EnvFactory& factory, double sigma,
                                     int episodes, std::uint64_t seed);

void WriteHistogramCsv(const std::filesystem::path& path,
                       const std::vector<std::pair<std::string, std::string>>& meta,
                       const Histogram& h);

// ---- Noise sweep ------------------------------------------------------------

struct SweepCell {
  double sigma = 0.0;
  int steps = 0;
  double eval_reward = 0.0;   // threshold channel
  double train_reward = 0.0;  // noisy logistic channel
  double ratio = 0.0;         // eval / train; NaN when train reward <= 0
  std::string status = "ok";  // or the divergence message
};

// Trains one multi-step run per (sigma, steps) cell from `base`, then scores
// it greedily on both channels. A diverged cell is recorded and skipped.
std::vector<SweepCell> SigmaSweep(const RunConfig& base, std::span<const double> sigmas,
                                  std::span<const int> steps,
                                  const std::function<void(const SweepCell&)>& on_cell = {});

void WriteSweepCsv(const std::filesystem::path& path,
                   const std::vector<std::pair<std::string, std::string>>& meta,
                   std::span<const SweepCell> cells);

// One row per packed interval.
void WriteLevelsCsv(const std::filesystem::path& path,
                    const std::vector<std::pair<std::string, std::string>>& meta,
                    std::span<const double> sigmas, double epsilon, double lo, double hi);

// ---- Finite-difference suite ------------------------------------------------

struct GradCheckRow {
  std::string suite;  // primitive | layer | unroll
  std::string name;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  std::size_t coordinates = 0;
  bool passed = false;
};

// Every tape primitive, every layer and a two-agent, three-step differentiable
// unroll with pinned channel noise and frozen targets.
std::vector<GradCheckRow> RunGradCheckSuite(std::uint64_t seed = 1);

}  // namespace commlab

#endif  // COMMLAB_ANALYSIS_H_
