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

// The discretise/regularise unit (DRU) sitting between a sender's message
// head and the receivers, plus analysis of the noisy logistic channel.
//
// Training: m_hat = Logistic(m + noise), noise ~ N(0, sigma^2) drawn fresh
// per component per call. Execution: m_hat = 1{m > 0}.

#ifndef COMMLAB_DRU_H_
#define COMMLAB_DRU_H_

#include <span>
#include <string>
#include <vector>

#include "commlab/autodiff.h"
#include "commlab/rng.h"

namespace commlab {

enum class DruMode { kTrain, kExec };

struct DruConfig {
  double sigma = 2.0;
  DruMode mode = DruMode::kTrain;
};

void ValidateDruConfig(const DruConfig& cfg);

std::vector<double> Dru(std::span<const double> m, const DruConfig& cfg, Rng& rng);

// Noise tensor shaped like `like`, N(0, sigma^2) entries (all zero when
// sigma == 0).
Tensor SampleDruNoise(const Tensor& like, double sigma, Rng& rng);

// Tape versions. In train mode the noise is a constant leaf, so the
// gradient w.r.t. m is y(1 - y). Exec mode output is a constant.
Var DruTrain(Tape& tape, Var m, const Tensor& noise);
Var DruExec(Tape& tape, Var m);

// Density of m_hat = Logistic(N(m, sigma^2)) at m_hat in (0, 1):
//   NormalPdf(logit(m_hat); m, sigma) / (m_hat (1 - m_hat)).
double ChannelDensity(double m_hat, double m, double sigma);
// P(Logistic(N(m, sigma^2)) <= m_hat).
double ChannelCdf(double m_hat, double m, double sigma);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

struct DecodableLevels {
  // Packed activations m_1 < m_2 < ... within [lo, hi].
  std::vector<double> values;
  // Partition of [lo, hi] in m: level k owns [values[k], values[k+1]).
  std::vector<Interval> intervals;
  // {m_hat : density(m_hat | values[k]) > epsilon} as [min, max].
  std::vector<Interval> supports;
  std::size_t count = 0;
  std::string diagnostic;
};

// Greedy left-to-right packing: m_1 = lo and m_{k+1} is chosen so that the
// smallest m_hat it produces with density above epsilon equals the largest
// such m_hat of m_k.
DecodableLevels ComputeDecodableLevels(double sigma, double epsilon, double lo,
                                       double hi);

// Bounds of {m_hat : density(m_hat | m) > epsilon}, expressed in logit
// space. Returns false when the set is empty.
bool ChannelSupportLogit(double m, double sigma, double epsilon, double& lo_logit,
                         double& hi_logit);

}  // namespace commlab

#endif  // COMMLAB_DRU_H_
