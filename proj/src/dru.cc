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

#include "commlab/dru.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace commlab {
namespace {

constexpr int kSupportGrid = 20000;
constexpr std::size_t kMaxLevels = 100000;

double Softplus(double x) {
  return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

// log density(m_hat | m) - log(epsilon) at logit(m_hat) = l.
double LogExcess(double l, double m, double sigma, double log_eps) {
  const double z = (l - m) / sigma;
  return -0.5 * z * z - std::log(sigma * std::sqrt(2.0 * std::numbers::pi)) +
         Softplus(l) + Softplus(-l) - log_eps;
}

// Root of LogExcess between a (negative) and b (positive).
double Refine(double a, double b, double m, double sigma, double log_eps) {
  double fa = LogExcess(a, m, sigma, log_eps);
  for (int i = 0; i < 200 && std::abs(b - a) > 1e-13 * (1.0 + std::abs(a)); ++i) {
    const double mid = 0.5 * (a + b);
    const double fm = LogExcess(mid, m, sigma, log_eps);
    if ((fm > 0) == (fa > 0)) {
      a = mid;
      fa = fm;
    } else {
      b = mid;
    }
  }
  return 0.5 * (a + b);
}

}  // namespace

void ValidateDruConfig(const DruConfig& cfg) {
  if (!(cfg.sigma >= 0.0) || !std::isfinite(cfg.sigma)) {
    throw std::invalid_argument("DRU sigma must be finite and >= 0");
  }
}

std::vector<double> Dru(std::span<const double> m, const DruConfig& cfg, Rng& rng) {
  ValidateDruConfig(cfg);
  std::vector<double> out(m.size());
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (!std::isfinite(m[i])) throw std::domain_error("DRU: non-finite message");
    if (cfg.mode == DruMode::kExec) {
      out[i] = m[i] > 0.0 ? 1.0 : 0.0;
    } else {
      out[i] = Logistic(m[i] + cfg.sigma * normal(rng));
    }
  }
  return out;
}

Tensor SampleDruNoise(const Tensor& like, double sigma, Rng& rng) {
  Tensor noise(like.shape(), 0.0);
  if (sigma == 0.0) return noise;
  std::normal_distribution<double> normal(0.0, 1.0);
  for (double& v : noise.data()) v = sigma * normal(rng);
  return noise;
}

Var DruTrain(Tape& tape, Var m, const Tensor& noise) {
  if (!noise.same_shape(m.value())) {
    throw std::invalid_argument("DRU noise " + noise.shape_string() +
                                " does not match message " + m.value().shape_string());
  }
  return Sigmoid(Add(m, tape.Constant(noise)));
}

Var DruExec(Tape& tape, Var m) {
  Tensor bits(m.value().shape());
  auto src = m.value().data();
  auto dst = bits.data();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] > 0.0 ? 1.0 : 0.0;
  return tape.Constant(std::move(bits));
}

double ChannelDensity(double m_hat, double m, double sigma) {
  if (!(m_hat > 0.0 && m_hat < 1.0)) {
    throw std::domain_error("channel density is defined for m_hat in (0, 1)");
  }
  if (!(sigma > 0.0)) throw std::domain_error("channel density needs sigma > 0");
  const double l = std::log(m_hat) - std::log1p(-m_hat);
  const double z = (l - m) / sigma;
  return std::exp(-0.5 * z * z) / (sigma * std::sqrt(2.0 * std::numbers::pi)) /
         (m_hat * (1.0 - m_hat));
}

double ChannelCdf(double m_hat, double m, double sigma) {
  if (!(sigma > 0.0)) throw std::domain_error("channel cdf needs sigma > 0");
  if (m_hat <= 0.0) return 0.0;
  if (m_hat >= 1.0) return 1.0;
  const double l = std::log(m_hat) - std::log1p(-m_hat);
  return 0.5 * std::erfc(-(l - m) / (sigma * std::numbers::sqrt2));
}

bool ChannelSupportLogit(double m, double sigma, double epsilon, double& lo_logit,
                         double& hi_logit) {
  const double log_eps = std::log(epsilon);
  // LogExcess <= -d^2 / (2 sigma^2) + |d| + k with d = l - m, so the set is
  // contained in |d| < sigma^2 + sqrt(sigma^4 + 2 sigma^2 k).
  const double k = std::abs(m) + 2.0 * std::numbers::ln2 -
                   std::log(sigma * std::sqrt(2.0 * std::numbers::pi)) - log_eps;
  const double s2 = sigma * sigma;
  const double radius = s2 + std::sqrt(s2 * s2 + 2.0 * s2 * std::max(k, 0.0)) + 1.0;
  const double a = m - radius;
  const double step = 2.0 * radius / kSupportGrid;
  int first = -1, last = -1, best = 0;
  double best_val = -std::numeric_limits<double>::infinity();
  for (int i = 0; i <= kSupportGrid; ++i) {
    const double v = LogExcess(a + step * i, m, sigma, log_eps);
    if (v > best_val) {
      best_val = v;
      best = i;
    }
    if (v > 0) {
      if (first < 0) first = i;
      last = i;
    }
  }
  if (first < 0) {
    // The set may be narrower than the grid; polish the best grid point.
    double lo = a + step * std::max(best - 1, 0);
    double hi = a + step * std::min(best + 1, kSupportGrid);
    for (int i = 0; i < 200; ++i) {
      const double m1 = lo + (hi - lo) / 3.0, m2 = hi - (hi - lo) / 3.0;
      if (LogExcess(m1, m, sigma, log_eps) < LogExcess(m2, m, sigma, log_eps)) {
        lo = m1;
      } else {
        hi = m2;
      }
    }
    const double peak = 0.5 * (lo + hi);
    if (LogExcess(peak, m, sigma, log_eps) <= 0) return false;
    lo_logit = Refine(a + step * std::max(best - 1, 0), peak, m, sigma, log_eps);
    hi_logit = Refine(a + step * std::min(best + 1, kSupportGrid), peak, m, sigma, log_eps);
    return true;
  }
  lo_logit = first == 0 ? a : Refine(a + step * (first - 1), a + step * first, m, sigma, log_eps);
  hi_logit = last == kSupportGrid
                 ? a + step * last
                 : Refine(a + step * (last + 1), a + step * last, m, sigma, log_eps);
  return true;
}

DecodableLevels ComputeDecodableLevels(double sigma, double epsilon, double lo,
                                       double hi) {
  if (!(sigma > 0.0)) throw std::invalid_argument("decodable levels need sigma > 0");
  if (!(epsilon > 0.0)) throw std::invalid_argument("decodable levels need epsilon > 0");
  if (!(lo < hi)) throw std::invalid_argument("decodable levels need lo < hi");

  DecodableLevels out;
  double lo_l = 0, hi_l = 0;
  if (!ChannelSupportLogit(lo, sigma, epsilon, lo_l, hi_l)) {
    out.diagnostic = "no m_hat has density above epsilon at m = lo";
    return out;
  }
  out.values.push_back(lo);
  out.supports.push_back({Logistic(lo_l), Logistic(hi_l)});
  double current = lo;
  double target = hi_l;
  while (out.values.size() < kMaxLevels) {
    // Smallest supported logit of m as a function of m; increasing in m.
    auto lower = [&](double mm) -> double {
      double l = 0, h = 0;
      if (!ChannelSupportLogit(mm, sigma, epsilon, l, h)) return -std::numeric_limits<double>::infinity();
      return l;
    };
    double a = current;
    double width = std::max(sigma, 1e-3);
    double b = current + width;
    while (lower(b) < target) {
      a = b;
      width *= 2.0;
      b = current + width;
      if (b - current > 1e6) {
        out.diagnostic = "packing bracket diverged";
        break;
      }
    }
    if (!out.diagnostic.empty()) break;
    for (int i = 0; i < 200 && b - a > 1e-12 * (1.0 + std::abs(a)); ++i) {
      const double mid = 0.5 * (a + b);
      if (lower(mid) < target) {
        a = mid;
      } else {
        b = mid;
      }
    }
    const double next = 0.5 * (a + b);
    if (next > hi) break;
    double l = 0, h = 0;
    ChannelSupportLogit(next, sigma, epsilon, l, h);
    out.values.push_back(next);
    out.supports.push_back({Logistic(l), Logistic(h)});
    current = next;
    target = h;
  }
  out.count = out.values.size();
  for (std::size_t k = 0; k < out.values.size(); ++k) {
    const double end = k + 1 < out.values.size() ? out.values[k + 1] : hi;
    out.intervals.push_back({out.values[k], end});
  }
  return out;
}

}  // namespace commlab
