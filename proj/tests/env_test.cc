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
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include <doctest.h>

#include "commlab/digits.h"
#include "commlab/env.h"

using namespace commlab;

namespace {

// Number of length-T occupant sequences over n prisoners that include
// everyone, by brute force.
long CountCovering(int n, int horizon) {
  long total = 0;
  std::vector<int> seq(horizon, 0);
  while (true) {
    std::vector<char> seen(n, 0);
    for (int s : seq) seen[s] = 1;
    total += std::all_of(seen.begin(), seen.end(), [](char c) { return c; });
    int k = 0;
    while (k < horizon && ++seq[k] == n) seq[k++] = 0;
    if (k == horizon) break;
  }
  return total;
}

std::vector<int> NoneActions(int n) { return std::vector<int>(n, kNone); }

void WriteBigEndian(std::ofstream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                              static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

}  // namespace

TEST_CASE("switch horizon rule") {
  CHECK(SwitchHorizon(3) == 6);
  CHECK(SwitchHorizon(4) == 10);
  CHECK(SwitchHorizon(2) == 2);
  CHECK(SwitchHorizon(1) == 1);
  SwitchRiddle env(3);
  CHECK(env.spec().horizon == 6);
  CHECK(env.spec().num_actions == 2);
  CHECK(env.spec().message_bits == 1);
}

TEST_CASE("switch: observations, routing and legality") {
  SwitchRiddle env(4);
  env.Reset(11);
  for (int step = 0; step < 5 && !env.done(); ++step) {
    const SwitchState& s = env.state();
    int in_room = 0;
    for (int a = 0; a < 4; ++a) {
      const bool occupant = a == s.occupant;
      in_room += env.Observe(a).index;
      CHECK(env.Observe(a).index == (occupant ? 1 : 0));
      CHECK(env.IsLegal(a, kNone));
      CHECK(env.IsLegal(a, kTell) == occupant);
      const auto senders = env.Senders(a);
      if (occupant && s.t > 1) {
        REQUIRE(senders.size() == 1);
        CHECK(senders[0] == s.previous_occupant);
      } else {
        CHECK(senders.empty());
      }
    }
    CHECK(in_room == 1);
    env.Step(NoneActions(4));
  }
  std::vector<int> bad = NoneActions(4);
  bad[(env.state().occupant + 1) % 4] = kTell;
  CHECK_THROWS_AS(env.Step(bad), std::invalid_argument);
  CHECK_THROWS_AS(env.Step(std::vector<int>{0, 0}), std::invalid_argument);
}

TEST_CASE("switch: rewards") {
  SUBCASE("tell after everyone visited") {
    SwitchRiddle env(3, 200);
    env.Reset(5);
    while (!std::all_of(env.state().visited.begin(), env.state().visited.end(),
                        [](bool v) { return v; })) {
      env.Step(NoneActions(3));
    }
    std::vector<int> act = NoneActions(3);
    act[env.state().occupant] = kTell;
    const StepResult r = env.Step(act);
    CHECK(r.done);
    CHECK(r.team_reward() == 1.0);
    CHECK(r.rewards.size() == 3);
    CHECK_THROWS_AS(env.Step(NoneActions(3)), std::logic_error);
  }
  SUBCASE("tell on day one") {
    SwitchRiddle env(3);
    env.Reset(5);
    std::vector<int> act = NoneActions(3);
    act[env.state().occupant] = kTell;
    const StepResult r = env.Step(act);
    CHECK(r.done);
    CHECK(r.team_reward() == -1.0);
  }
  SUBCASE("nobody tells") {
    SwitchRiddle env(3);
    env.Reset(5);
    int steps = 0;
    StepResult r;
    while (!env.done()) {
      r = env.Step(NoneActions(3));
      ++steps;
      if (!r.done) CHECK(r.team_reward() == 0.0);
    }
    CHECK(steps == 6);
    CHECK(r.team_reward() == 0.0);
  }
  SUBCASE("single prisoner") {
    SwitchRiddle env(1);
    env.Reset(1);
    CHECK(env.Step(std::vector<int>{kTell}).team_reward() == 1.0);
  }
}

TEST_CASE("switch: occupants are reproducible and uniform") {
  SwitchRiddle a(3, 100000), b(3, 100000);
  a.Reset(77);
  b.Reset(77);
  std::vector<long> count(3, 0);
  for (int i = 0; i < 99999; ++i) {
    CHECK(a.state().occupant == b.state().occupant);
    count[a.state().occupant] += 1;
    a.Step(NoneActions(3));
    b.Step(NoneActions(3));
  }
  const double expected = 99999.0 / 3.0;
  double chi2 = 0.0;
  for (long c : count) chi2 += (c - expected) * (c - expected) / expected;
  CHECK(chi2 < 9.21);  // df = 2, p = 0.01
}

TEST_CASE("switch oracle matches brute-force enumeration") {
  CHECK(SwitchOracleExact(3, 6) == doctest::Approx(540.0 / 729.0).epsilon(1e-14));
  CHECK(CountCovering(3, 6) == 540);
  CHECK(SwitchOracleExact(4, 10) ==
        doctest::Approx(CountCovering(4, 10) / std::pow(4.0, 10)).epsilon(1e-12));
  CHECK(SwitchOracleExact(2, 2) == doctest::Approx(0.5));
  SwitchRiddle env(3);
  CHECK(env.OracleReward() == doctest::Approx(540.0 / 729.0));
}

TEST_CASE("switch Monte Carlo oracle agrees with the exact value") {
  Rng rng(3);
  const MonteCarloEstimate mc = SwitchOracleMonteCarlo(3, 6, 20000, rng);
  CHECK(std::abs(mc.mean - 540.0 / 729.0) < 4.0 * mc.std_error);
  CHECK(mc.std_error > 0.0);
}

TEST_CASE("policy space exponent") {
  CHECK(PolicySpaceExponent(10) == 88572);
  for (int t = 1; t <= 12; ++t) {
    BigInt sum = 0;
    BigInt power = 1;
    for (int k = 1; k <= t; ++k) {
      power *= 3;
      sum += power;
    }
    CHECK(PolicySpaceExponent(t) == sum);
  }
  const PolicySpaceSize s = PolicySpaceForAgents(4);
  CHECK(s.horizon == 10);
  CHECK(s.single_agent == 88572);
  CHECK(s.multi_agent == 4 * 88572);
}

TEST_CASE("colour-digit reward") {
  // Direct evaluation of both terms for every combination.
  for (int mask = 0; mask < 64; ++mask) {
    const int u[2] = {mask & 1, (mask >> 1) & 1};
    const int c[2] = {(mask >> 2) & 1, (mask >> 3) & 1};
    const int d[2] = {(mask >> 4) & 1 ? 3 : 4, (mask >> 5) & 1 ? 7 : 0};
    int expected = 0;
    for (int a = 0; a < 2; ++a) {
      const int b = 1 - a;
      const int first = (u[a] + c[a] + d[b] % 2) % 2 == 0 ? 2 : -2;
      const int second = (u[a] + d[a] % 2 + c[b]) % 2 == 0 ? 1 : -1;
      expected += first + second;
    }
    CHECK(ColourDigitReward(u, c, d) == expected);
  }
}

TEST_CASE("colour-digit oracle") {
  // Each agent can always match the sign of the larger term: |2 s + s'| is 3
  // or 1 with equal probability, so 2 per agent.
  const int parity[] = {0, 1};
  CHECK(ColourDigitOracle(parity) == doctest::Approx(4.0));
  const int four[] = {0, 1, 2, 3};
  CHECK(ColourDigitOracle(four) == doctest::Approx(4.0));
}

TEST_CASE("colour-digit game dynamics") {
  Rng rng(4);
  const int classes[] = {0, 1};
  auto data = std::make_shared<const DigitDataset>(SyntheticDigits(classes, 5, rng).Downsample(2));
  ColourDigitGame env(data);
  CHECK(env.spec().obs_dim == 2 * 14 * 14);
  CHECK(env.spec().horizon == 2);
  env.Reset(9);
  CHECK(env.Senders(0).empty());
  CHECK_FALSE(env.IsLegal(0, 1));
  const auto obs = env.Observe(0).dense;
  const int colour = env.colour(0);
  double in_other = 0.0;
  for (int i = 0; i < 196; ++i) in_other += obs[(1 - colour) * 196 + i];
  CHECK(in_other == 0.0);
  env.Step(std::vector<int>{0, 0});
  CHECK(env.Senders(0) == std::vector<int>{1});
  const int u[] = {1, 0};
  const int colours[] = {env.colour(0), env.colour(1)};
  const int digits[] = {env.digit(0), env.digit(1)};
  const StepResult r = env.Step(u);
  CHECK(r.done);
  CHECK(r.team_reward() == ColourDigitReward(u, colours, digits));
  CHECK(env.Labels() == std::vector<int>{digits[0], digits[1]});
}

TEST_CASE("multi-step reward and oracle") {
  const int guesses[] = {3, 1};
  const int digits[] = {1, 3};
  CHECK(MultiStepReward(guesses, digits) == 1.0);
  const int half[] = {3, 0};
  CHECK(MultiStepReward(half, digits) == 0.5);
  // Partition enumeration by hand.
  CHECK(MultiStepProtocolOracle(4, 2) == doctest::Approx(1.0));
  CHECK(MultiStepProtocolOracle(4, 1) == doctest::Approx(0.5));
  CHECK(MultiStepProtocolOracle(3, 1) == doctest::Approx(2.0 / 3.0));
  CHECK(MultiStepProtocolOracle(1, 1) == doctest::Approx(1.0));
}

TEST_CASE("multi-step game pays only at the end") {
  Rng rng(5);
  const int classes[] = {0, 1, 2, 3};
  auto data = std::make_shared<const DigitDataset>(SyntheticDigits(classes, 3, rng));
  MultiStepGame env(data, 3);
  CHECK(env.spec().num_actions == 10);
  CHECK(env.spec().obs_dim == 28 * 28);
  env.Reset(2);
  for (int t = 1; t < 3; ++t) {
    const StepResult r = env.Step(std::vector<int>{env.digit(1), env.digit(0)});
    CHECK_FALSE(r.done);
    CHECK(r.team_reward() == 0.0);
  }
  const StepResult r = env.Step(std::vector<int>{env.digit(1), env.digit(0)});
  CHECK(r.done);
  CHECK(r.team_reward() == 1.0);
  CHECK_THROWS_AS(env.Step(std::vector<int>{0, 0}), std::logic_error);
  CHECK(env.OracleReward() == 1.0);
}

TEST_CASE("synthetic digits are deterministic and well formed") {
  const int classes[] = {2, 7};
  Rng a(8), b(8);
  const DigitDataset x = SyntheticDigits(classes, 10, a);
  const DigitDataset y = SyntheticDigits(classes, 10, b);
  REQUIRE(x.size() == 20);
  CHECK(x.side() == 28);
  CHECK(x.classes() == std::vector<int>{2, 7});
  for (std::size_t i = 0; i < x.size(); ++i) {
    CHECK(x.at(i).pixels == y.at(i).pixels);
    for (double p : x.at(i).pixels) CHECK((p >= 0.0 && p <= 1.0));
  }
  const DigitDataset small = x.Downsample(2);
  CHECK(small.side() == 14);
  double block = 0.0;
  for (int r = 0; r < 2; ++r) {
    for (int c = 0; c < 2; ++c) block += x.at(0).pixels[r * 28 + c];
  }
  CHECK(small.at(0).pixels[0] == doctest::Approx(block / 4.0));
  CHECK_THROWS_AS(x.Downsample(3), std::invalid_argument);
  CHECK(x.FilterClasses(std::vector<int>{7}).size() == 10);
}

TEST_CASE("IDX loader") {
  const auto dir = std::filesystem::temp_directory_path();
  const auto images = dir / "commlab_images.idx";
  const auto labels = dir / "commlab_labels.idx";
  auto write = [&](std::uint32_t image_magic, int count, int label_count, bool truncate) {
    std::ofstream im(images, std::ios::binary), lb(labels, std::ios::binary);
    WriteBigEndian(im, image_magic);
    WriteBigEndian(im, count);
    WriteBigEndian(im, 28);
    WriteBigEndian(im, 28);
    const int pixels = count * 784 - (truncate ? 10 : 0);
    for (int i = 0; i < pixels; ++i) im.put(static_cast<char>(i % 256));
    WriteBigEndian(lb, kIdxLabelMagic);
    WriteBigEndian(lb, label_count);
    for (int i = 0; i < label_count; ++i) lb.put(static_cast<char>(i % 10));
  };
  write(kIdxImageMagic, 3, 3, false);
  const DigitDataset d = LoadMnist(images, labels);
  REQUIRE(d.size() == 3);
  CHECK(d.at(2).label == 2);
  CHECK(d.at(0).pixels[255] == doctest::Approx(1.0));
  CHECK(d.at(0).pixels[1] == doctest::Approx(1.0 / 255.0));

  write(0x1234, 3, 3, false);
  try {
    LoadMnist(images, labels);
    FAIL("bad magic accepted");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("commlab_images.idx") != std::string::npos);
  }
  write(kIdxImageMagic, 3, 3, true);
  CHECK_THROWS_AS(LoadMnist(images, labels), std::runtime_error);
  write(kIdxImageMagic, 3, 2, false);
  CHECK_THROWS_AS(LoadMnist(images, labels), std::runtime_error);
  std::filesystem::remove(images);
  std::filesystem::remove(labels);
}
