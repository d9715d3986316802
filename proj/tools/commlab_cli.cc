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

// commlab: train, evaluate and inspect communicating agents.
//
// Every subcommand prints one JSON object on stdout when it succeeds. On
// failure it prints one JSON line {"error": kind, "message": ...} on stderr
// and exits 2 for usage errors, 1 otherwise.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "commlab/analysis.h"
#include "commlab/trainer.h"

namespace {

using commlab::RunConfig;
using json = nlohmann::json;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<double> sigma;
  std::optional<long> episodes;
  std::optional<std::string> out_dir;
};

void AddOverrides(CLI::App* cmd, Overrides& o, bool need_config) {
  auto* c = cmd->add_option("--config", o.config, "run configuration file");
  if (need_config) c->required();
  cmd->add_option("--seed", o.seed, "master seed");
  cmd->add_option("--sigma", o.sigma, "channel noise");
  cmd->add_option("--episodes", o.episodes, "training budget");
  cmd->add_option("--out-dir", o.out_dir, "output directory");
}

void Apply(RunConfig& cfg, const Overrides& o) {
  if (o.seed) cfg.train.seed = *o.seed;
  if (o.sigma) cfg.train.sigma = *o.sigma;
  if (o.episodes) cfg.train.episodes = *o.episodes;
  if (o.out_dir) cfg.train.out_dir = *o.out_dir;
  commlab::ValidateConfig(cfg);
}

RunConfig LoadWithOverrides(const Overrides& o) {
  if (!std::filesystem::exists(o.config)) throw UsageError("config not found: " + o.config);
  RunConfig cfg = commlab::LoadConfig(o.config);
  Apply(cfg, o);
  return cfg;
}

std::filesystem::path RequireOutDir(const RunConfig& cfg) {
  if (cfg.train.out_dir.empty()) throw UsageError("--out-dir (or out_dir) is required");
  std::error_code ec;
  std::filesystem::create_directories(cfg.train.out_dir, ec);
  if (ec) throw UsageError("cannot create out dir " + cfg.train.out_dir + ": " + ec.message());
  return cfg.train.out_dir;
}

// Configuration for a checkpoint: the one stored inside, unless a config
// file is given; flag overrides apply on top.
RunConfig CheckpointRunConfig(const commlab::Checkpoint& ckpt, const Overrides& o) {
  RunConfig cfg = o.config.empty() ? commlab::Trainer::CheckpointConfig(ckpt)
                                   : commlab::LoadConfig(o.config);
  Apply(cfg, o);
  return cfg;
}

commlab::Checkpoint LoadCheckpointFile(const std::string& path) {
  if (!std::filesystem::exists(path)) throw UsageError("checkpoint not found: " + path);
  return commlab::Checkpoint::Load(path);
}

json CurveJson(const commlab::LearningCurve& curve) {
  json j;
  j["eval_points"] = curve.rows.size();
  j["best_norm_reward"] = curve.best_norm();
  j["final_norm_reward"] = curve.final_norm();
  if (!curve.rows.empty()) j["final_saturation"] = curve.rows.back().saturation;
  return j;
}

int Train(const Overrides& o) {
  RunConfig cfg = LoadWithOverrides(o);
  RequireOutDir(cfg);
  commlab::Trainer trainer(cfg);
  json j = CurveJson(trainer.Run());
  j["command"] = "train";
  j["out_dir"] = cfg.train.out_dir;
  j["config_hash"] = commlab::HexHash(commlab::ConfigHash(cfg));
  std::cout << j.dump() << "\n";
  return 0;
}

int Eval(const Overrides& o, const std::string& checkpoint, int episodes) {
  const commlab::Checkpoint ckpt = LoadCheckpointFile(checkpoint);
  commlab::Trainer trainer(CheckpointRunConfig(ckpt, o));
  trainer.RestoreCheckpoint(ckpt);
  const commlab::EvalResult ev = trainer.Evaluate(episodes);
  json j;
  j["command"] = "eval";
  j["episodes"] = episodes;
  j["mean_reward"] = ev.mean;
  j["std_error"] = ev.std_error;
  j["norm_reward"] = ev.normalized;
  j["oracle"] = trainer.factory().oracle();
  std::cout << j.dump() << "\n";
  return 0;
}

int Analyze(const Overrides& o, const std::string& checkpoint, int episodes) {
  const commlab::Checkpoint ckpt = LoadCheckpointFile(checkpoint);
  RunConfig cfg = CheckpointRunConfig(ckpt, o);
  const std::filesystem::path out = RequireOutDir(cfg);
  commlab::Trainer trainer(cfg);
  trainer.RestoreCheckpoint(ckpt);
  const auto meta = commlab::RunMetadata(cfg);
  const std::uint64_t seed = commlab::StreamSeed(cfg.train.seed, commlab::Stream::kAnalysis, 1);
  json j;
  j["command"] = "analyze";
  const commlab::TrajectoryBatch tb = commlab::SampleEpisodes(
      trainer.team(), trainer.factory(), episodes, seed, commlab::DruMode::kExec,
      cfg.train.sigma);
  if (cfg.env.name == "switch") {
    const auto& spec = trainer.factory().spec();
    const commlab::SwitchProtocol p =
        commlab::ExtractSwitchProtocol(tb, spec.num_agents, spec.horizon);
    commlab::WriteSwitchProtocolCsv(out / "protocol.csv", meta, p);
    j["protocol"] = {{"consistency", p.consistency},
                     {"replay_norm_reward", p.replay_normalized},
                     {"optimal", p.optimal},
                     {"low_consistency", p.low_consistency}};
  } else {
    json codes = json::array();
    for (int a = 0; a < tb.agents; ++a) {
      const commlab::DigitCodeTable t = commlab::ExtractDigitCodes(tb, a);
      commlab::WriteDigitCodesCsv(out / ("codes_agent" + std::to_string(a) + ".csv"), meta, t);
      codes.push_back({{"agent", a}, {"consistency", t.consistency}, {"injective", t.injective}});
    }
    j["codes"] = codes;
  }
  if (cfg.train.method == commlab::Method::kDial) {
    const commlab::ActivationReport rep = commlab::ActivationHistogram(
        trainer.team(), trainer.factory(), cfg.train.sigma, episodes, seed);
    commlab::WriteHistogramCsv(out / "histogram_message.csv", meta, rep.message);
    commlab::WriteHistogramCsv(out / "histogram_logit.csv", meta, rep.logit);
    j["saturation"] = rep.saturation;
  }
  std::cout << j.dump() << "\n";
  return 0;
}

int Sweep(const Overrides& o, const std::vector<double>& sigmas, const std::vector<int>& steps,
          bool levels, double epsilon) {
  json j;
  j["command"] = "sweep";
  if (levels) {
    RunConfig cfg;
    if (!o.config.empty()) cfg = commlab::LoadConfig(o.config);
    Apply(cfg, o);
    const std::filesystem::path out = RequireOutDir(cfg);
    auto meta = commlab::RunMetadata(cfg);
    commlab::WriteLevelsCsv(out / "levels.csv", meta, sigmas, epsilon, -10.0, 10.0);
    json counts = json::array();
    for (double s : sigmas) {
      counts.push_back({{"sigma", s},
                        {"levels", commlab::ComputeDecodableLevels(s, epsilon, -10.0, 10.0).count}});
    }
    j["levels"] = counts;
    std::cout << j.dump() << "\n";
    return 0;
  }
  RunConfig cfg = LoadWithOverrides(o);
  const std::filesystem::path out = RequireOutDir(cfg);
  auto meta = commlab::RunMetadata(cfg);
  meta.emplace_back("budget_episodes", std::to_string(cfg.train.episodes));
  meta.emplace_back("budget_note", "reduced desk-scale budget");
  const auto cells = commlab::SigmaSweep(cfg, sigmas, steps, [](const commlab::SweepCell& c) {
    std::cerr << "sigma=" << c.sigma << " steps=" << c.steps << " ratio=" << c.ratio
              << " status=" << c.status << "\n";
  });
  commlab::WriteSweepCsv(out / "sweep.csv", meta, cells);
  j["cells"] = cells.size();
  std::cout << j.dump() << "\n";
  return 0;
}

int DemoParity(int draws, std::uint64_t seed) {
  const commlab::ParityReport r = commlab::ToyParityDemo(draws, seed);
  json j;
  j["command"] = "demo-parity";
  j["expected_reward_fixed_action"] = {r.expected_reward_fixed_action[0],
                                       r.expected_reward_fixed_action[1]};
  j["expected_td_update"] = r.expected_td_update;
  j["dial_gradient_norm"] = r.dial_gradient_norm;
  int nonzero = 0;
  for (double g : r.dial_gradient_norm) nonzero += g > 0.0;
  j["nonzero_gradients"] = nonzero;
  std::cout << j.dump() << "\n";
  return 0;
}

int GradCheckAll(std::uint64_t seed) {
  const auto rows = commlab::RunGradCheckSuite(seed);
  bool ok = true;
  std::fprintf(stderr, "%-10s %-30s %12s %10s %8s\n", "suite", "name", "max_rel_err", "tolerance",
               "result");
  json table = json::array();
  for (const auto& r : rows) {
    std::fprintf(stderr, "%-10s %-30s %12.3e %10.0e %8s\n", r.suite.c_str(), r.name.c_str(),
                 r.max_rel_error, r.tolerance, r.passed ? "pass" : "FAIL");
    table.push_back({{"suite", r.suite},
                     {"name", r.name},
                     {"max_rel_error", r.max_rel_error},
                     {"passed", r.passed}});
    ok = ok && r.passed;
  }
  json j;
  j["command"] = "gradcheck";
  j["passed"] = ok;
  j["checks"] = table;
  std::cout << j.dump() << "\n";
  return ok ? 0 : 1;
}

void ErrorLine(const std::string& kind, const std::string& message) {
  std::cerr << json{{"error", kind}, {"message", message}}.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Train, evaluate and inspect communicating agents"};
  app.require_subcommand(1);
  Overrides o;
  std::string checkpoint;
  int episodes = 1000;
  std::vector<double> sigmas = {0.0, 0.5, 1.0, 1.5, 2.0};
  std::vector<int> steps = {2, 3, 4, 5};
  bool levels = false;
  double epsilon = 0.1;
  int draws = 20;
  std::uint64_t seed = 1;

  auto* train = app.add_subcommand("train", "train and write curve.csv plus checkpoints");
  AddOverrides(train, o, true);

  auto* eval = app.add_subcommand("eval", "greedy evaluation of a checkpoint");
  AddOverrides(eval, o, false);
  eval->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  eval->add_option("--eval-episodes", episodes, "episodes")->check(CLI::Range(2, 1000000));

  auto* analyze = app.add_subcommand("analyze", "protocol tables and message histograms");
  AddOverrides(analyze, o, false);
  analyze->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  analyze->add_option("--samples", episodes, "sampled episodes")->check(CLI::Range(2, 1000000));

  auto* sweep = app.add_subcommand("sweep", "noise sweep, or decodable levels with --levels");
  AddOverrides(sweep, o, false);
  sweep->add_option("--sigmas", sigmas, "noise levels")->delimiter(',');
  sweep->add_option("--steps", steps, "multi-step lengths")->delimiter(',');
  sweep->add_flag("--levels", levels, "decodable levels instead of training");
  sweep->add_option("--epsilon", epsilon, "density threshold for --levels");

  auto* parity = app.add_subcommand("demo-parity", "expected updates in the parity toy game");
  parity->add_option("--draws", draws, "receiver initialisations")->check(CLI::Range(1, 100000));
  parity->add_option("--seed", seed, "seed");

  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference suite");
  gradcheck->add_option("--seed", seed, "seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    ErrorLine("usage", e.what());
    return 2;
  }

  try {
    if (*train) return Train(o);
    if (*eval) return Eval(o, checkpoint, episodes);
    if (*analyze) return Analyze(o, checkpoint, episodes);
    if (*sweep) {
      if (!levels && o.config.empty()) throw UsageError("sweep needs --config");
      return Sweep(o, sigmas, steps, levels, epsilon);
    }
    if (*parity) return DemoParity(draws, seed);
    if (*gradcheck) return GradCheckAll(seed);
  } catch (const UsageError& e) {
    ErrorLine("usage", e.what());
    return 2;
  } catch (const std::invalid_argument& e) {
    ErrorLine("config", e.what());
    return 2;
  } catch (const commlab::TrainingDiverged& e) {
    ErrorLine("diverged", e.what());
    return 1;
  } catch (const std::exception& e) {
    ErrorLine("runtime", e.what());
    return 1;
  }
  return 0;
}
