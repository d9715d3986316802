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


#include <cstdint>
#include <string>
#include <vector>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "commlab/analysis.h"
#include "commlab/config.h"
#include "commlab/dru.h"
#include "commlab/env.h"
#include "commlab/trainer.h"

namespace py = pybind11;
using namespace commlab;

namespace {

RunConfig FromDict(const py::dict& settings) {
  RunConfig cfg;
  for (auto item : settings) {
    const std::string key = py::str(item.first);
    py::handle v = item.second;
    std::string value;
    if (py::isinstance<py::bool_>(v)) {
      value = v.cast<bool>() ? "true" : "false";
    } else if (py::isinstance<py::list>(v) || py::isinstance<py::tuple>(v)) {
      for (auto x : v) value += (value.empty() ? "" : ",") + std::string(py::str(x));
    } else {
      value = py::str(v);
    }
    ApplySetting(cfg, key, value);
  }
  ValidateConfig(cfg);
  return cfg;
}

py::dict ToDict(const RunConfig& cfg) {
  py::dict d;
  for (const auto& [k, v] : ConfigEntries(cfg)) d[py::str(k)] = v;
  return d;
}

py::dict RowDict(const CurveRow& r) {
  py::dict d;
  d["episode"] = r.episode;
  d["raw_reward"] = r.raw_reward;
  d["norm_reward"] = r.norm_reward;
  d["loss"] = r.loss;
  d["saturation_frac"] = r.saturation;
  return d;
}

py::list CurveList(const LearningCurve& c) {
  py::list out;
  for (const auto& r : c.rows) out.append(RowDict(r));
  return out;
}

DruMode ParseMode(const std::string& s) {
  if (s == "train") return DruMode::kTrain;
  if (s == "exec") return DruMode::kExec;
  throw std::invalid_argument("mode must be 'train' or 'exec'");
}

}  // namespace

PYBIND11_MODULE(_commlab, m) {
  m.doc() = "Communicating agents: training, channel and analysis utilities";
  m.attr("__version__") = kVersion;

  py::register_exception<TrainingDiverged>(m, "TrainingDiverged", PyExc_RuntimeError);

  m.def("default_config", [] { return ToDict(RunConfig{}); },
        "All configuration keys with their default values, as strings.");
  m.def("parse_config", [](const std::string& text) { return ToDict(ParseConfig(text)); },
        py::arg("text"));
  m.def("config_hash", [](const py::dict& s) { return HexHash(ConfigHash(FromDict(s))); },
        py::arg("settings"));

  py::class_<Trainer>(m, "Trainer")
      .def(py::init([](const py::dict& s) { return new Trainer(FromDict(s)); }),
           py::arg("settings") = py::dict())
      .def("train_batch", &Trainer::TrainBatch, py::call_guard<py::gil_scoped_release>())
      .def("run", [](Trainer& t) {
             LearningCurve c;
             {
               py::gil_scoped_release release;
               c = t.Run();
             }
             return CurveList(c);
           })
      .def("evaluate",
           [](Trainer& t, int episodes, std::uint64_t seed) {
             const EvalResult r = t.Evaluate(episodes, seed);
             py::dict d;
             d["mean"] = r.mean;
             d["std_error"] = r.std_error;
             d["norm_reward"] = r.normalized;
             return d;
           },
           py::arg("episodes") = 500, py::arg("seed") = 1)
      .def("save_checkpoint", &Trainer::SaveCheckpoint, py::arg("path"))
      .def("load_checkpoint", &Trainer::LoadCheckpoint, py::arg("path"))
      .def_property_readonly("episodes_done", &Trainer::episodes_done)
      .def_property_readonly("target_syncs", &Trainer::target_syncs)
      .def_property_readonly("oracle", [](const Trainer& t) { return t.factory().oracle(); })
      .def_property_readonly("config", [](const Trainer& t) { return ToDict(t.config()); })
      .def_property_readonly("curve", [](const Trainer& t) { return CurveList(t.curve()); })
      .def("switch_protocol",
           [](Trainer& t, int episodes, std::uint64_t seed) {
             const auto& spec = t.factory().spec();
             if (spec.name != "switch") throw std::invalid_argument("not a switch run");
             const TrajectoryBatch tb = SampleEpisodes(t.team(), t.factory(), episodes, seed,
                                                       DruMode::kExec, t.config().train.sigma);
             const SwitchProtocol p = ExtractSwitchProtocol(tb, spec.num_agents, spec.horizon);
             py::list rows;
             for (const auto& r : p.rows) {
               py::dict d;
               d["day"] = r.day;
               d["bit_seen"] = r.bit_seen;
               d["visited_before"] = r.visited_before;
               d["samples"] = r.samples;
               d["action"] = r.action == kTell ? "tell" : "none";
               d["bit"] = r.bit;
               rows.append(d);
             }
             py::dict out;
             out["rows"] = rows;
             out["consistency"] = p.consistency;
             out["replay_norm_reward"] = p.replay_normalized;
             out["optimal"] = p.optimal;
             return out;
           },
           py::arg("episodes") = 1000, py::arg("seed") = 1);

  m.def("switch_oracle", &SwitchOracleExact, py::arg("n"), py::arg("horizon"));
  m.def("switch_horizon", &SwitchHorizon, py::arg("n"));
  m.def("policy_space_exponent",
        [](int horizon) { return py::int_(py::str(PolicySpaceExponent(horizon).str())); },
        py::arg("horizon"));
  m.def("colour_digit_reward",
        [](std::vector<int> a, std::vector<int> c, std::vector<int> d) {
          return ColourDigitReward(a, c, d);
        },
        py::arg("actions"), py::arg("colours"), py::arg("digits"));
  m.def("multi_step_protocol_oracle", &MultiStepProtocolOracle, py::arg("classes"),
        py::arg("bits"));

  m.def("channel",
        [](std::vector<double> logits, double sigma, const std::string& mode, std::uint64_t seed) {
          Rng rng(seed);
          return Dru(logits, DruConfig{sigma, ParseMode(mode)}, rng);
        },
        py::arg("logits"), py::arg("sigma"), py::arg("mode") = "train", py::arg("seed") = 1);
  m.def("channel_density", &ChannelDensity, py::arg("value"), py::arg("logit"), py::arg("sigma"));
  m.def("channel_cdf", &ChannelCdf, py::arg("value"), py::arg("logit"), py::arg("sigma"));
  m.def("decodable_levels",
        [](double sigma, double epsilon, double lo, double hi) {
          const DecodableLevels l = ComputeDecodableLevels(sigma, epsilon, lo, hi);
          py::dict d;
          d["count"] = l.count;
          d["values"] = l.values;
          py::list iv;
          for (const auto& i : l.intervals) iv.append(py::make_tuple(i.lo, i.hi));
          d["intervals"] = iv;
          d["diagnostic"] = l.diagnostic;
          return d;
        },
        py::arg("sigma"), py::arg("epsilon") = 0.1, py::arg("lo") = -10.0, py::arg("hi") = 10.0);

  m.def("parity_demo",
        [](int draws, std::uint64_t seed) {
          const ParityReport r = ToyParityDemo(draws, seed);
          py::dict d;
          d["expected_reward_fixed_action"] =
              py::make_tuple(r.expected_reward_fixed_action[0], r.expected_reward_fixed_action[1]);
          d["expected_td_update"] = r.expected_td_update;
          d["dial_gradient_norm"] = r.dial_gradient_norm;
          return d;
        },
        py::arg("draws") = 20, py::arg("seed") = 1);

  m.def("gradcheck",
        [](std::uint64_t seed) {
          py::list out;
          for (const auto& r : RunGradCheckSuite(seed)) {
            py::dict d;
            d["suite"] = r.suite;
            d["name"] = r.name;
            d["max_rel_error"] = r.max_rel_error;
            d["tolerance"] = r.tolerance;
            d["passed"] = r.passed;
            out.append(d);
          }
          return out;
        },
        py::arg("seed") = 1);
}
