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

#include "commlab/config.h"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace commlab {
namespace {

std::string Trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void Bad(const std::string& key, const std::string& value,
                      const std::string& why) {
  throw std::invalid_argument("config key '" + key + "': bad value '" + value + "' (" +
                              why + ")");
}

template <typename T>
T ParseNumber(const std::string& key, const std::string& value) {
  T out{};
  const char* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) Bad(key, value, "not a number");
  if constexpr (std::is_floating_point_v<T>) {
    if (!std::isfinite(out)) Bad(key, value, "not finite");
  }
  return out;
}

bool ParseBool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
  if (value == "false" || value == "0" || value == "no" || value == "off") return false;
  Bad(key, value, "expected true/false");
}

std::vector<int> ParseList(const std::string& key, const std::string& value) {
  std::vector<int> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = Trim(item);
    if (item.empty()) continue;
    out.push_back(ParseNumber<int>(key, item));
  }
  return out;
}

std::string JoinList(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(v[i]);
  }
  return s;
}

}  // namespace

std::string FormatDouble(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

void ApplySetting(RunConfig& cfg, const std::string& key, const std::string& value) {
  EnvConfig& e = cfg.env;
  TrainConfig& t = cfg.train;
  if (key == "env") {
    e.name = value;
  } else if (key == "n") {
    e.n = ParseNumber<int>(key, value);
  } else if (key == "horizon") {
    e.horizon = ParseNumber<int>(key, value);
  } else if (key == "steps") {
    e.steps = ParseNumber<int>(key, value);
  } else if (key == "classes") {
    e.classes = ParseList(key, value);
  } else if (key == "downsample") {
    e.downsample = ParseNumber<int>(key, value);
  } else if (key == "mnist_images") {
    e.mnist_images = value;
  } else if (key == "mnist_labels") {
    e.mnist_labels = value;
  } else if (key == "synthetic_per_class") {
    e.synthetic_per_class = ParseNumber<int>(key, value);
  } else if (key == "data_seed") {
    e.data_seed = ParseNumber<std::uint64_t>(key, value);
  } else if (key == "method") {
    try {
      t.method = ParseMethod(value);
    } catch (const std::invalid_argument&) {
      Bad(key, value, "expected rial, dial or nocomm");
    }
  } else if (key == "share") {
    t.share = ParseBool(key, value);
  } else if (key == "gamma") {
    t.gamma = ParseNumber<double>(key, value);
  } else if (key == "epsilon") {
    t.epsilon = ParseNumber<double>(key, value);
  } else if (key == "batch") {
    t.batch = ParseNumber<int>(key, value);
  } else if (key == "target_reset") {
    t.target_reset = ParseNumber<int>(key, value);
  } else if (key == "lr") {
    t.rms.learning_rate = ParseNumber<double>(key, value);
  } else if (key == "rms_decay") {
    t.rms.decay = ParseNumber<double>(key, value);
  } else if (key == "rms_eps") {
    t.rms.eps = ParseNumber<double>(key, value);
  } else if (key == "grad_clip") {
    const double c = ParseNumber<double>(key, value);
    if (c > 0) {
      t.rms.clip = c;
    } else {
      t.rms.clip.reset();
    }
  } else if (key == "sigma") {
    t.sigma = ParseNumber<double>(key, value);
  } else if (key == "episodes") {
    t.episodes = ParseNumber<long>(key, value);
  } else if (key == "seed") {
    t.seed = ParseNumber<std::uint64_t>(key, value);
  } else if (key == "embed") {
    t.embed = ParseNumber<int>(key, value);
  } else if (key == "eval_every") {
    t.eval_every = ParseNumber<int>(key, value);
  } else if (key == "eval_episodes") {
    t.eval_episodes = ParseNumber<int>(key, value);
  } else if (key == "checkpoint_every") {
    t.checkpoint_every = ParseNumber<int>(key, value);
  } else if (key == "episode_unit") {
    if (value == "batch") {
      t.episode_unit = EpisodeUnit::kBatch;
    } else if (value == "game") {
      t.episode_unit = EpisodeUnit::kGame;
    } else {
      throw std::invalid_argument("episode_unit: expected batch or game, got '" + value + "'");
    }
  } else if (key == "out_dir") {
    t.out_dir = value;
  } else {
    throw std::invalid_argument("unknown config key '" + key + "'");
  }
}

RunConfig ParseConfig(std::string_view text, const std::string& source) {
  RunConfig cfg;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = Trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument(source + ":" + std::to_string(line_no) +
                                  ": expected 'key = value'");
    }
    try {
      ApplySetting(cfg, Trim(line.substr(0, eq)), Trim(line.substr(eq + 1)));
    } catch (const std::invalid_argument& err) {
      throw std::invalid_argument(source + ":" + std::to_string(line_no) + ": " +
                                  err.what());
    }
  }
  ValidateConfig(cfg);
  return cfg;
}

RunConfig LoadConfig(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ParseConfig(ss.str(), path.string());
}

void ValidateConfig(const RunConfig& cfg) {
  const EnvConfig& e = cfg.env;
  const TrainConfig& t = cfg.train;
  auto fail = [](const std::string& what) { throw std::invalid_argument("config: " + what); };
  if (e.name != "switch" && e.name != "colour_digit" && e.name != "multi_step") {
    fail("env must be switch, colour_digit or multi_step");
  }
  if (e.n < 1 || e.n > 10) fail("n must be in 1..10");
  if (e.horizon < 0) fail("horizon must be >= 0");
  if (e.steps < 1) fail("steps must be >= 1");
  if (e.downsample < 1) fail("downsample must be >= 1");
  if (e.mnist_images.empty() != e.mnist_labels.empty()) {
    fail("mnist_images and mnist_labels go together");
  }
  if (e.synthetic_per_class < 1) fail("synthetic_per_class must be >= 1");
  for (int c : e.classes) {
    if (c < 0 || c > 9) fail("classes must be digits 0..9");
  }
  if (!(t.gamma >= 0.0 && t.gamma <= 1.0)) fail("gamma must be in [0, 1]");
  if (!(t.epsilon >= 0.0 && t.epsilon <= 1.0)) fail("epsilon must be in [0, 1]");
  if (t.batch < 2) fail("batch must be >= 2 (batch normalisation)");
  if (t.target_reset < 1) fail("target_reset must be >= 1");
  if (!(t.rms.learning_rate > 0.0)) fail("lr must be > 0");
  if (!(t.rms.decay >= 0.0 && t.rms.decay < 1.0)) fail("rms_decay must be in [0, 1)");
  if (!(t.rms.eps > 0.0)) fail("rms_eps must be > 0");
  if (!(t.sigma >= 0.0)) fail("sigma must be >= 0");
  if (t.episodes < 0) fail("episodes must be >= 0");
  if (t.embed < 1) fail("embed must be >= 1");
  if (t.eval_every < 1) fail("eval_every must be >= 1");
  if (t.eval_episodes < 2) fail("eval_episodes must be >= 2");
  if (t.checkpoint_every < 0) fail("checkpoint_every must be >= 0");
}

std::vector<std::pair<std::string, std::string>> ConfigEntries(const RunConfig& cfg) {
  const EnvConfig& e = cfg.env;
  const TrainConfig& t = cfg.train;
  return {
      {"env", e.name},
      {"n", std::to_string(e.n)},
      {"horizon", std::to_string(e.horizon)},
      {"steps", std::to_string(e.steps)},
      {"classes", JoinList(e.classes)},
      {"downsample", std::to_string(e.downsample)},
      {"mnist_images", e.mnist_images},
      {"mnist_labels", e.mnist_labels},
      {"synthetic_per_class", std::to_string(e.synthetic_per_class)},
      {"data_seed", std::to_string(e.data_seed)},
      {"method", MethodName(t.method)},
      {"share", t.share ? "true" : "false"},
      {"gamma", FormatDouble(t.gamma)},
      {"epsilon", FormatDouble(t.epsilon)},
      {"batch", std::to_string(t.batch)},
      {"target_reset", std::to_string(t.target_reset)},
      {"lr", FormatDouble(t.rms.learning_rate)},
      {"rms_decay", FormatDouble(t.rms.decay)},
      {"rms_eps", FormatDouble(t.rms.eps)},
      {"grad_clip", t.rms.clip ? FormatDouble(*t.rms.clip) : "0"},
      {"sigma", FormatDouble(t.sigma)},
      {"episodes", std::to_string(t.episodes)},
      {"seed", std::to_string(t.seed)},
      {"embed", std::to_string(t.embed)},
      {"eval_every", std::to_string(t.eval_every)},
      {"eval_episodes", std::to_string(t.eval_episodes)},
      {"checkpoint_every", std::to_string(t.checkpoint_every)},
      {"episode_unit", t.episode_unit == EpisodeUnit::kBatch ? "batch" : "game"},
      {"out_dir", t.out_dir},
  };
}

std::string ConfigText(const RunConfig& cfg) {
  std::string s;
  for (const auto& [k, v] : ConfigEntries(cfg)) s += k + " = " + v + "\n";
  return s;
}

std::uint64_t ConfigHash(const RunConfig& cfg) {
  // out_dir does not change results.
  RunConfig copy = cfg;
  copy.train.out_dir.clear();
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : ConfigText(copy)) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string HexHash(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::vector<std::pair<std::string, std::string>> RunMetadata(const RunConfig& cfg) {
  return {{"config_hash", HexHash(ConfigHash(cfg))},
          {"seed", std::to_string(cfg.train.seed)},
          {"version", kVersion}};
}

CsvWriter::CsvWriter(const std::filesystem::path& path,
                     const std::vector<std::pair<std::string, std::string>>& meta,
                     const std::vector<std::string>& header)
    : path_(path), columns_(header.size()) {
  file_ = std::fopen(path.string().c_str(), "w");
  if (file_ == nullptr) throw std::runtime_error("cannot write " + path.string());
  std::string line = "#";
  for (std::size_t i = 0; i < meta.size(); ++i) {
    line += (i ? ", " : " ") + meta[i].first + "=" + meta[i].second;
  }
  std::fprintf(file_, "%s\n", line.c_str());
  Row(header);
}

CsvWriter::~CsvWriter() {
  if (file_ != nullptr) std::fclose(file_);
}

void CsvWriter::Row(const std::vector<std::string>& cells) {
  if (cells.size() != columns_) {
    throw std::invalid_argument("csv " + path_.string() + ": row has " +
                                std::to_string(cells.size()) + " cells, header has " +
                                std::to_string(columns_));
  }
  std::string line;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) line += ',';
    line += cells[i];
  }
  std::fprintf(file_, "%s\n", line.c_str());
  std::fflush(file_);
}

}  // namespace commlab
