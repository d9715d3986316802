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

// Run configuration: one "key = value" per line, '#' starts a comment.
// Unknown keys are errors. See README for the list of keys.

#ifndef COMMLAB_CONFIG_H_
#define COMMLAB_CONFIG_H_

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "commlab/cnet.h"
#include "commlab/nn.h"

namespace commlab {

inline constexpr const char* kVersion = "0.1.0";

struct EnvConfig {
  std::string name = "switch";  // switch | colour_digit | multi_step
  int n = 3;
  int horizon = 0;    // switch; 0 means 4n - 6
  int steps = 5;      // multi_step
  std::vector<int> classes;  // empty: {0, 1} colour-digit, {0, 1, 2, 3} multi-step
  int downsample = 2;
  std::string mnist_images;  // empty: synthetic digits
  std::string mnist_labels;
  int synthetic_per_class = 100;
  std::uint64_t data_seed = 7;
};

// What one unit of `episodes`, `target_reset`, `eval_every` and
// `checkpoint_every` counts: a lock-step batch of `batch` parallel games
// (one optimiser step), or a single game.
enum class EpisodeUnit { kBatch, kGame };

struct TrainConfig {
  Method method = Method::kDial;
  bool share = true;
  double gamma = 1.0;
  double epsilon = 0.05;
  int batch = 32;
  int target_reset = 100;  // episodes
  RmsPropConfig rms;
  double sigma = 2.0;
  long episodes = 10000;
  std::uint64_t seed = 1;
  int embed = 32;
  int eval_every = 100;
  int eval_episodes = 500;
  int checkpoint_every = 0;  // numbered checkpoints; 0 keeps only the latest
  EpisodeUnit episode_unit = EpisodeUnit::kBatch;
  std::string out_dir;
};

struct RunConfig {
  EnvConfig env;
  TrainConfig train;
};

// Sets one key; throws std::invalid_argument naming the key on bad input.
void ApplySetting(RunConfig& cfg, const std::string& key, const std::string& value);
RunConfig ParseConfig(std::string_view text, const std::string& source = "<text>");
RunConfig LoadConfig(const std::filesystem::path& path);
void ValidateConfig(const RunConfig& cfg);

// Canonical "key = value" listing of every setting, in a fixed order.
std::vector<std::pair<std::string, std::string>> ConfigEntries(const RunConfig& cfg);
std::string ConfigText(const RunConfig& cfg);
// FNV-1a 64 of ConfigText.
std::uint64_t ConfigHash(const RunConfig& cfg);
std::string HexHash(std::uint64_t h);

// Shortest round-tripping text for a double.
std::string FormatDouble(double v);

// CSV with a leading "# key=value, ..." metadata comment and a header row.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path,
            const std::vector<std::pair<std::string, std::string>>& meta,
            const std::vector<std::string>& header);
  ~CsvWriter();
  CsvWriter(const CsvWriter&) = delete;
  CsvWriter& operator=(const CsvWriter&) = delete;

  void Row(const std::vector<std::string>& cells);

 private:
  std::filesystem::path path_;
  std::size_t columns_;
  std::FILE* file_ = nullptr;
};

// config_hash, seed and version entries for CSV metadata.
std::vector<std::pair<std::string, std::string>> RunMetadata(const RunConfig& cfg);

}  // namespace commlab

#endif  // COMMLAB_CONFIG_H_
