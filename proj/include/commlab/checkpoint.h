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

// Checkpoint file format, version 1 (plain text, one record per line):
//
//   commlab-checkpoint 1
//   meta <key> <value...>                  (value runs to end of line)
//   tensor <key> <rank> <d0> ... <dr-1>
//   <v0> <v1> ...                          (row-major, %.17g, one line)
//
// Keys are layer paths such as "agent0/online/gru1/w_update" and must not
// contain whitespace. Values written with 17 significant digits read back
// bit-exactly.

#ifndef COMMLAB_CHECKPOINT_H_
#define COMMLAB_CHECKPOINT_H_

#include <filesystem>
#include <map>
#include <string>

#include "commlab/autodiff.h"
#include "commlab/tensor.h"

namespace commlab {

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  std::map<std::string, std::string> meta;
  std::map<std::string, Tensor> tensors;

  void Save(const std::filesystem::path& path) const;
  static Checkpoint Load(const std::filesystem::path& path);

  // Stores every parameter of `params` under "<prefix>/<name>".
  void Put(const std::string& prefix, const ParamSet& params);
  // Restores every parameter of `params`; throws if one is missing or has a
  // different shape.
  void Get(const std::string& prefix, ParamSet& params) const;
};

}  // namespace commlab

#endif  // COMMLAB_CHECKPOINT_H_
