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

#include "commlab/checkpoint.h"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace commlab {
namespace {

[[noreturn]] void Malformed(const std::filesystem::path& path, std::size_t line,
                            const std::string& what) {
  throw std::runtime_error(path.string() + ":" + std::to_string(line) + ": " + what);
}

void CheckKey(const std::string& key) {
  if (key.empty() || key.find_first_of(" \t\r\n") != std::string::npos) {
    throw std::invalid_argument("checkpoint key must be non-empty without whitespace: '" +
                                key + "'");
  }
}

}  // namespace

void Checkpoint::Save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out << "commlab-checkpoint " << kCheckpointVersion << '\n';
  for (const auto& [key, value] : meta) {
    CheckKey(key);
    if (value.find('\n') != std::string::npos) {
      throw std::invalid_argument("checkpoint meta value for " + key +
                                  " contains a newline");
    }
    out << "meta " << key << ' ' << value << '\n';
  }
  char buf[32];
  for (const auto& [key, tensor] : tensors) {
    CheckKey(key);
    out << "tensor " << key << ' ' << tensor.rank();
    for (std::size_t d : tensor.shape()) out << ' ' << d;
    out << '\n';
    for (std::size_t i = 0; i < tensor.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%.17g", tensor[i]);
      if (i > 0) out << ' ';
      out << buf;
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed for checkpoint " + path.string());
}

Checkpoint Checkpoint::Load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  Checkpoint ckpt;
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line)) Malformed(path, line_no, "empty file");
  {
    std::istringstream header(line);
    std::string magic;
    int version = 0;
    header >> magic >> version;
    if (magic != "commlab-checkpoint") Malformed(path, line_no, "bad magic");
    if (version != kCheckpointVersion) {
      Malformed(path, line_no, "unsupported version " + std::to_string(version));
    }
  }
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream rec(line);
    std::string kind, key;
    rec >> kind >> key;
    if (kind == "meta") {
      std::string value;
      std::getline(rec, value);
      if (!value.empty() && value.front() == ' ') value.erase(0, 1);
      ckpt.meta[key] = value;
    } else if (kind == "tensor") {
      std::size_t rank = 0;
      if (!(rec >> rank) || rank == 0) Malformed(path, line_no, "bad rank for " + key);
      std::vector<std::size_t> shape(rank);
      std::size_t count = 1;
      for (auto& d : shape) {
        if (!(rec >> d) || d == 0) Malformed(path, line_no, "bad extent for " + key);
        count *= d;
      }
      if (!std::getline(in, line)) Malformed(path, line_no, "missing data for " + key);
      ++line_no;
      std::vector<double> data;
      data.reserve(count);
      const char* p = line.c_str();
      char* end = nullptr;
      for (std::size_t i = 0; i < count; ++i) {
        const double v = std::strtod(p, &end);
        if (end == p) Malformed(path, line_no, "too few values for " + key);
        data.push_back(v);
        p = end;
      }
      ckpt.tensors.emplace(key, Tensor(std::move(shape), std::move(data)));
    } else {
      Malformed(path, line_no, "unknown record '" + kind + "'");
    }
  }
  return ckpt;
}

void Checkpoint::Put(const std::string& prefix, const ParamSet& params) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    tensors[prefix + "/" + params.at(i).name] = params.at(i).value;
  }
}

void Checkpoint::Get(const std::string& prefix, ParamSet& params) const {
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = params.at(i);
    const std::string key = prefix + "/" + p.name;
    auto it = tensors.find(key);
    if (it == tensors.end()) {
      throw std::runtime_error("checkpoint lacks " + key);
    }
    if (!it->second.same_shape(p.value)) {
      throw std::runtime_error("checkpoint entry " + key + " has shape " +
                               it->second.shape_string() + ", expected " +
                               p.value.shape_string());
    }
    p.value = it->second;
  }
}

}  // namespace commlab
