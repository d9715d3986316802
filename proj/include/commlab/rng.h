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

#ifndef COMMLAB_RNG_H_
#define COMMLAB_RNG_H_

#include <cstdint>
#include <random>

namespace commlab {

using Rng = std::mt19937_64;

// Named sub-streams of the master seed, so that e.g. the exploration draws
// can change without disturbing environment sampling.
enum class Stream : std::uint32_t {
  kInit = 1,
  kEnv = 2,
  kExplore = 3,
  kNoise = 4,
  kEval = 5,
  kAnalysis = 6,
};

inline std::uint64_t StreamSeed(std::uint64_t master, Stream stream,
                                std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(master),
                    static_cast<std::uint32_t>(master >> 32),
                    static_cast<std::uint32_t>(stream),
                    static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32)};
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

inline Rng MakeRng(std::uint64_t master, Stream stream, std::uint64_t index = 0) {
  return Rng(StreamSeed(master, stream, index));
}

}  // namespace commlab

#endif  // COMMLAB_RNG_H_
