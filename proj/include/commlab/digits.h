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

// Grayscale digit images: the MNIST IDX reader and an offline generator of
// seven-segment digits with jitter and pixel noise.
//
// IDX layout (big-endian):
//   images: u32 0x00000803, u32 count, u32 rows, u32 cols, count*rows*cols u8
//   labels: u32 0x00000801, u32 count, count u8

#ifndef COMMLAB_DIGITS_H_
#define COMMLAB_DIGITS_H_

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "commlab/rng.h"

namespace commlab {

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

struct MnistSample {
  std::vector<double> pixels;  // side * side, row-major, in [0, 1]
  int label = 0;
};

class DigitDataset {
 public:
  DigitDataset() = default;
  DigitDataset(int side, std::vector<MnistSample> samples);

  int side() const { return side_; }
  std::size_t size() const { return samples_.size(); }
  const MnistSample& at(std::size_t i) const { return samples_.at(i); }
  // Sorted distinct labels present.
  const std::vector<int>& classes() const { return classes_; }

  DigitDataset FilterClasses(std::span<const int> keep) const;
  // Average-pools factor x factor blocks; side must divide evenly.
  DigitDataset Downsample(int factor) const;

 private:
  int side_ = 0;
  std::vector<MnistSample> samples_;
  std::vector<int> classes_;
};

// Throws std::runtime_error naming the file and byte offset on bad magic,
// truncation or an image/label count mismatch.
DigitDataset LoadMnist(const std::filesystem::path& images,
                       const std::filesystem::path& labels);

// `per_class` samples for each class in `classes`, 28 x 28.
DigitDataset SyntheticDigits(std::span<const int> classes, int per_class, Rng& rng);

// Two-channel image: the pixels go to channel `colour`, the other is zero.
std::vector<double> ColourWrap(std::span<const double> pixels, int colour);

}  // namespace commlab

#endif  // COMMLAB_DIGITS_H_
