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

#include "commlab/digits.h"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <set>
#include <stdexcept>
#include <string>

namespace commlab {
namespace {

std::vector<unsigned char> ReadAll(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

class IdxReader {
 public:
  IdxReader(const std::filesystem::path& path, std::vector<unsigned char> bytes)
      : path_(path), bytes_(std::move(bytes)) {}

  std::uint32_t U32() {
    Need(4, "header word");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v = (v << 8) | bytes_[offset_ + i];
    offset_ += 4;
    return v;
  }

  void Need(std::size_t n, const std::string& what) const {
    if (offset_ + n > bytes_.size()) {
      Fail("truncated while reading " + what + " (need " + std::to_string(n) +
           " bytes, " + std::to_string(bytes_.size() - offset_) + " left)");
    }
  }

  [[noreturn]] void Fail(const std::string& what) const {
    throw std::runtime_error(path_.string() + " at byte " + std::to_string(offset_) +
                             ": " + what);
  }

  const unsigned char* Take(std::size_t n, const std::string& what) {
    Need(n, what);
    const unsigned char* p = bytes_.data() + offset_;
    offset_ += n;
    return p;
  }

  std::size_t offset() const { return offset_; }

 private:
  std::filesystem::path path_;
  std::vector<unsigned char> bytes_;
  std::size_t offset_ = 0;
};

std::vector<int> DistinctLabels(const std::vector<MnistSample>& samples) {
  std::set<int> s;
  for (const auto& x : samples) s.insert(x.label);
  return {s.begin(), s.end()};
}

// Seven segments a..g as bits 0..6.
constexpr unsigned kSegments[10] = {
    0b0111111, 0b0000110, 0b1011011, 0b1001111, 0b1100110,
    0b1101101, 0b1111101, 0b0000111, 0b1111111, 0b1101111,
};

}  // namespace

DigitDataset::DigitDataset(int side, std::vector<MnistSample> samples)
    : side_(side), samples_(std::move(samples)) {
  if (side <= 0) throw std::invalid_argument("digit side must be positive");
  for (const auto& s : samples_) {
    if (s.pixels.size() != static_cast<std::size_t>(side) * side) {
      throw std::invalid_argument("digit sample has " + std::to_string(s.pixels.size()) +
                                  " pixels, expected " + std::to_string(side * side));
    }
    if (s.label < 0 || s.label > 9) {
      throw std::invalid_argument("digit label out of range: " + std::to_string(s.label));
    }
  }
  classes_ = DistinctLabels(samples_);
}

DigitDataset DigitDataset::FilterClasses(std::span<const int> keep) const {
  std::vector<MnistSample> out;
  for (const auto& s : samples_) {
    if (std::find(keep.begin(), keep.end(), s.label) != keep.end()) out.push_back(s);
  }
  return DigitDataset(side_, std::move(out));
}

DigitDataset DigitDataset::Downsample(int factor) const {
  if (factor <= 0 || side_ % factor != 0) {
    throw std::invalid_argument("downsample factor " + std::to_string(factor) +
                                " does not divide side " + std::to_string(side_));
  }
  if (factor == 1) return *this;
  const int side = side_ / factor;
  const double inv = 1.0 / (factor * factor);
  std::vector<MnistSample> out;
  out.reserve(samples_.size());
  for (const auto& s : samples_) {
    MnistSample d;
    d.label = s.label;
    d.pixels.assign(static_cast<std::size_t>(side) * side, 0.0);
    for (int r = 0; r < side_; ++r) {
      for (int c = 0; c < side_; ++c) {
        d.pixels[(r / factor) * side + c / factor] += s.pixels[r * side_ + c] * inv;
      }
    }
    out.push_back(std::move(d));
  }
  return DigitDataset(side, std::move(out));
}

DigitDataset LoadMnist(const std::filesystem::path& images,
                       const std::filesystem::path& labels) {
  IdxReader img(images, ReadAll(images));
  if (const auto magic = img.U32(); magic != kIdxImageMagic) {
    img.Fail("bad image magic " + std::to_string(magic));
  }
  const std::uint32_t count = img.U32();
  const std::uint32_t rows = img.U32();
  const std::uint32_t cols = img.U32();
  if (rows == 0 || rows != cols) img.Fail("expected square images");

  IdxReader lab(labels, ReadAll(labels));
  if (const auto magic = lab.U32(); magic != kIdxLabelMagic) {
    lab.Fail("bad label magic " + std::to_string(magic));
  }
  const std::uint32_t label_count = lab.U32();
  if (label_count != count) {
    lab.Fail("label count " + std::to_string(label_count) + " != image count " +
             std::to_string(count));
  }

  const std::size_t pixels = static_cast<std::size_t>(rows) * cols;
  std::vector<MnistSample> samples(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    const unsigned char* p = img.Take(pixels, "image " + std::to_string(i));
    samples[i].pixels.resize(pixels);
    for (std::size_t k = 0; k < pixels; ++k) samples[i].pixels[k] = p[k] / 255.0;
    const unsigned char label = *lab.Take(1, "label " + std::to_string(i));
    if (label > 9) lab.Fail("label value " + std::to_string(label));
    samples[i].label = label;
  }
  return DigitDataset(static_cast<int>(rows), std::move(samples));
}

DigitDataset SyntheticDigits(std::span<const int> classes, int per_class, Rng& rng) {
  constexpr int kSide = 28;
  std::uniform_int_distribution<int> shift(-2, 2);
  std::uniform_int_distribution<int> thick(2, 3);
  std::uniform_real_distribution<double> ink(0.7, 1.0);
  std::normal_distribution<double> noise(0.0, 0.1);
  std::vector<MnistSample> out;
  for (int label : classes) {
    if (label < 0 || label > 9) {
      throw std::invalid_argument("synthetic digit class " + std::to_string(label));
    }
    for (int k = 0; k < per_class; ++k) {
      std::vector<double> img(kSide * kSide, 0.0);
      const int dx = shift(rng), dy = shift(rng), w = thick(rng);
      const double level = ink(rng);
      const int x0 = 8 + dx, x1 = 19 + dx, y0 = 4 + dy, ym = 13 + dy, y1 = 22 + dy;
      auto rect = [&](int ra, int rb, int ca, int cb) {
        for (int r = std::max(ra, 0); r <= std::min(rb, kSide - 1); ++r) {
          for (int c = std::max(ca, 0); c <= std::min(cb, kSide - 1); ++c) {
            img[r * kSide + c] = level;
          }
        }
      };
      const unsigned seg = kSegments[label];
      if (seg & 1u) rect(y0, y0 + w - 1, x0, x1);             // a
      if (seg & 2u) rect(y0, ym, x1 - w + 1, x1);             // b
      if (seg & 4u) rect(ym, y1, x1 - w + 1, x1);             // c
      if (seg & 8u) rect(y1 - w + 1, y1, x0, x1);             // d
      if (seg & 16u) rect(ym, y1, x0, x0 + w - 1);            // e
      if (seg & 32u) rect(y0, ym, x0, x0 + w - 1);            // f
      if (seg & 64u) rect(ym - w / 2, ym - w / 2 + w - 1, x0, x1);  // g
      for (double& v : img) v = std::clamp(v + noise(rng), 0.0, 1.0);
      out.push_back({std::move(img), label});
    }
  }
  return DigitDataset(kSide, std::move(out));
}

std::vector<double> ColourWrap(std::span<const double> pixels, int colour) {
  if (colour != 0 && colour != 1) {
    throw std::invalid_argument("colour must be 0 or 1");
  }
  std::vector<double> out(2 * pixels.size(), 0.0);
  std::copy(pixels.begin(), pixels.end(), out.begin() + colour * pixels.size());
  return out;
}

}  // namespace commlab
