// Copyright 2026 The fedmix Authors
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

#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "fedmix/data.hpp"
#include "fedmix/error.hpp"

namespace fedmix {

namespace {
constexpr std::size_t kSide = 32;
constexpr std::size_t kChannels = 3;
constexpr std::size_t kPixels = kSide * kSide * kChannels;
constexpr std::size_t kRecord = 1 + kPixels;
constexpr std::size_t kClasses = 10;
}  // namespace

Dataset load_cifar_bin(std::span<const std::filesystem::path> paths) {
  std::vector<std::vector<std::uint8_t>> files;
  std::size_t records = 0;
  for (const auto& path : paths) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError(path.string() + ": cannot open");
    std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in),
                                    std::istreambuf_iterator<char>()};
    if (bytes.empty() || bytes.size() % kRecord != 0) {
      throw FormatError(path.string() + ": length " + std::to_string(bytes.size()) +
                        " is not a positive multiple of " + std::to_string(kRecord));
    }
    records += bytes.size() / kRecord;
    files.push_back(std::move(bytes));
  }

  Dataset ds;
  ds.features = Matrix(records, kPixels);
  std::vector<int> labels(records);
  std::size_t row = 0;
  for (std::size_t f = 0; f < files.size(); ++f) {
    const auto& bytes = files[f];
    for (std::size_t off = 0; off < bytes.size(); off += kRecord, ++row) {
      if (bytes[off] >= kClasses) {
        throw FormatError(paths[f].string() + " @ offset " + std::to_string(off) + ": label " +
                          std::to_string(bytes[off]) + " out of range");
      }
      labels[row] = bytes[off];
      auto dst = ds.features.row(row);
      for (std::size_t p = 0; p < kPixels; ++p) dst[p] = bytes[off + 1 + p] / 255.0;
    }
  }
  ds.labels = std::move(labels);
  ds.num_classes = kClasses;
  ds.image = ImageLayout{kSide, kSide, kChannels};
  return ds;
}

}  // namespace fedmix
