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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include "fedmix/data.hpp"
#include "fedmix/error.hpp"

namespace fedmix {

namespace {

constexpr std::uint32_t kLabelMagic = 0x00000801;
constexpr std::uint32_t kImageMagic = 0x00000803;

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(path.string() + ": cannot open");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string at(const std::filesystem::path& path, std::size_t offset) {
  return path.string() + " @ offset " + std::to_string(offset) + ": ";
}

std::uint32_t read_be32(const std::vector<std::uint8_t>& bytes, std::size_t offset,
                        const std::filesystem::path& path) {
  if (offset + 4 > bytes.size()) throw FormatError(at(path, offset) + "truncated header");
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void write_be32(std::ostream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16),
                     static_cast<char>(v >> 8), static_cast<char>(v)};
  out.write(b, 4);
}

std::string hex(std::uint32_t v) {
  std::ostringstream os;
  os << "0x" << std::hex << v;
  return os.str();
}

}  // namespace

Dataset load_idx(const std::filesystem::path& image_path, const std::filesystem::path& label_path) {
  const auto images = read_file(image_path);
  const auto labels = read_file(label_path);

  const std::uint32_t image_magic = read_be32(images, 0, image_path);
  if (image_magic != kImageMagic) {
    throw FormatError(at(image_path, 0) + "bad magic " + hex(image_magic) + ", expected 0x803");
  }
  const std::size_t count = read_be32(images, 4, image_path);
  const std::size_t rows = read_be32(images, 8, image_path);
  const std::size_t cols = read_be32(images, 12, image_path);
  const std::size_t pixels = rows * cols;
  const std::size_t image_bytes = count * pixels;
  if (images.size() < 16 + image_bytes) {
    throw FormatError(at(image_path, images.size()) + "truncated: need " +
                      std::to_string(16 + image_bytes) + " bytes");
  }

  const std::uint32_t label_magic = read_be32(labels, 0, label_path);
  if (label_magic != kLabelMagic) {
    throw FormatError(at(label_path, 0) + "bad magic " + hex(label_magic) + ", expected 0x801");
  }
  const std::size_t label_count = read_be32(labels, 4, label_path);
  if (label_count != count) {
    throw FormatError(at(label_path, 4) + "label count " + std::to_string(label_count) +
                      " != image count " + std::to_string(count));
  }
  if (labels.size() < 8 + count) {
    throw FormatError(at(label_path, labels.size()) + "truncated: need " +
                      std::to_string(8 + count) + " bytes");
  }

  Dataset ds;
  ds.features = Matrix(count, pixels);
  auto feat = ds.features.data();
  for (std::size_t i = 0; i < image_bytes; ++i) feat[i] = images[16 + i] / 255.0;
  std::vector<int> y(count);
  int max_label = -1;
  for (std::size_t i = 0; i < count; ++i) {
    y[i] = labels[8 + i];
    max_label = std::max(max_label, y[i]);
  }
  ds.labels = std::move(y);
  ds.num_classes = std::max<std::size_t>(2, static_cast<std::size_t>(max_label + 1));
  ds.image = ImageLayout{rows, cols, 1};
  return ds;
}

void write_idx_images(const std::filesystem::path& path, const Matrix& features, std::size_t rows,
                      std::size_t cols) {
  if (rows * cols != features.cols()) {
    throw InvalidInput("write_idx_images: " + std::to_string(rows) + "x" + std::to_string(cols) +
                       " does not match " + std::to_string(features.cols()) + " features");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError(path.string() + ": cannot open for writing");
  write_be32(out, kImageMagic);
  write_be32(out, static_cast<std::uint32_t>(features.rows()));
  write_be32(out, static_cast<std::uint32_t>(rows));
  write_be32(out, static_cast<std::uint32_t>(cols));
  for (double v : features.data()) {
    const double clipped = std::clamp(v, 0.0, 1.0);
    out.put(static_cast<char>(static_cast<std::uint8_t>(std::lround(clipped * 255.0))));
  }
}

void write_idx_labels(const std::filesystem::path& path, std::span<const int> labels) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError(path.string() + ": cannot open for writing");
  write_be32(out, kLabelMagic);
  write_be32(out, static_cast<std::uint32_t>(labels.size()));
  for (int y : labels) {
    if (y < 0 || y > 255) throw InvalidInput("write_idx_labels: label out of byte range");
    out.put(static_cast<char>(static_cast<std::uint8_t>(y)));
  }
}

}  // namespace fedmix
