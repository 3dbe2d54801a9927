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
#include <string>

#include "fedmix/data.hpp"
#include "fedmix/error.hpp"

namespace fedmix {

namespace {

void require_layout(std::span<const double> x, const ImageLayout& layout, const char* who) {
  if (layout.size() != x.size()) {
    throw InvalidInput(std::string(who) + ": feature length " + std::to_string(x.size()) +
                       " does not match the image layout");
  }
}

}  // namespace

std::vector<double> shift_image(std::span<const double> x, const ImageLayout& layout, int dx, int dy) {
  require_layout(x, layout, "shift");
  const auto h = static_cast<long>(layout.height);
  const auto w = static_cast<long>(layout.width);
  std::vector<double> out(x.size(), 0.0);
  for (std::size_t ch = 0; ch < layout.channels; ++ch) {
    const std::size_t plane = ch * layout.height * layout.width;
    for (long r = 0; r < h; ++r) {
      const long src_r = r - dy;
      if (src_r < 0 || src_r >= h) continue;
      for (long c = 0; c < w; ++c) {
        const long src_c = c - dx;
        if (src_c < 0 || src_c >= w) continue;
        out[plane + static_cast<std::size_t>(r * w + c)] = x[plane + static_cast<std::size_t>(src_r * w + src_c)];
      }
    }
  }
  return out;
}

std::vector<double> flip_image(std::span<const double> x, const ImageLayout& layout) {
  require_layout(x, layout, "flip");
  std::vector<double> out(x.size());
  for (std::size_t ch = 0; ch < layout.channels; ++ch) {
    for (std::size_t r = 0; r < layout.height; ++r) {
      const std::size_t base = (ch * layout.height + r) * layout.width;
      for (std::size_t c = 0; c < layout.width; ++c) {
        out[base + c] = x[base + layout.width - 1 - c];
      }
    }
  }
  return out;
}

std::vector<double> add_noise(std::span<const double> x, double sigma, std::mt19937_64& rng) {
  std::vector<double> out(x.begin(), x.end());
  if (sigma == 0.0) return out;
  std::normal_distribution<double> noise(0.0, sigma);
  for (double& v : out) v = std::clamp(v + noise(rng), 0.0, 1.0);
  return out;
}

std::vector<double> augment(std::span<const double> x, AugmentKind kind,
                            const std::optional<ImageLayout>& layout, const AugmentParams& params,
                            std::mt19937_64& rng) {
  switch (kind) {
    case AugmentKind::shift: {
      if (!layout) throw InvalidInput("augment: shift needs image data");
      std::uniform_int_distribution<int> offset(-params.max_shift, params.max_shift);
      const int dx = offset(rng);
      const int dy = offset(rng);
      return shift_image(x, *layout, dx, dy);
    }
    case AugmentKind::flip:
      if (!layout) throw InvalidInput("augment: flip needs image data");
      return flip_image(x, *layout);
    case AugmentKind::noise:
      return add_noise(x, params.noise_sigma, rng);
  }
  throw InvalidInput("augment: unknown kind");
}

Augmenter::Augmenter(AugmentPolicy policy, std::optional<ImageLayout> layout, AugmentParams params)
    : policy_(policy), layout_(layout), params_(params) {
  if (policy_ == AugmentPolicy::image && !layout_) {
    throw InvalidInput("Augmenter: image policy needs an image layout");
  }
}

Augmenter Augmenter::for_dataset(const Dataset& ds, AugmentParams params) {
  return ds.image ? Augmenter(AugmentPolicy::image, ds.image, params)
                  : Augmenter(AugmentPolicy::noise, std::nullopt, params);
}

std::vector<double> Augmenter::first(std::span<const double> x, std::mt19937_64& rng) const {
  return augment(x, policy_ == AugmentPolicy::image ? AugmentKind::shift : AugmentKind::noise,
                 layout_, params_, rng);
}

std::vector<double> Augmenter::second(std::span<const double> x, std::mt19937_64& rng) const {
  return augment(x, policy_ == AugmentPolicy::image ? AugmentKind::flip : AugmentKind::noise,
                 layout_, params_, rng);
}

std::vector<double> Augmenter::random(std::span<const double> x, std::mt19937_64& rng) const {
  if (policy_ == AugmentPolicy::noise) return augment(x, AugmentKind::noise, layout_, params_, rng);
  const bool use_flip = std::uniform_int_distribution<int>(0, 1)(rng) == 1;
  return augment(x, use_flip ? AugmentKind::flip : AugmentKind::shift, layout_, params_, rng);
}

Matrix Augmenter::first_rows(const Matrix& m, std::mt19937_64& rng) const {
  Matrix out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i) std::ranges::copy(first(m.row(i), rng), out.row(i).begin());
  return out;
}

Matrix Augmenter::second_rows(const Matrix& m, std::mt19937_64& rng) const {
  Matrix out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i) std::ranges::copy(second(m.row(i), rng), out.row(i).begin());
  return out;
}

}  // namespace fedmix
