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

#pragma once

// Dataset ingestion, labeled/unlabeled splits, client partitioning, streaming
// sub-shards, and input augmentations.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "fedmix/matrix.hpp"

namespace fedmix {

/// Channel-planar image geometry of a flattened feature row.
struct ImageLayout {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 1;
  std::size_t size() const noexcept { return height * width * channels; }
  friend bool operator==(const ImageLayout&, const ImageLayout&) = default;
};

struct Dataset {
  Matrix features;  // n x d, entries in [0, 1]
  std::optional<std::vector<int>> labels;
  std::size_t num_classes = 0;
  std::optional<ImageLayout> image;

  std::size_t size() const noexcept { return features.rows(); }
  std::size_t dims() const noexcept { return features.cols(); }
  bool labeled() const noexcept { return labels.has_value(); }

  /// Rows (and labels, if any) at the given indices, in order.
  Dataset subset(std::span<const std::size_t> indices) const;
  Dataset without_labels() const;
};

// ---------------------------------------------------------------------------
// Loaders

/// Big-endian IDX pair: images magic 0x00000803 (count, rows, cols) and labels
/// magic 0x00000801 (count). Pixels are scaled by 1/255.
Dataset load_idx(const std::filesystem::path& image_path, const std::filesystem::path& label_path);

/// CIFAR-10 binary batches: 3073-byte records, label byte then 3x32x32 planar
/// pixels.
Dataset load_cifar_bin(std::span<const std::filesystem::path> paths);

/// Writes features (quantized to bytes) as an IDX image file of rows x cols
/// images, and labels as an IDX label file.
void write_idx_images(const std::filesystem::path& path, const Matrix& features, std::size_t rows,
                      std::size_t cols);
void write_idx_labels(const std::filesystem::path& path, std::span<const int> labels);

struct SyntheticSpec {
  std::size_t classes = 4;
  std::size_t dims = 16;
  std::size_t samples = 400;
  double spread = 0.1;
  std::uint64_t seed = 0;
};

/// Gaussian blobs around one centroid per class. Sample i belongs to class
/// i mod classes. Centroids sit on a scaled simplex when dims >= classes.
Dataset gen_synthetic(const SyntheticSpec& spec);

/// Class centroids used by gen_synthetic.
Matrix synthetic_centroids(const SyntheticSpec& spec);

// ---------------------------------------------------------------------------
// Splits and partitions

struct LabeledSplit {
  Dataset labeled;
  Dataset unlabeled;  // labels stripped
  std::vector<std::size_t> labeled_indices;
  std::vector<std::size_t> unlabeled_indices;
};

/// Seeded class-stratified draw of `n_labeled` rows. Per-class quotas are
/// proportional to class frequency (largest remainder), so a balanced set
/// gets equal counts and a skewed shard gets what it can supply.
LabeledSplit split_labeled_unlabeled(const Dataset& ds, std::size_t n_labeled, std::uint64_t seed);

struct PartitionPlan {
  std::vector<std::vector<std::size_t>> assignments;  // sorted per client
  std::optional<double> mu;                            // nullopt means IID
  std::uint64_t seed = 0;

  std::size_t num_clients() const noexcept { return assignments.size(); }
  friend bool operator==(const PartitionPlan&, const PartitionPlan&) = default;
};

/// Per-class symmetric Dirichlet(mu) proportions over clients.
PartitionPlan partition_dirichlet(const Dataset& ds, std::size_t num_clients, double mu,
                                  std::uint64_t seed);

/// Seeded shuffle, then round-robin deal.
PartitionPlan partition_iid(std::size_t num_samples, std::size_t num_clients, std::uint64_t seed);

/// Throws InvalidInput unless the plan is a disjoint cover of [0, n) with
/// every client non-empty.
void validate_plan(const PartitionPlan& plan, std::size_t num_samples);

std::string plan_to_json(const PartitionPlan& plan);
PartitionPlan plan_from_json(const std::string& text);

/// Splits `total` into integer parts proportional to `weights`; leftovers go
/// to the largest fractional parts, ties to the lowest index.
std::vector<std::size_t> largest_remainder(std::size_t total, std::span<const double> weights);

inline constexpr std::size_t kStreamingParts = 10;

struct StreamingShard {
  std::vector<std::vector<std::size_t>> parts;
  const std::vector<std::size_t>& for_round(std::size_t t) const { return parts[t % parts.size()]; }
};

/// One seeded shuffle, then a contiguous split into 10 parts whose sizes
/// differ by at most one.
StreamingShard split_streaming(std::span<const std::size_t> shard, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Augmentation

enum class AugmentKind { shift, flip, noise };

struct AugmentParams {
  int max_shift = 2;         // shift offsets drawn from [-max_shift, max_shift]
  double noise_sigma = 0.05;
};

/// Translate by (dx, dy) pixels, zero fill. Positive dx moves content right.
std::vector<double> shift_image(std::span<const double> x, const ImageLayout& layout, int dx, int dy);
/// Horizontal mirror.
std::vector<double> flip_image(std::span<const double> x, const ImageLayout& layout);
/// Adds N(0, sigma) per entry and clips to [0, 1].
std::vector<double> add_noise(std::span<const double> x, double sigma, std::mt19937_64& rng);

/// Random augmentation of one feature row. shift/flip need an image layout.
std::vector<double> augment(std::span<const double> x, AugmentKind kind,
                            const std::optional<ImageLayout>& layout, const AugmentParams& params,
                            std::mt19937_64& rng);

enum class AugmentPolicy { image, noise };

/// The two perturbations of the consistency term plus the random copies used
/// for pseudo-labeling. Image policy: first = shift, second = flip, random =
/// shift or flip. Noise policy: all three are Gaussian noise.
class Augmenter {
 public:
  Augmenter(AugmentPolicy policy, std::optional<ImageLayout> layout, AugmentParams params = {});

  /// Image policy when the dataset carries a layout, noise otherwise.
  static Augmenter for_dataset(const Dataset& ds, AugmentParams params = {});

  AugmentPolicy policy() const noexcept { return policy_; }

  std::vector<double> first(std::span<const double> x, std::mt19937_64& rng) const;
  std::vector<double> second(std::span<const double> x, std::mt19937_64& rng) const;
  std::vector<double> random(std::span<const double> x, std::mt19937_64& rng) const;

  Matrix first_rows(const Matrix& m, std::mt19937_64& rng) const;
  Matrix second_rows(const Matrix& m, std::mt19937_64& rng) const;

 private:
  AugmentPolicy policy_;
  std::optional<ImageLayout> layout_;
  AugmentParams params_;
};

}  // namespace fedmix
