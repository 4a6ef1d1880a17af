#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "hlsga/numeric.hpp"

namespace hlsga {

/// Feature rows in [0, 1] with one class id per row.
struct LabeledSet {
  Matrix features;          // n x d
  std::vector<int> labels;  // n entries in [0, num_classes)
  int num_classes = 0;

  std::size_t size() const { return labels.size(); }
  std::size_t dim() const { return features.cols(); }

  /// Throws ConsistencyError / DomainError if any invariant is broken.
  void validate() const;

  /// Rows selected by `indices`, in that order.
  LabeledSet subset(std::span<const std::size_t> indices) const;
};

struct DatasetSplits {
  LabeledSet train;
  LabeledSet val;
  LabeledSet test;
  // Source row indices of each part (kept for disjointness audits).
  std::vector<std::size_t> train_index;
  std::vector<std::size_t> val_index;
  std::vector<std::size_t> test_index;
};

/// Reads an MNIST-style IDX pair. Pixels are scaled by 1/255. The class
/// count is one past the largest label present.
LabeledSet load_idx(const std::filesystem::path& images_path,
                    const std::filesystem::path& labels_path);

/// Writes `set` as an IDX pair (pixels quantised to round(255 x)). Images
/// are stored with shape 1 x d unless d is a perfect square.
void write_idx(const LabeledSet& set, const std::filesystem::path& images_path,
               const std::filesystem::path& labels_path);

/// Reads CIFAR-10 binary batches and converts RGB to luma
/// (0.299 R + 0.587 G + 0.114 B) / 255. Always 10 classes.
LabeledSet load_cifar10(std::span<const std::filesystem::path> batch_paths);

/// Row-wise concatenation; the class count is the larger of the two.
LabeledSet concat(const LabeledSet& a, const LabeledSet& b);

DatasetSplits make_splits(const LabeledSet& source, std::size_t n_train, std::size_t n_val,
                          std::size_t n_test, std::uint64_t seed);

/// Average-pools square images of side `side` with factor x factor windows.
LabeledSet downsample(const LabeledSet& set, std::size_t side, std::size_t factor);

/// K Gaussian clusters inside the unit cube. `separation` is the distance
/// between the two closest means measured in noise standard deviations.
/// Noise is truncated below the clipping margin and below half the smallest
/// mean gap, so the set is separable by a nearest-mean rule.
LabeledSet synth_gaussians(std::size_t n, std::size_t d, std::size_t num_classes,
                           double separation, std::uint64_t seed);

}  // namespace hlsga
