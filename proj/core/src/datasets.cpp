#include "hlsga/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>
#include <numeric>
#include <string>

#include "hlsga/errors.hpp"
#include "hlsga/rng.hpp"

namespace hlsga {

namespace {

constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;
constexpr std::size_t kCifarPixels = 3072;
constexpr std::size_t kCifarRecord = kCifarPixels + 1;

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed: " + path.string());
  return bytes;
}

std::uint32_t read_be32(const std::vector<std::uint8_t>& bytes, std::size_t offset) {
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void write_be32(std::ofstream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16),
                     static_cast<char>(v >> 8), static_cast<char>(v)};
  out.write(b, 4);
}

void require_header(const std::vector<std::uint8_t>& bytes, std::size_t header,
                    const std::filesystem::path& path) {
  if (bytes.size() < header) throw IoError("truncated IDX header: " + path.string());
}

}  // namespace

void LabeledSet::validate() const {
  if (features.rows() != labels.size()) {
    throw ConsistencyError("LabeledSet: " + std::to_string(features.rows()) + " rows but " +
                           std::to_string(labels.size()) + " labels");
  }
  if (num_classes < 1 && !labels.empty()) throw ConsistencyError("LabeledSet: no classes");
  for (int y : labels) {
    if (y < 0 || y >= num_classes) {
      throw ConsistencyError("LabeledSet: label " + std::to_string(y) + " outside [0, " +
                             std::to_string(num_classes) + ")");
    }
  }
  for (double v : features.data()) {
    if (!(v >= 0.0 && v <= 1.0)) throw DomainError("LabeledSet: feature outside [0, 1]");
  }
}

LabeledSet LabeledSet::subset(std::span<const std::size_t> indices) const {
  LabeledSet out;
  out.num_classes = num_classes;
  out.features = Matrix(indices.size(), dim());
  out.labels.reserve(indices.size());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const std::size_t src = indices[r];
    if (src >= size()) throw SizeError("subset: index out of range");
    std::ranges::copy(features.row(src), out.features.row(r).begin());
    out.labels.push_back(labels[src]);
  }
  return out;
}

LabeledSet load_idx(const std::filesystem::path& images_path,
                    const std::filesystem::path& labels_path) {
  const auto img = read_file(images_path);
  require_header(img, 4, images_path);
  if (read_be32(img, 0) != kIdxImagesMagic) {
    throw FormatError("bad IDX image magic in " + images_path.string());
  }
  require_header(img, 16, images_path);
  const std::size_t n = read_be32(img, 4);
  const std::size_t rows = read_be32(img, 8);
  const std::size_t cols = read_be32(img, 12);
  const std::size_t d = rows * cols;
  // Header counts are 32-bit, so only n * d can overflow.
  if (d != 0 && n > (std::numeric_limits<std::size_t>::max() - 16) / d) {
    throw IoError("IDX header claims more data than can exist: " + images_path.string());
  }
  const std::size_t expected = 16 + n * d;
  if (img.size() < expected) throw IoError("truncated IDX image data: " + images_path.string());
  if (img.size() > expected) throw FormatError("trailing bytes in " + images_path.string());

  const auto lab = read_file(labels_path);
  require_header(lab, 4, labels_path);
  if (read_be32(lab, 0) != kIdxLabelsMagic) {
    throw FormatError("bad IDX label magic in " + labels_path.string());
  }
  require_header(lab, 8, labels_path);
  const std::size_t n_labels = read_be32(lab, 4);
  if (lab.size() < 8 + n_labels) throw IoError("truncated IDX labels: " + labels_path.string());
  if (lab.size() > 8 + n_labels) throw FormatError("trailing bytes in " + labels_path.string());
  if (n_labels != n) {
    throw ConsistencyError("IDX image count " + std::to_string(n) + " != label count " +
                           std::to_string(n_labels));
  }

  LabeledSet set;
  std::vector<double> values(n * d);
  for (std::size_t i = 0; i < n * d; ++i) values[i] = img[16 + i] / 255.0;
  set.features = Matrix(n, d, std::move(values));
  set.labels.resize(n);
  int max_label = -1;
  for (std::size_t i = 0; i < n; ++i) {
    set.labels[i] = lab[8 + i];
    max_label = std::max(max_label, set.labels[i]);
  }
  set.num_classes = max_label + 1;
  return set;
}

void write_idx(const LabeledSet& set, const std::filesystem::path& images_path,
               const std::filesystem::path& labels_path) {
  const std::size_t d = set.dim();
  auto side = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(d))));
  const bool square = side * side == d;
  std::ofstream img(images_path, std::ios::binary);
  if (!img) throw IoError("cannot write " + images_path.string());
  write_be32(img, kIdxImagesMagic);
  write_be32(img, static_cast<std::uint32_t>(set.size()));
  write_be32(img, static_cast<std::uint32_t>(square ? side : 1));
  write_be32(img, static_cast<std::uint32_t>(square ? side : d));
  for (double v : set.features.data()) {
    img.put(static_cast<char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)));
  }
  std::ofstream lab(labels_path, std::ios::binary);
  if (!lab) throw IoError("cannot write " + labels_path.string());
  write_be32(lab, kIdxLabelsMagic);
  write_be32(lab, static_cast<std::uint32_t>(set.size()));
  for (int y : set.labels) lab.put(static_cast<char>(y));
  if (!img || !lab) throw IoError("write failed for IDX pair");
}

LabeledSet load_cifar10(std::span<const std::filesystem::path> batch_paths) {
  std::vector<double> values;
  std::vector<int> labels;
  for (const auto& path : batch_paths) {
    const auto bytes = read_file(path);
    if (bytes.size() % kCifarRecord != 0) {
      throw FormatError("CIFAR batch length " + std::to_string(bytes.size()) +
                        " is not a multiple of 3073: " + path.string());
    }
    const std::size_t records = bytes.size() / kCifarRecord;
    for (std::size_t r = 0; r < records; ++r) {
      const std::uint8_t* rec = bytes.data() + r * kCifarRecord;
      if (rec[0] > 9) throw FormatError("CIFAR label out of range in " + path.string());
      labels.push_back(rec[0]);
      const std::uint8_t* red = rec + 1;
      const std::uint8_t* green = red + 1024;
      const std::uint8_t* blue = green + 1024;
      for (std::size_t px = 0; px < 1024; ++px) {
        const double luma = 0.299 * red[px] + 0.587 * green[px] + 0.114 * blue[px];
        values.push_back(std::min(1.0, luma / 255.0));
      }
    }
  }
  LabeledSet set;
  set.features = Matrix(labels.size(), 1024, std::move(values));
  set.labels = std::move(labels);
  set.num_classes = 10;
  return set;
}

LabeledSet concat(const LabeledSet& a, const LabeledSet& b) {
  if (a.size() == 0) return b;
  if (b.size() == 0) return a;
  if (a.dim() != b.dim()) throw DimensionError("concat: feature dimensions differ");
  std::vector<double> values(a.features.data().begin(), a.features.data().end());
  values.insert(values.end(), b.features.data().begin(), b.features.data().end());
  LabeledSet out;
  out.features = Matrix(a.size() + b.size(), a.dim(), std::move(values));
  out.labels = a.labels;
  out.labels.insert(out.labels.end(), b.labels.begin(), b.labels.end());
  out.num_classes = std::max(a.num_classes, b.num_classes);
  return out;
}

DatasetSplits make_splits(const LabeledSet& source, std::size_t n_train, std::size_t n_val,
                          std::size_t n_test, std::uint64_t seed) {
  const std::size_t total = n_train + n_val + n_test;
  if (total > source.size()) {
    throw SizeError("make_splits: requested " + std::to_string(total) + " rows from a set of " +
                    std::to_string(source.size()));
  }
  std::vector<std::size_t> order(source.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  shuffle(std::span<std::size_t>(order), rng);

  DatasetSplits s;
  s.train_index.assign(order.begin(), order.begin() + n_train);
  s.val_index.assign(order.begin() + n_train, order.begin() + n_train + n_val);
  s.test_index.assign(order.begin() + n_train + n_val, order.begin() + total);
  s.train = source.subset(s.train_index);
  s.val = source.subset(s.val_index);
  s.test = source.subset(s.test_index);
  return s;
}

LabeledSet downsample(const LabeledSet& set, std::size_t side, std::size_t factor) {
  if (side * side != set.dim()) {
    throw DimensionError("downsample: dimension " + std::to_string(set.dim()) +
                         " is not " + std::to_string(side) + "^2");
  }
  if (factor == 0 || side % factor != 0) {
    throw DimensionError("downsample: factor " + std::to_string(factor) +
                         " does not divide side " + std::to_string(side));
  }
  const std::size_t out_side = side / factor;
  const double inv = 1.0 / static_cast<double>(factor * factor);
  LabeledSet out;
  out.num_classes = set.num_classes;
  out.labels = set.labels;
  out.features = Matrix(set.size(), out_side * out_side);
  for (std::size_t n = 0; n < set.size(); ++n) {
    const auto src = set.features.row(n);
    auto dst = out.features.row(n);
    for (std::size_t by = 0; by < out_side; ++by) {
      for (std::size_t bx = 0; bx < out_side; ++bx) {
        double sum = 0.0;
        for (std::size_t y = by * factor; y < (by + 1) * factor; ++y) {
          for (std::size_t x = bx * factor; x < (bx + 1) * factor; ++x) sum += src[y * side + x];
        }
        dst[by * out_side + bx] = sum * inv;
      }
    }
  }
  return out;
}

LabeledSet synth_gaussians(std::size_t n, std::size_t d, std::size_t num_classes,
                           double separation, std::uint64_t seed) {
  if (n < 1 || d < 1 || num_classes < 1) throw SizeError("synth_gaussians: n, d, K must be >= 1");
  if (!(separation > 0.0)) throw DomainError("synth_gaussians: separation must be positive");
  Rng rng(seed);

  // Means live in [0.25, 0.75]^d so a noise radius below 0.25 never clips.
  constexpr double kMargin = 0.25;
  Matrix means(num_classes, d);
  for (double& v : means.data()) v = kMargin + 0.5 * uniform01(rng);

  double min_gap = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < num_classes; ++a) {
    for (std::size_t b = a + 1; b < num_classes; ++b) {
      double sq = 0.0;
      for (std::size_t j = 0; j < d; ++j) sq += std::pow(means(a, j) - means(b, j), 2);
      min_gap = std::min(min_gap, std::sqrt(sq));
    }
  }
  const double scale = num_classes > 1 ? min_gap : 2.0 * kMargin;
  const double sigma = scale / separation;
  const double radius = std::min(kMargin, 0.49 * scale);

  LabeledSet set;
  set.num_classes = static_cast<int>(num_classes);
  set.features = Matrix(n, d);
  set.labels.resize(n);
  std::vector<double> noise(d);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t k = i % num_classes;
    set.labels[i] = static_cast<int>(k);
    double norm = 0.0;
    for (double& z : noise) {
      z = sigma * standard_normal(rng);
      norm += z * z;
    }
    norm = std::sqrt(norm);
    // Radial truncation: pull long draws back onto the ball of `radius`.
    const double shrink = norm >= radius ? 0.999 * radius / norm : 1.0;
    for (std::size_t j = 0; j < d; ++j) {
      set.features(i, j) = std::clamp(means(k, j) + shrink * noise[j], 0.0, 1.0);
    }
  }
  return set;
}

}  // namespace hlsga
