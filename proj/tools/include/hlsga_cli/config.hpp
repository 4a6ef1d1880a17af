#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hlsga/datasets.hpp"
#include "hlsga/hls.hpp"
#include "hlsga/mlp.hpp"
#include "hlsga/search.hpp"

namespace hlsga::cli {

enum class DatasetKind { kMnist, kCifar, kSynth };

/// Directory of the bundled 5000-digit MNIST subset (set at build time).
std::filesystem::path default_mnist_dir();

struct DatasetConfig {
  DatasetKind kind = DatasetKind::kMnist;
  std::filesystem::path images = default_mnist_dir() / "images-idx3-ubyte";
  std::filesystem::path labels = default_mnist_dir() / "labels-idx1-ubyte";
  std::vector<std::filesystem::path> cifar_batches;
  std::size_t synth_n = 600;
  std::size_t synth_d = 16;
  std::size_t synth_classes = 3;
  double synth_separation = 10.0;
};

struct RunConfig {
  DatasetConfig dataset;
  std::size_t n_train = 2000;
  std::size_t n_val = 1000;
  std::size_t n_test = 2000;
  std::size_t pool_factor = 4;  // 1 keeps the original resolution
  std::vector<std::size_t> arch = {10, 10};
  std::string method = "ga";
  std::size_t budget = 40;
  bool hls = false;
  GroupScheme groups = GroupScheme::kSingle;
  TrainConfig trainer;
  HlsConfig hls_settings;
  /// Unset: `all` for finetune, `last_layer` for search.
  std::optional<FreezeSpec> freeze;
  GaParams ga;
  std::uint64_t seed = 0;
  std::filesystem::path out_dir = "out";
  std::optional<std::filesystem::path> init_model;

  /// Throws ConfigError on any invalid field.
  void validate() const;
};

/// Parses a JSON config. Missing keys keep their defaults; unknown keys,
/// wrong types and out-of-range values throw ConfigError.
RunConfig parse_config(std::string_view json_text);
RunConfig load_config(const std::filesystem::path& path);

GroupScheme parse_group_scheme(std::string_view name);
FreezePolicy parse_freeze_policy(std::string_view name);

/// Loads or generates the dataset, pools it and splits it with the run seed.
DatasetSplits load_splits(const RunConfig& cfg);

}  // namespace hlsga::cli
