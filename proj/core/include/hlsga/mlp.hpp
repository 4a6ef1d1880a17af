#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hlsga/datasets.hpp"
#include "hlsga/numeric.hpp"

namespace hlsga {

/// Fully connected ReLU network with a softmax output.
struct Architecture {
  std::size_t input_dim = 0;
  std::vector<std::size_t> hidden_sizes;  // 0..3 entries, each >= 1
  std::size_t output_dim = 0;

  std::size_t num_layers() const { return hidden_sizes.size() + 1; }
  std::size_t fan_in(std::size_t layer) const;
  std::size_t fan_out(std::size_t layer) const;
  std::size_t param_count() const;
  void validate() const;
  std::string describe() const;  // e.g. "49-10-10-10"

  bool operator==(const Architecture&) const = default;
};

/// Where one layer lives inside the flat parameter vector. Each layer stores
/// its weight matrix row-major as [fan_out x fan_in] (row o holds the weights
/// feeding output unit o), followed by its fan_out biases. Layers follow in
/// input-to-output order.
struct LayerSlice {
  std::size_t weight_offset;
  std::size_t bias_offset;
  std::size_t fan_in;
  std::size_t fan_out;
  std::size_t end() const { return bias_offset + fan_out; }
};

std::vector<LayerSlice> layer_layout(const Architecture& arch);

struct Model {
  Architecture arch;
  Vector w;
};

struct LayerParams {
  Matrix weights;  // fan_out x fan_in
  Vector bias;
};

std::vector<LayerParams> unpack(const Model& model);
Model pack(const Architecture& arch, std::span<const LayerParams> layers);

Model zero_model(const Architecture& arch);
/// Weights uniform in +-sqrt(6 / fan_in), biases zero.
Model init_model(const Architecture& arch, std::uint64_t seed);

/// How weights are split into L2 groups, one weight-decay coefficient per group.
enum class GroupScheme {
  kSingle,        // p = 1
  kHiddenOutput,  // p = 2: all hidden layers, then the output layer
  kPerLayer,      // p = number of layers
};

struct RegGroups {
  static constexpr int kNone = -1;
  std::vector<int> group_of;  // per parameter; kNone for biases
  std::size_t num_groups = 0;
};

RegGroups make_groups(const Architecture& arch, GroupScheme scheme);

/// Class probabilities for one input row.
Vector forward(const Model& model, std::span<const double> x);

/// Mean of -log(max(p_y, 1e-12)).
double avg_cross_entropy(const Model& model, const LabeledSet& set);
double accuracy(const Model& model, const LabeledSet& set);

/// sum_g lambda[g] * sum_{i in g} w_i^2; biases are never penalised.
double regularizer(std::span<const double> w, const RegGroups& groups,
                   std::span<const double> lambda);

double lower_objective(const Model& model, const RegGroups& groups,
                       std::span<const double> lambda, const LabeledSet& train);

/// Gradient of the average cross-entropy, plus 2 lambda_g w_i when
/// `include_reg` is set.
Vector grad_w(const Model& model, const RegGroups& groups, std::span<const double> lambda,
              const LabeledSet& set, bool include_reg);

/// Activations entering `layer` for every row of `set` (layer 0 returns the
/// features themselves).
Matrix layer_input(const Model& model, const LabeledSet& set, std::size_t layer);

/// Same as grad_w but only for layers >= first_layer, starting from
/// precomputed `inputs` = layer_input(model, set, first_layer). Entries of
/// earlier layers are returned as zero. Weights of earlier layers must match
/// the ones `inputs` was computed with.
Vector grad_w_from_layer(const Model& model, const RegGroups& groups,
                         std::span<const double> lambda, const LabeledSet& set,
                         std::size_t first_layer, const Matrix& inputs, bool include_reg);

struct TrainConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t batch_size = 64;
  std::size_t epochs = 30;
  double grad_tol = 1e-3;

  void validate() const;
};

struct TrainReport {
  bool converged = false;  // grad_tol reached before the epoch budget ran out
  std::size_t epochs_run = 0;
  double grad_inf = 0.0;  // ||grad_w f||_inf at the returned weights
  double loss = 0.0;      // lower objective at the returned weights
};

/// Adam on the regularised training loss from a seeded initialisation.
/// Stops once ||grad||_inf <= grad_tol (checked after every epoch) or when
/// the epoch budget is spent. Throws TrainingError if the loss diverges.
Model train(const Architecture& arch, const RegGroups& groups, std::span<const double> lambda,
            const LabeledSet& train_set, const TrainConfig& cfg, std::uint64_t seed,
            TrainReport* report = nullptr);

/// `steps` minibatch Adam updates from the given weights (fresh moments).
Model adam_steps(const Model& start, const RegGroups& groups, std::span<const double> lambda,
                 const LabeledSet& train_set, const TrainConfig& cfg, std::size_t steps,
                 std::uint64_t seed);

}  // namespace hlsga
