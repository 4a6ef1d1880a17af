#include "hlsga/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "hlsga/errors.hpp"
#include "hlsga/rng.hpp"

namespace hlsga {

namespace {

constexpr double kProbFloor = 1e-12;
const double kMaxSampleLoss = -std::log(kProbFloor);

// Per-sample scratch buffers, sized once per call.
struct Workspace {
  std::vector<Vector> pre;   // pre-activations per layer
  std::vector<Vector> act;   // activations per layer (last = logits)
  std::vector<Vector> delta;

  explicit Workspace(const Architecture& arch) {
    const std::size_t layers = arch.num_layers();
    pre.resize(layers);
    act.resize(layers);
    delta.resize(layers);
    for (std::size_t l = 0; l < layers; ++l) {
      pre[l].resize(arch.fan_out(l));
      act[l].resize(arch.fan_out(l));
      delta[l].resize(arch.fan_out(l));
    }
  }
};

// Forward pass from `first_layer` given the activations entering it.
// Leaves logits in ws.act.back().
void forward_from(const Model& model, std::span<const LayerSlice> layout, std::size_t first_layer,
                  std::span<const double> input, Workspace& ws) {
  const std::size_t last = layout.size() - 1;
  std::span<const double> in = input;
  for (std::size_t l = first_layer; l <= last; ++l) {
    const LayerSlice& s = layout[l];
    const double* w = model.w.data() + s.weight_offset;
    const double* b = model.w.data() + s.bias_offset;
    Vector& z = ws.pre[l];
    Vector& a = ws.act[l];
    for (std::size_t o = 0; o < s.fan_out; ++o) {
      const double* row = w + o * s.fan_in;
      double acc = b[o];
      for (std::size_t i = 0; i < s.fan_in; ++i) acc += row[i] * in[i];
      z[o] = acc;
      a[o] = (l == last) ? acc : std::max(acc, 0.0);
    }
    in = a;
  }
}

// Softmax in place over logits; returns log-sum-exp.
double softmax_inplace(std::span<double> logits) {
  const double m = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double& v : logits) {
    v = std::exp(v - m);
    sum += v;
  }
  for (double& v : logits) v /= sum;
  return m + std::log(sum);
}

// Adds the summed cross-entropy gradient over `rows` into `grad` and returns
// the summed loss. `inputs` holds the activations entering `first_layer`.
double accumulate_gradient(const Model& model, std::span<const LayerSlice> layout,
                           std::size_t first_layer, const Matrix& inputs,
                           std::span<const int> labels, std::span<const std::size_t> rows,
                           std::span<double> grad, Workspace& ws) {
  const std::size_t last = layout.size() - 1;
  double total = 0.0;
  for (std::size_t r : rows) {
    const auto input = inputs.row(r);
    forward_from(model, layout, first_layer, input, ws);
    Vector& logits = ws.act[last];
    const int y = labels[r];
    const double zy = logits[y];
    const double lse = softmax_inplace(logits);  // logits now hold probabilities
    const double loss = lse - zy;
    if (loss >= kMaxSampleLoss) {
      total += kMaxSampleLoss;  // floored: flat, no gradient
      continue;
    }
    total += loss;

    Vector& out_delta = ws.delta[last];
    for (std::size_t k = 0; k < out_delta.size(); ++k) out_delta[k] = logits[k];
    out_delta[y] -= 1.0;

    for (std::size_t l = last + 1; l-- > first_layer;) {
      const LayerSlice& s = layout[l];
      std::span<const double> in = (l == first_layer) ? input : std::span<const double>(ws.act[l - 1]);
      const Vector& d = ws.delta[l];
      double* gw = grad.data() + s.weight_offset;
      double* gb = grad.data() + s.bias_offset;
      for (std::size_t o = 0; o < s.fan_out; ++o) {
        const double dv = d[o];
        if (dv == 0.0) continue;
        double* grow = gw + o * s.fan_in;
        for (std::size_t i = 0; i < s.fan_in; ++i) grow[i] += dv * in[i];
        gb[o] += dv;
      }
      if (l == first_layer) break;
      const double* w = model.w.data() + s.weight_offset;
      Vector& prev = ws.delta[l - 1];
      std::fill(prev.begin(), prev.end(), 0.0);
      for (std::size_t o = 0; o < s.fan_out; ++o) {
        const double dv = d[o];
        if (dv == 0.0) continue;
        const double* row = w + o * s.fan_in;
        for (std::size_t i = 0; i < s.fan_in; ++i) prev[i] += row[i] * dv;
      }
      const Vector& z = ws.pre[l - 1];
      for (std::size_t i = 0; i < prev.size(); ++i) {
        if (z[i] <= 0.0) prev[i] = 0.0;
      }
    }
  }
  return total;
}

void add_reg_gradient(std::span<const double> w, const RegGroups& groups,
                      std::span<const double> lambda, std::span<double> grad,
                      std::size_t from = 0) {
  for (std::size_t i = from; i < w.size(); ++i) {
    const int g = groups.group_of[i];
    if (g != RegGroups::kNone) grad[i] += 2.0 * lambda[g] * w[i];
  }
}

void check_model(const Model& model) {
  if (model.w.size() != model.arch.param_count()) {
    throw DimensionError("model has " + std::to_string(model.w.size()) + " parameters, " +
                         model.arch.describe() + " needs " +
                         std::to_string(model.arch.param_count()));
  }
}

void check_set(const Model& model, const LabeledSet& set) {
  check_model(model);
  if (set.dim() != model.arch.input_dim) {
    throw DimensionError("set has " + std::to_string(set.dim()) + " features, model expects " +
                         std::to_string(model.arch.input_dim));
  }
  if (set.num_classes > static_cast<int>(model.arch.output_dim)) {
    throw DimensionError("set has more classes than the model has outputs");
  }
}

void check_groups(const Model& model, const RegGroups& groups, std::span<const double> lambda) {
  if (groups.group_of.size() != model.w.size()) {
    throw DimensionError("regularisation groups do not match the parameter count");
  }
  if (lambda.size() != groups.num_groups) {
    throw DimensionError("expected " + std::to_string(groups.num_groups) +
                         " weight-decay coefficients, got " + std::to_string(lambda.size()));
  }
  for (double l : lambda) {
    if (!(l >= 0.0) || !std::isfinite(l)) throw DomainError("weight decay must be finite and >= 0");
  }
}

std::vector<std::size_t> all_rows(std::size_t n) {
  std::vector<std::size_t> rows(n);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return rows;
}

}  // namespace

std::size_t Architecture::fan_in(std::size_t layer) const {
  return layer == 0 ? input_dim : hidden_sizes[layer - 1];
}

std::size_t Architecture::fan_out(std::size_t layer) const {
  return layer < hidden_sizes.size() ? hidden_sizes[layer] : output_dim;
}

std::size_t Architecture::param_count() const {
  std::size_t q = 0;
  for (std::size_t l = 0; l < num_layers(); ++l) q += fan_in(l) * fan_out(l) + fan_out(l);
  return q;
}

void Architecture::validate() const {
  if (input_dim == 0 || output_dim == 0) throw DimensionError("architecture: empty input or output");
  if (hidden_sizes.size() > 3) throw DimensionError("architecture: more than 3 hidden layers");
  for (std::size_t h : hidden_sizes) {
    if (h == 0) throw DimensionError("architecture: hidden layer of width 0");
  }
}

std::string Architecture::describe() const {
  std::string s = std::to_string(input_dim);
  for (std::size_t h : hidden_sizes) s += "-" + std::to_string(h);
  return s + "-" + std::to_string(output_dim);
}

std::vector<LayerSlice> layer_layout(const Architecture& arch) {
  std::vector<LayerSlice> out;
  std::size_t offset = 0;
  for (std::size_t l = 0; l < arch.num_layers(); ++l) {
    LayerSlice s{offset, offset + arch.fan_in(l) * arch.fan_out(l), arch.fan_in(l), arch.fan_out(l)};
    offset = s.end();
    out.push_back(s);
  }
  return out;
}

std::vector<LayerParams> unpack(const Model& model) {
  check_model(model);
  std::vector<LayerParams> layers;
  for (const LayerSlice& s : layer_layout(model.arch)) {
    LayerParams p;
    p.weights = Matrix(s.fan_out, s.fan_in,
                       std::vector<double>(model.w.begin() + s.weight_offset,
                                           model.w.begin() + s.bias_offset));
    p.bias.assign(model.w.begin() + s.bias_offset, model.w.begin() + s.end());
    layers.push_back(std::move(p));
  }
  return layers;
}

Model pack(const Architecture& arch, std::span<const LayerParams> layers) {
  const auto layout = layer_layout(arch);
  if (layers.size() != layout.size()) throw DimensionError("pack: wrong number of layers");
  Model model{arch, Vector(arch.param_count())};
  for (std::size_t l = 0; l < layout.size(); ++l) {
    const LayerSlice& s = layout[l];
    if (layers[l].weights.rows() != s.fan_out || layers[l].weights.cols() != s.fan_in ||
        layers[l].bias.size() != s.fan_out) {
      throw DimensionError("pack: layer " + std::to_string(l) + " has the wrong shape");
    }
    std::ranges::copy(layers[l].weights.data(), model.w.begin() + s.weight_offset);
    std::ranges::copy(layers[l].bias, model.w.begin() + s.bias_offset);
  }
  return model;
}

Model zero_model(const Architecture& arch) {
  arch.validate();
  return Model{arch, Vector(arch.param_count(), 0.0)};
}

Model init_model(const Architecture& arch, std::uint64_t seed) {
  Model model = zero_model(arch);
  Rng rng(seed);
  for (const LayerSlice& s : layer_layout(arch)) {
    const double limit = std::sqrt(6.0 / static_cast<double>(s.fan_in));
    for (std::size_t i = s.weight_offset; i < s.bias_offset; ++i) {
      model.w[i] = limit * (2.0 * uniform01(rng) - 1.0);
    }
  }
  return model;
}

RegGroups make_groups(const Architecture& arch, GroupScheme scheme) {
  const auto layout = layer_layout(arch);
  RegGroups groups;
  groups.group_of.assign(arch.param_count(), RegGroups::kNone);
  const std::size_t last = layout.size() - 1;
  for (std::size_t l = 0; l < layout.size(); ++l) {
    int g = 0;
    switch (scheme) {
      case GroupScheme::kSingle: g = 0; break;
      case GroupScheme::kHiddenOutput: g = (l == last && last > 0) ? 1 : 0; break;
      case GroupScheme::kPerLayer: g = static_cast<int>(l); break;
    }
    for (std::size_t i = layout[l].weight_offset; i < layout[l].bias_offset; ++i) groups.group_of[i] = g;
  }
  switch (scheme) {
    case GroupScheme::kSingle: groups.num_groups = 1; break;
    case GroupScheme::kHiddenOutput: groups.num_groups = last > 0 ? 2 : 1; break;
    case GroupScheme::kPerLayer: groups.num_groups = layout.size(); break;
  }
  return groups;
}

Vector forward(const Model& model, std::span<const double> x) {
  check_model(model);
  if (x.size() != model.arch.input_dim) throw DimensionError("forward: input has wrong length");
  const auto layout = layer_layout(model.arch);
  Workspace ws(model.arch);
  forward_from(model, layout, 0, x, ws);
  Vector probs = ws.act.back();
  softmax_inplace(probs);
  return probs;
}

double avg_cross_entropy(const Model& model, const LabeledSet& set) {
  check_set(model, set);
  if (set.size() == 0) throw SizeError("avg_cross_entropy: empty set");
  const auto layout = layer_layout(model.arch);
  Workspace ws(model.arch);
  double total = 0.0;
  for (std::size_t r = 0; r < set.size(); ++r) {
    forward_from(model, layout, 0, set.features.row(r), ws);
    Vector& logits = ws.act.back();
    const double zy = logits[set.labels[r]];
    const double lse = softmax_inplace(logits);
    total += std::min(lse - zy, kMaxSampleLoss);
  }
  return total / static_cast<double>(set.size());
}

double accuracy(const Model& model, const LabeledSet& set) {
  check_set(model, set);
  if (set.size() == 0) throw SizeError("accuracy: empty set");
  const auto layout = layer_layout(model.arch);
  Workspace ws(model.arch);
  std::size_t hits = 0;
  for (std::size_t r = 0; r < set.size(); ++r) {
    forward_from(model, layout, 0, set.features.row(r), ws);
    const Vector& logits = ws.act.back();
    const auto best = std::max_element(logits.begin(), logits.end()) - logits.begin();
    if (best == set.labels[r]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(set.size());
}

double regularizer(std::span<const double> w, const RegGroups& groups,
                   std::span<const double> lambda) {
  if (groups.group_of.size() != w.size()) throw DimensionError("regularizer: group map length");
  if (lambda.size() != groups.num_groups) throw DimensionError("regularizer: lambda length");
  for (double l : lambda) {
    if (!(l >= 0.0)) throw DomainError("regularizer: negative weight decay");
  }
  Vector per_group(groups.num_groups, 0.0);
  for (std::size_t i = 0; i < w.size(); ++i) {
    const int g = groups.group_of[i];
    if (g != RegGroups::kNone) per_group[g] += w[i] * w[i];
  }
  return dot(lambda, per_group);
}

double lower_objective(const Model& model, const RegGroups& groups,
                       std::span<const double> lambda, const LabeledSet& train) {
  return avg_cross_entropy(model, train) + regularizer(model.w, groups, lambda);
}

Matrix layer_input(const Model& model, const LabeledSet& set, std::size_t layer) {
  check_set(model, set);
  if (layer >= model.arch.num_layers()) throw DimensionError("layer_input: no such layer");
  if (layer == 0) return set.features;
  const auto layout = layer_layout(model.arch);
  Matrix out(set.size(), model.arch.fan_in(layer));
  Workspace ws(model.arch);
  // Every layer below `layer` is a hidden ReLU layer.
  for (std::size_t r = 0; r < set.size(); ++r) {
    std::span<const double> in = set.features.row(r);
    for (std::size_t l = 0; l < layer; ++l) {
      const LayerSlice& s = layout[l];
      const double* w = model.w.data() + s.weight_offset;
      const double* b = model.w.data() + s.bias_offset;
      Vector& a = ws.act[l];
      for (std::size_t o = 0; o < s.fan_out; ++o) {
        const double* row = w + o * s.fan_in;
        double acc = b[o];
        for (std::size_t i = 0; i < s.fan_in; ++i) acc += row[i] * in[i];
        a[o] = std::max(acc, 0.0);
      }
      in = a;
    }
    std::ranges::copy(in, out.row(r).begin());
  }
  return out;
}

Vector grad_w_from_layer(const Model& model, const RegGroups& groups,
                         std::span<const double> lambda, const LabeledSet& set,
                         std::size_t first_layer, const Matrix& inputs, bool include_reg) {
  check_set(model, set);
  if (include_reg) check_groups(model, groups, lambda);
  if (set.size() == 0) throw SizeError("grad_w: empty set");
  if (first_layer >= model.arch.num_layers()) throw DimensionError("grad_w: no such layer");
  if (inputs.rows() != set.size() || inputs.cols() != model.arch.fan_in(first_layer)) {
    throw DimensionError("grad_w: cached layer input has the wrong shape");
  }
  const auto layout = layer_layout(model.arch);
  Vector grad(model.w.size(), 0.0);
  Workspace ws(model.arch);
  const auto rows = all_rows(set.size());
  accumulate_gradient(model, layout, first_layer, inputs, set.labels, rows, grad, ws);
  const double inv = 1.0 / static_cast<double>(set.size());
  for (double& g : grad) g *= inv;
  if (include_reg) add_reg_gradient(model.w, groups, lambda, grad, layout[first_layer].weight_offset);
  return grad;
}

Vector grad_w(const Model& model, const RegGroups& groups, std::span<const double> lambda,
              const LabeledSet& set, bool include_reg) {
  return grad_w_from_layer(model, groups, lambda, set, 0, set.features, include_reg);
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("trainer: learning rate must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("trainer: Adam betas must lie in [0, 1)");
  }
  if (!(epsilon > 0.0)) throw ConfigError("trainer: epsilon must be positive");
  if (batch_size == 0) throw ConfigError("trainer: batch size must be >= 1");
  if (!(grad_tol >= 0.0)) throw ConfigError("trainer: grad_tol must be >= 0");
}

namespace {

class Adam {
 public:
  Adam(const TrainConfig& cfg, std::size_t n) : cfg_(cfg), m_(n, 0.0), v_(n, 0.0) {}

  void step(std::span<double> w, std::span<const double> g) {
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < w.size(); ++i) {
      m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * g[i];
      v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
      w[i] -= cfg_.learning_rate * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + cfg_.epsilon);
    }
  }

 private:
  TrainConfig cfg_;
  Vector m_;
  Vector v_;
  std::size_t t_ = 0;
};

// Runs minibatch Adam. `max_steps` = 0 means "epochs from cfg, with the
// stationarity check"; otherwise exactly that many updates.
Model run_adam(Model model, const RegGroups& groups, std::span<const double> lambda,
               const LabeledSet& data, const TrainConfig& cfg, std::size_t max_steps,
               std::uint64_t seed, TrainReport* report) {
  cfg.validate();
  check_set(model, data);
  check_groups(model, groups, lambda);
  if (data.size() == 0) throw SizeError("train: empty training set");

  const auto layout = layer_layout(model.arch);
  Workspace ws(model.arch);
  Adam adam(cfg, model.w.size());
  Rng order_rng(mix64(seed ^ 0x6f72646572ULL));
  std::vector<std::size_t> order = all_rows(data.size());
  Vector grad(model.w.size());

  auto full_check = [&](std::size_t epoch) {
    const Vector g = grad_w(model, groups, lambda, data, true);
    const double loss = lower_objective(model, groups, lambda, data);
    if (!std::isfinite(loss) || !all_finite(g)) {
      throw TrainingError("training diverged at epoch " + std::to_string(epoch) + " (" +
                          model.arch.describe() + ", loss " + std::to_string(loss) + ")");
    }
    if (report) {
      report->epochs_run = epoch;
      report->grad_inf = norm_inf(g);
      report->loss = loss;
      report->converged = report->grad_inf <= cfg.grad_tol;
    }
    return norm_inf(g);
  };

  std::size_t steps = 0;
  const std::size_t epochs = max_steps == 0 ? cfg.epochs : std::size_t(-1);
  for (std::size_t epoch = 1; epoch <= epochs; ++epoch) {
    shuffle(std::span<std::size_t>(order), order_rng);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      const std::span<const std::size_t> batch(order.data() + start, stop - start);
      std::fill(grad.begin(), grad.end(), 0.0);
      accumulate_gradient(model, layout, 0, data.features, data.labels, batch, grad, ws);
      const double inv = 1.0 / static_cast<double>(batch.size());
      for (double& g : grad) g *= inv;
      add_reg_gradient(model.w, groups, lambda, grad);
      adam.step(model.w, grad);
      if (max_steps != 0 && ++steps == max_steps) {
        if (!all_finite(model.w)) throw TrainingError("Adam refresh produced non-finite weights");
        return model;
      }
    }
    if (max_steps == 0 && full_check(epoch) <= cfg.grad_tol) return model;
  }
  if (max_steps == 0 && cfg.epochs == 0) full_check(0);
  return model;
}

}  // namespace

Model train(const Architecture& arch, const RegGroups& groups, std::span<const double> lambda,
            const LabeledSet& train_set, const TrainConfig& cfg, std::uint64_t seed,
            TrainReport* report) {
  return run_adam(init_model(arch, seed), groups, lambda, train_set, cfg, 0, seed, report);
}

Model adam_steps(const Model& start, const RegGroups& groups, std::span<const double> lambda,
                 const LabeledSet& train_set, const TrainConfig& cfg, std::size_t steps,
                 std::uint64_t seed) {
  if (steps == 0) return start;
  return run_adam(start, groups, lambda, train_set, cfg, steps, seed, nullptr);
}

}  // namespace hlsga
