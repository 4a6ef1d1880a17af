#include "hlsga/calculus.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "hlsga/errors.hpp"

namespace hlsga {

double fd_step(double v) {
  static const double kRootEps = std::sqrt(std::numeric_limits<double>::epsilon());
  return kRootEps * (1.0 + std::abs(v));
}

std::vector<bool> freeze_mask(const Architecture& arch, FreezeSpec spec) {
  const std::size_t q = arch.param_count();
  std::vector<bool> mask(q, false);
  switch (spec.policy) {
    case FreezePolicy::kAll:
      std::fill(mask.begin(), mask.end(), true);
      break;
    case FreezePolicy::kLastLayer: {
      const LayerSlice last = layer_layout(arch).back();
      std::fill(mask.begin() + last.weight_offset, mask.begin() + last.end(), true);
      break;
    }
    case FreezePolicy::kTrailingK:
      std::fill(mask.end() - std::min(spec.k, q), mask.end(), true);
      break;
  }
  return mask;
}

UpperGradient upper_gradient(const Model& model, const LabeledSet& val, std::size_t p) {
  UpperGradient g;
  g.g_lambda.assign(p, 0.0);
  g.g_w = grad_w(model, RegGroups{}, {}, val, false);
  return g;
}

HessianBlocks assemble_lower_rows(const Matrix& mixed, std::vector<std::size_t> coords,
                                  const GradientFn& grad, std::span<const double> w,
                                  double step_scale) {
  const std::size_t qb = coords.size();
  const std::size_t p = mixed.cols();
  if (mixed.rows() != qb) throw DimensionError("assemble_lower_rows: mixed block has wrong height");
  for (std::size_t c : coords) {
    if (c >= w.size()) throw DimensionError("assemble_lower_rows: coordinate out of range");
  }

  HessianBlocks h;
  h.p = p;
  h.A = Matrix(qb, p + qb);
  for (std::size_t r = 0; r < qb; ++r) std::ranges::copy(mixed.row(r), h.A.row(r).begin());

  Vector probe(w.begin(), w.end());
  for (std::size_t c = 0; c < qb; ++c) {
    const std::size_t j = coords[c];
    const double h_j = fd_step(w[j]) * step_scale;
    const double up = w[j] + h_j;
    const double down = w[j] - h_j;
    probe[j] = up;
    const Vector g_up = grad(probe);
    probe[j] = down;
    const Vector g_down = grad(probe);
    probe[j] = w[j];
    const double width = up - down;  // exactly representable span
    for (std::size_t r = 0; r < qb; ++r) {
      h.A(r, p + c) = (g_up[coords[r]] - g_down[coords[r]]) / width;
    }
  }

  double diff = 0.0;
  double scale = 0.0;
  for (std::size_t r = 0; r < qb; ++r) {
    for (std::size_t c = 0; c < qb; ++c) {
      scale = std::max(scale, std::abs(h.A(r, p + c)));
      if (c > r) diff = std::max(diff, std::abs(h.A(r, p + c) - h.A(c, p + r)));
    }
  }
  h.asymmetry = scale > 0.0 ? 0.5 * diff / scale : 0.0;
  for (std::size_t r = 0; r < qb; ++r) {
    for (std::size_t c = r + 1; c < qb; ++c) {
      const double avg = 0.5 * (h.A(r, p + c) + h.A(c, p + r));
      h.A(r, p + c) = avg;
      h.A(c, p + r) = avg;
    }
  }
  if (!all_finite(h.A.data())) throw DomainError("Hessian assembly produced non-finite entries");
  h.coords = std::move(coords);
  return h;
}

HessianBlocks hessian_lower_rows(const Model& model, const RegGroups& groups,
                                 std::span<const double> lambda, const LabeledSet& train,
                                 const std::vector<bool>& mask, const HessianOptions& opts) {
  const std::size_t q = model.w.size();
  if (groups.group_of.size() != q) throw DimensionError("hessian_lower_rows: group map length");
  if (lambda.size() != groups.num_groups) throw DimensionError("hessian_lower_rows: lambda length");
  for (double l : lambda) {
    if (!(l >= 0.0)) throw DomainError("hessian_lower_rows: negative weight decay");
  }
  if (!mask.empty() && mask.size() != q) throw DimensionError("hessian_lower_rows: mask length");

  std::vector<std::size_t> coords;
  for (std::size_t i = 0; i < q; ++i) {
    if (mask.empty() || mask[i]) coords.push_back(i);
  }
  if (coords.size() > opts.limit) {
    throw ScaleError("Hessian block of " + std::to_string(coords.size()) +
                     " movable parameters exceeds the limit of " + std::to_string(opts.limit) +
                     "; downsample the inputs, shrink the network or freeze weights "
                     "(e.g. freeze policy last_layer)");
  }
  const std::size_t p = groups.num_groups;
  if (coords.empty()) return HessianBlocks{Matrix(0, p), p, {}, 0.0};

  const auto layout = layer_layout(model.arch);
  std::size_t first_layer = 0;
  while (layout[first_layer].end() <= coords.front()) ++first_layer;
  const Matrix inputs = layer_input(model, train, first_layer);

  Matrix mixed(coords.size(), p);
  for (std::size_t r = 0; r < coords.size(); ++r) {
    const int g = groups.group_of[coords[r]];
    if (g != RegGroups::kNone) mixed(r, g) = 2.0 * model.w[coords[r]];
  }

  Model probe{model.arch, model.w};
  const GradientFn grad = [&](std::span<const double> w) {
    std::ranges::copy(w, probe.w.begin());
    return grad_w_from_layer(probe, groups, lambda, train, first_layer, inputs, true);
  };
  return assemble_lower_rows(mixed, std::move(coords), grad, model.w, opts.step_scale);
}

Vector BilevelProblem::refresh(std::span<const double>, std::span<const double> w, std::size_t,
                               std::uint64_t) const {
  return Vector(w.begin(), w.end());
}

std::vector<bool> BilevelProblem::movable(FreezeSpec) const {
  return std::vector<bool>(param_dim(), true);
}

MlpBilevel::MlpBilevel(Architecture arch, RegGroups groups, const LabeledSet& train,
                       const LabeledSet& val, TrainConfig refresh_cfg)
    : arch_(std::move(arch)),
      groups_(std::move(groups)),
      train_(train),
      val_(val),
      refresh_cfg_(refresh_cfg) {
  arch_.validate();
  if (groups_.group_of.size() != arch_.param_count()) {
    throw DimensionError("MlpBilevel: group map does not match the architecture");
  }
}

Model MlpBilevel::model_at(std::span<const double> w) const {
  if (w.size() != arch_.param_count()) throw DimensionError("MlpBilevel: wrong parameter count");
  return Model{arch_, Vector(w.begin(), w.end())};
}

UpperGradient MlpBilevel::upper_gradient(std::span<const double>,
                                         std::span<const double> w) const {
  return hlsga::upper_gradient(model_at(w), val_, hyper_dim());
}

HessianBlocks MlpBilevel::lower_hessian_rows(std::span<const double> lambda,
                                             std::span<const double> w,
                                             const std::vector<bool>& mask,
                                             const HessianOptions& opts) const {
  return hessian_lower_rows(model_at(w), groups_, lambda, train_, mask, opts);
}

double MlpBilevel::lower_stationarity(std::span<const double> lambda,
                                      std::span<const double> w) const {
  return norm_inf(grad_w(model_at(w), groups_, lambda, train_, true));
}

PointMetrics MlpBilevel::evaluate(std::span<const double>, std::span<const double> w) const {
  const Model m = model_at(w);
  return {avg_cross_entropy(m, train_), avg_cross_entropy(m, val_), accuracy(m, val_)};
}

Vector MlpBilevel::refresh(std::span<const double> lambda, std::span<const double> w,
                           std::size_t steps, std::uint64_t seed) const {
  return adam_steps(model_at(w), groups_, lambda, train_, refresh_cfg_, steps, seed).w;
}

std::vector<bool> MlpBilevel::movable(FreezeSpec spec) const { return freeze_mask(arch_, spec); }

AnalyticKind parse_analytic_kind(std::string_view name) {
  if (name == "quadratic") return AnalyticKind::kQuadratic;
  if (name == "ridge") return AnalyticKind::kRidge;
  throw ConfigError("unknown analytic problem '" + std::string(name) + "'");
}

double AnalyticBilevel::lower_objective(double lambda, double w) const {
  if (kind_ == AnalyticKind::kQuadratic) return (w - lambda) * (w - lambda);
  return (w - 1.0) * (w - 1.0) + lambda * w * w;
}

double AnalyticBilevel::upper_objective(double w) const {
  return kind_ == AnalyticKind::kQuadratic ? (w - 1.0) * (w - 1.0) : w * w;
}

double AnalyticBilevel::lower_gradient(double lambda, double w) const {
  if (kind_ == AnalyticKind::kQuadratic) return 2.0 * (w - lambda);
  return 2.0 * (w - 1.0) + 2.0 * lambda * w;
}

double AnalyticBilevel::solution(double lambda) const {
  return kind_ == AnalyticKind::kQuadratic ? lambda : 1.0 / (1.0 + lambda);
}

UpperGradient AnalyticBilevel::upper_gradient(std::span<const double>,
                                              std::span<const double> w) const {
  const double g = kind_ == AnalyticKind::kQuadratic ? 2.0 * (w[0] - 1.0) : 2.0 * w[0];
  return {{0.0}, {g}};
}

HessianBlocks AnalyticBilevel::lower_hessian_rows(std::span<const double> lambda,
                                                  std::span<const double> w,
                                                  const std::vector<bool>& mask,
                                                  const HessianOptions& opts) const {
  if (!mask.empty() && !mask[0]) return HessianBlocks{Matrix(0, 1), 1, {}, 0.0};
  Matrix mixed(1, 1);
  mixed(0, 0) = kind_ == AnalyticKind::kQuadratic ? -2.0 : 2.0 * w[0];
  const double lam = lambda[0];
  const GradientFn grad = [this, lam](std::span<const double> v) {
    return Vector{lower_gradient(lam, v[0])};
  };
  return assemble_lower_rows(mixed, {0}, grad, w, opts.step_scale);
}

double AnalyticBilevel::lower_stationarity(std::span<const double> lambda,
                                           std::span<const double> w) const {
  return std::abs(lower_gradient(lambda[0], w[0]));
}

PointMetrics AnalyticBilevel::evaluate(std::span<const double> lambda,
                                       std::span<const double> w) const {
  return {lower_objective(lambda[0], w[0]), upper_objective(w[0]),
          std::numeric_limits<double>::quiet_NaN()};
}

OracleDirection analytic_bilevel_oracle(std::string_view name, double lambda, double w) {
  const AnalyticKind kind = parse_analytic_kind(name);
  OracleDirection o;
  double mixed = 0.0;
  double curvature = 0.0;
  double grad_f_w = 0.0;
  if (kind == AnalyticKind::kQuadratic) {
    // f_w = 2(w - lambda): f_wl = -2, f_ww = 2; F_w = 2(w - 1).
    mixed = -2.0;
    curvature = 2.0;
    grad_f_w = 2.0 * (w - 1.0);
  } else {
    // f_w = 2(w - 1) + 2 lambda w: f_wl = 2w, f_ww = 2 + 2 lambda; F_w = 2w.
    mixed = 2.0 * w;
    curvature = 2.0 + 2.0 * lambda;
    grad_f_w = 2.0 * w;
  }
  // Implicit function theorem on f_w(lambda, w(lambda)) = 0.
  const double dw_dlambda = -mixed / curvature;
  o.hessian_row = {mixed, curvature};
  o.hypergradient = grad_f_w * dw_dlambda;
  // The box -1 <= d_lambda <= 1 makes the minimiser the sign of -hypergradient.
  o.d_lambda = o.hypergradient < 0.0 ? 1.0 : (o.hypergradient > 0.0 ? -1.0 : 0.0);
  o.d_w = dw_dlambda * o.d_lambda;
  o.directional_derivative = grad_f_w * o.d_w;
  return o;
}

}  // namespace hlsga
