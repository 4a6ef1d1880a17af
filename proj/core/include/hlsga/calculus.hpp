#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "hlsga/datasets.hpp"
#include "hlsga/mlp.hpp"
#include "hlsga/numeric.hpp"

namespace hlsga {

/// Gradient of the upper-level objective F with respect to (lambda, w).
struct UpperGradient {
  Vector g_lambda;  // p
  Vector g_w;       // q (full parameter count)
};

/// The rows of the lower-level Hessian that correspond to the model
/// parameters, restricted to the movable coordinates:
///   A = [ d2f/dw dlambda | d2f/dw dw ]   of shape q_b x (p + q_b)
/// where q_b = coords.size() and coords[k] is the parameter index of block
/// row / column k.
struct HessianBlocks {
  Matrix A;
  std::size_t p = 0;
  std::vector<std::size_t> coords;
  /// max |H_ww - H_ww^T| / 2 relative to max |H_ww|, measured before
  /// symmetrisation.
  double asymmetry = 0.0;

  std::size_t q() const { return coords.size(); }
};

enum class FreezePolicy { kAll, kLastLayer, kTrailingK };

struct FreezeSpec {
  FreezePolicy policy = FreezePolicy::kAll;
  std::size_t k = 0;  // kTrailingK only
};

/// true = coordinate may move during fine-tuning.
std::vector<bool> freeze_mask(const Architecture& arch, FreezeSpec spec);

struct HessianOptions {
  std::size_t limit = 3000;  // largest block size accepted
  double step_scale = 1.0;   // multiplies the finite-difference step
};

/// Gradient of the average validation cross-entropy. g_lambda is zero: the
/// upper objective does not depend on the weight decay directly.
UpperGradient upper_gradient(const Model& model, const LabeledSet& val, std::size_t p);

/// Lambda columns analytically (2 w_i on group members, zero for biases),
/// w columns by central differences of grad_w (with regularisation) using
/// h_j = sqrt(eps) (1 + |w_j|), then symmetrised. An empty mask means every
/// coordinate moves. Throws ScaleError above opts.limit.
HessianBlocks hessian_lower_rows(const Model& model, const RegGroups& groups,
                                 std::span<const double> lambda, const LabeledSet& train,
                                 const std::vector<bool>& mask = {},
                                 const HessianOptions& opts = {});

using GradientFn = std::function<Vector(std::span<const double>)>;

/// Generic assembly used by every problem: `mixed` holds the analytic lambda
/// columns (q_b x p), `grad` returns the lower-level gradient over all q
/// parameters (only entries at `coords` are read).
HessianBlocks assemble_lower_rows(const Matrix& mixed, std::vector<std::size_t> coords,
                                  const GradientFn& grad, std::span<const double> w,
                                  double step_scale = 1.0);

/// Finite-difference step for coordinate value v.
double fd_step(double v);

/// Losses and accuracy of one (lambda, w) point.
struct PointMetrics {
  double train_loss = 0.0;  // lower-level data term (no penalty)
  double val_loss = 0.0;    // upper objective F
  double val_acc = 0.0;     // NaN where accuracy has no meaning
};

/// A continuous-hyperparameter bilevel problem as seen by the fine-tuner.
/// Implementations are immutable after construction.
class BilevelProblem {
 public:
  virtual ~BilevelProblem() = default;

  virtual std::size_t hyper_dim() const = 0;
  virtual std::size_t param_dim() const = 0;

  virtual UpperGradient upper_gradient(std::span<const double> lambda,
                                       std::span<const double> w) const = 0;
  virtual HessianBlocks lower_hessian_rows(std::span<const double> lambda,
                                           std::span<const double> w,
                                           const std::vector<bool>& mask,
                                           const HessianOptions& opts) const = 0;
  /// ||grad_w f||_inf, the lower-level stationarity residual.
  virtual double lower_stationarity(std::span<const double> lambda,
                                    std::span<const double> w) const = 0;
  virtual PointMetrics evaluate(std::span<const double> lambda,
                                std::span<const double> w) const = 0;
  /// Re-optimises w for `steps` iterations at fixed lambda. Problems without
  /// an iterative lower-level solver return w unchanged.
  virtual Vector refresh(std::span<const double> lambda, std::span<const double> w,
                         std::size_t steps, std::uint64_t seed) const;
  /// Movable-coordinate mask for a freeze policy (all true by default).
  virtual std::vector<bool> movable(FreezeSpec spec) const;
};

/// MLP with L2 weight decay: F = validation cross-entropy,
/// f = training cross-entropy + regulariser.
class MlpBilevel final : public BilevelProblem {
 public:
  MlpBilevel(Architecture arch, RegGroups groups, const LabeledSet& train,
             const LabeledSet& val, TrainConfig refresh_cfg = {});

  std::size_t hyper_dim() const override { return groups_.num_groups; }
  std::size_t param_dim() const override { return arch_.param_count(); }
  UpperGradient upper_gradient(std::span<const double> lambda,
                               std::span<const double> w) const override;
  HessianBlocks lower_hessian_rows(std::span<const double> lambda, std::span<const double> w,
                                   const std::vector<bool>& mask,
                                   const HessianOptions& opts) const override;
  double lower_stationarity(std::span<const double> lambda,
                            std::span<const double> w) const override;
  PointMetrics evaluate(std::span<const double> lambda, std::span<const double> w) const override;
  Vector refresh(std::span<const double> lambda, std::span<const double> w, std::size_t steps,
                 std::uint64_t seed) const override;
  std::vector<bool> movable(FreezeSpec spec) const override;

  const Architecture& arch() const { return arch_; }
  const RegGroups& groups() const { return groups_; }

 private:
  Model model_at(std::span<const double> w) const;

  Architecture arch_;
  RegGroups groups_;
  const LabeledSet& train_;
  const LabeledSet& val_;
  TrainConfig refresh_cfg_;
};

/// Scalar test problems with closed-form lower-level solutions:
///   quadratic: f = (w - lambda)^2,        F = (w - 1)^2,  w(lambda) = lambda
///   ridge:     f = (w - 1)^2 + lambda w^2, F = w^2,       w(lambda) = 1 / (1 + lambda)
enum class AnalyticKind { kQuadratic, kRidge };

AnalyticKind parse_analytic_kind(std::string_view name);

class AnalyticBilevel final : public BilevelProblem {
 public:
  explicit AnalyticBilevel(AnalyticKind kind) : kind_(kind) {}

  std::size_t hyper_dim() const override { return 1; }
  std::size_t param_dim() const override { return 1; }
  UpperGradient upper_gradient(std::span<const double> lambda,
                               std::span<const double> w) const override;
  HessianBlocks lower_hessian_rows(std::span<const double> lambda, std::span<const double> w,
                                   const std::vector<bool>& mask,
                                   const HessianOptions& opts) const override;
  double lower_stationarity(std::span<const double> lambda,
                            std::span<const double> w) const override;
  PointMetrics evaluate(std::span<const double> lambda, std::span<const double> w) const override;

  double lower_objective(double lambda, double w) const;
  double upper_objective(double w) const;
  double lower_gradient(double lambda, double w) const;
  /// Lower-level minimiser w(lambda).
  double solution(double lambda) const;

 private:
  AnalyticKind kind_;
};

/// Closed-form steepest-descent data at (lambda, w) on the lower-level
/// solution path.
struct OracleDirection {
  double d_lambda = 0.0;
  double d_w = 0.0;
  double hypergradient = 0.0;            // dF(w(lambda))/dlambda
  double directional_derivative = 0.0;   // grad F . d
  Vector hessian_row;                    // [d2f/dw dlambda, d2f/dw2]
};

OracleDirection analytic_bilevel_oracle(std::string_view name, double lambda, double w);

}  // namespace hlsga
