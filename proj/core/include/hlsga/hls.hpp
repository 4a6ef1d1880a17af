#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hlsga/calculus.hpp"
#include "hlsga/datasets.hpp"
#include "hlsga/mlp.hpp"
#include "hlsga/simplex.hpp"

namespace hlsga {

/// Step lengths t0 * ratio^k, k = 0 .. steps-1 (t = 0 is always added).
struct StepGrid {
  double t0 = 1e-3;
  double ratio = 2.0;
  std::size_t steps = 20;

  std::vector<double> points() const;
};

struct HlsConfig {
  /// Row slack of the relaxed LP. Unset: 1e-6 * max(1, max |H|).
  std::optional<double> delta;
  double dw_box = 1.0;  // |d_w| <= dw_box
  StepGrid t_grid;
  FreezeSpec freeze;
  std::size_t refresh_steps = 0;
  std::size_t hessian_limit = 3000;
  /// Warn when ||grad_w f||_inf exceeds this multiple of the trainer's grad_tol.
  double stationarity_factor = 10.0;
  double grad_tol = 1e-3;
  LpOptions lp;

  /// Throws ConfigError on out-of-range values.
  void validate() const;
};

struct DescentDirection {
  Vector d_lambda;                      // p
  Vector d_w;                           // q, zero on frozen coordinates
  double directional_derivative = 0.0;  // grad F . d  (<= 0)
  LpStatus lp_status = LpStatus::kOptimal;
  bool usable = true;                   // false when the LP hit its iteration limit
  double delta = 0.0;                   // slack actually used
  double stationarity = 0.0;            // ||grad_w f||_inf at the base point
  bool stationarity_warning = false;
  double hessian_asymmetry = 0.0;
  double constraint_violation = 0.0;    // max |H d| - delta (<= feas_tol)
  std::size_t lp_iterations = 0;
};

struct CurvePoint {
  double t = 0.0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_acc = 0.0;
};

struct LineSearchResult {
  double t_star = 0.0;
  std::size_t star_index = 0;  // into curve
  Vector lambda_star;
  Vector w_star;
  std::vector<CurvePoint> curve;
};

/// Relaxed steepest-descent LP over x = (d_lambda, d_w_movable):
///   min g.x  s.t.  -delta <= A x <= delta,  -1 <= d_lambda <= 1,
///   -B <= d_w <= B.
/// Where `lambda0` is given and lambda0[g] <= 0, d_lambda[g] is restricted
/// to [0, 1] so the line search never needs a negative weight decay.
LpProblem build_lp(const UpperGradient& grad, const HessianBlocks& hess, const HlsConfig& cfg,
                   std::span<const double> lambda0 = {});

/// Slack used for `hess` under `cfg`.
double effective_delta(const HessianBlocks& hess, const HlsConfig& cfg);

DescentDirection descent_direction(const BilevelProblem& problem, std::span<const double> lambda0,
                                   std::span<const double> w0, const HlsConfig& cfg);

/// Evaluates t = 0 and every grid step along the direction (lambda clamped
/// at zero) and keeps the step with the lowest validation loss. Returns the
/// base point alone when the direction is not a strict descent direction.
LineSearchResult line_search(const BilevelProblem& problem, std::span<const double> lambda0,
                             std::span<const double> w0, const DescentDirection& dir,
                             const HlsConfig& cfg, std::uint64_t seed = 0);

struct FinetuneOutcome {
  DescentDirection direction;
  LineSearchResult search;
};

FinetuneOutcome finetune(const BilevelProblem& problem, std::span<const double> lambda0,
                         std::span<const double> w0, const HlsConfig& cfg,
                         std::uint64_t seed = 0);

/// MLP convenience wrapper: fine-tunes `model` trained at `lambda0`.
struct ModelFinetune {
  Model model;
  Vector lambda;
  FinetuneOutcome outcome;
};

ModelFinetune finetune(const Model& model, const RegGroups& groups,
                       std::span<const double> lambda0, const DatasetSplits& splits,
                       const HlsConfig& cfg, const TrainConfig& refresh_cfg = {},
                       std::uint64_t seed = 0);

/// "t,train_loss,val_loss,val_acc" header plus one row per point.
void write_curve_csv(std::ostream& out, std::span<const CurvePoint> curve);

}  // namespace hlsga
