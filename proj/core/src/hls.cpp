#include "hlsga/hls.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <string>

#include "hlsga/csv.hpp"
#include "hlsga/errors.hpp"
#include "hlsga/rng.hpp"

namespace hlsga {

std::vector<double> StepGrid::points() const {
  std::vector<double> t;
  t.reserve(steps);
  double v = t0;
  for (std::size_t k = 0; k < steps; ++k, v *= ratio) t.push_back(v);
  return t;
}

void HlsConfig::validate() const {
  if (delta && !(*delta >= 0.0 && std::isfinite(*delta))) {
    throw ConfigError("hls: delta must be finite and >= 0 (got " + std::to_string(*delta) + ")");
  }
  if (!(dw_box > 0.0) || !std::isfinite(dw_box)) throw ConfigError("hls: dw_box must be positive");
  if (!(t_grid.t0 > 0.0) || !std::isfinite(t_grid.t0)) throw ConfigError("hls: t0 must be positive");
  if (!(t_grid.ratio > 1.0) || !std::isfinite(t_grid.ratio)) throw ConfigError("hls: ratio must exceed 1");
  if (t_grid.steps < 1) throw ConfigError("hls: the step grid needs at least one step");
  if (hessian_limit < 1) throw ConfigError("hls: hessian_limit must be >= 1");
  if (!(stationarity_factor > 0.0)) throw ConfigError("hls: stationarity_factor must be positive");
  if (!(lp.feas_tol > 0.0) || !(lp.opt_tol > 0.0)) throw ConfigError("hls: LP tolerances must be positive");
}

double effective_delta(const HessianBlocks& hess, const HlsConfig& cfg) {
  if (cfg.delta) return *cfg.delta;
  return 1e-6 * std::max(1.0, max_abs(hess.A));
}

LpProblem build_lp(const UpperGradient& grad, const HessianBlocks& hess, const HlsConfig& cfg,
                   std::span<const double> lambda0) {
  const std::size_t p = hess.p;
  const std::size_t qb = hess.q();
  if (grad.g_lambda.size() != p) {
    throw DimensionError("build_lp: gradient has " + std::to_string(grad.g_lambda.size()) +
                         " hyperparameter entries, Hessian block has " + std::to_string(p));
  }
  if (hess.A.rows() != qb || hess.A.cols() != p + qb) {
    throw DimensionError("build_lp: Hessian block shape does not match its coordinates");
  }
  if (!lambda0.empty() && lambda0.size() != p) throw DimensionError("build_lp: lambda0 length");
  for (std::size_t c : hess.coords) {
    if (c >= grad.g_w.size()) throw DimensionError("build_lp: coordinate outside the gradient");
  }

  const double delta = effective_delta(hess, cfg);
  LpProblem lp;
  lp.c.resize(p + qb);
  std::copy(grad.g_lambda.begin(), grad.g_lambda.end(), lp.c.begin());
  for (std::size_t k = 0; k < qb; ++k) lp.c[p + k] = grad.g_w[hess.coords[k]];
  lp.A = hess.A;
  if (qb == 0) lp.A = Matrix(0, p);
  lp.row_lb.assign(qb, -delta);
  lp.row_ub.assign(qb, delta);
  lp.var_lb.assign(p + qb, -cfg.dw_box);
  lp.var_ub.assign(p + qb, cfg.dw_box);
  for (std::size_t g = 0; g < p; ++g) {
    lp.var_lb[g] = (!lambda0.empty() && lambda0[g] <= 0.0) ? 0.0 : -1.0;
    lp.var_ub[g] = 1.0;
  }
  return lp;
}

DescentDirection descent_direction(const BilevelProblem& problem, std::span<const double> lambda0,
                                   std::span<const double> w0, const HlsConfig& cfg) {
  cfg.validate();
  const std::size_t p = problem.hyper_dim();
  const std::size_t q = problem.param_dim();
  if (lambda0.size() != p || w0.size() != q) throw DimensionError("descent_direction: point shape");

  DescentDirection dir;
  dir.stationarity = problem.lower_stationarity(lambda0, w0);
  dir.stationarity_warning = dir.stationarity > cfg.stationarity_factor * cfg.grad_tol;

  const std::vector<bool> mask = problem.movable(cfg.freeze);
  const HessianBlocks hess =
      problem.lower_hessian_rows(lambda0, w0, mask, HessianOptions{cfg.hessian_limit, 1.0});
  const UpperGradient grad = problem.upper_gradient(lambda0, w0);
  dir.hessian_asymmetry = hess.asymmetry;
  dir.delta = effective_delta(hess, cfg);

  const LpProblem lp = build_lp(grad, hess, cfg, lambda0);
  const LpSolution sol = solve(lp, cfg.lp);
  dir.lp_status = sol.status;
  dir.lp_iterations = sol.iterations;
  if (sol.status == LpStatus::kInfeasible || sol.status == LpStatus::kUnbounded) {
    // d = 0 is feasible and every variable is boxed.
    throw LpError("descent LP reported " + std::string(to_string(sol.status)) +
                  " for a problem that is feasible and bounded by construction");
  }
  dir.usable = sol.status == LpStatus::kOptimal;

  dir.d_lambda.assign(sol.x.begin(), sol.x.begin() + p);
  dir.d_w.assign(q, 0.0);
  for (std::size_t k = 0; k < hess.q(); ++k) dir.d_w[hess.coords[k]] = sol.x[p + k];
  dir.directional_derivative = dot(grad.g_lambda, dir.d_lambda) + dot(grad.g_w, dir.d_w);
  if (dir.directional_derivative > 0.0) {
    // Rounding above the zero direction; fall back to it.
    std::fill(dir.d_lambda.begin(), dir.d_lambda.end(), 0.0);
    std::fill(dir.d_w.begin(), dir.d_w.end(), 0.0);
    dir.directional_derivative = 0.0;
  }
  const Vector row_values = matvec(lp.A, sol.x);
  dir.constraint_violation = row_values.empty() ? -dir.delta : norm_inf(row_values) - dir.delta;
  return dir;
}

LineSearchResult line_search(const BilevelProblem& problem, std::span<const double> lambda0,
                             std::span<const double> w0, const DescentDirection& dir,
                             const HlsConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  LineSearchResult res;
  res.lambda_star.assign(lambda0.begin(), lambda0.end());
  res.w_star.assign(w0.begin(), w0.end());
  const PointMetrics base = problem.evaluate(lambda0, w0);
  res.curve.push_back({0.0, base.train_loss, base.val_loss, base.val_acc});
  if (!dir.usable || !(dir.directional_derivative < 0.0)) return res;

  auto score = [](double v) { return std::isfinite(v) ? v : std::numeric_limits<double>::infinity(); };
  double best = score(base.val_loss);
  const std::vector<double> grid = cfg.t_grid.points();
  Vector lambda(lambda0.size());
  Vector w(w0.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double t = grid[k];
    for (std::size_t g = 0; g < lambda.size(); ++g) {
      lambda[g] = std::max(0.0, lambda0[g] + t * dir.d_lambda[g]);
    }
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = w0[i] + t * dir.d_w[i];
    if (cfg.refresh_steps > 0) {
      w = problem.refresh(lambda, w, cfg.refresh_steps, derive_seed(seed, SeedStream::kRefresh, k));
    }
    const PointMetrics m = problem.evaluate(lambda, w);
    res.curve.push_back({t, m.train_loss, m.val_loss, m.val_acc});
    if (score(m.val_loss) < best) {
      best = score(m.val_loss);
      res.t_star = t;
      res.star_index = res.curve.size() - 1;
      res.lambda_star = lambda;
      res.w_star = w;
    }
  }
  return res;
}

FinetuneOutcome finetune(const BilevelProblem& problem, std::span<const double> lambda0,
                         std::span<const double> w0, const HlsConfig& cfg, std::uint64_t seed) {
  FinetuneOutcome out;
  out.direction = descent_direction(problem, lambda0, w0, cfg);
  out.search = line_search(problem, lambda0, w0, out.direction, cfg, seed);
  return out;
}

ModelFinetune finetune(const Model& model, const RegGroups& groups,
                       std::span<const double> lambda0, const DatasetSplits& splits,
                       const HlsConfig& cfg, const TrainConfig& refresh_cfg, std::uint64_t seed) {
  const MlpBilevel problem(model.arch, groups, splits.train, splits.val, refresh_cfg);
  ModelFinetune res;
  res.outcome = finetune(problem, lambda0, model.w, cfg, seed);
  res.model = Model{model.arch, res.outcome.search.w_star};
  res.lambda = res.outcome.search.lambda_star;
  return res;
}

void write_curve_csv(std::ostream& out, std::span<const CurvePoint> curve) {
  out << "t,train_loss,val_loss,val_acc\n";
  for (const CurvePoint& c : curve) {
    out << format_g9(c.t) << ',' << format_g9(c.train_loss) << ',' << format_g9(c.val_loss) << ','
        << format_g9(c.val_acc) << '\n';
  }
}

}  // namespace hlsga
