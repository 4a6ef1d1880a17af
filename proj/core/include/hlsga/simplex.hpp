#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string_view>

#include "hlsga/numeric.hpp"

namespace hlsga {

/// minimise c.x  subject to  row_lb <= A x <= row_ub,  var_lb <= x <= var_ub.
/// Every bound must be finite.
struct LpProblem {
  Vector c;
  Matrix A;
  Vector row_lb;
  Vector row_ub;
  Vector var_lb;
  Vector var_ub;

  std::size_t num_vars() const { return c.size(); }
  std::size_t num_rows() const { return A.rows(); }
  /// Throws DimensionError / DomainError when the invariants do not hold.
  void validate() const;
};

enum class LpStatus { kOptimal, kInfeasible, kUnbounded, kIterationLimit };

std::string_view to_string(LpStatus status);

struct LpOptions {
  double feas_tol = 1e-9;
  double opt_tol = 1e-9;
  std::size_t max_iters = 0;          // 0: 50 (m + n) + 1000
  std::size_t bland_after = 50;       // consecutive degenerate pivots
  std::size_t refactor_every = 0;     // 0: max(100, m)
};

struct LpSolution {
  Vector x;
  double objective = 0.0;
  LpStatus status = LpStatus::kIterationLimit;
  std::size_t iterations = 0;
  std::size_t bland_pivots = 0;
};

/// Dense-tableau bounded-variable primal simplex (phase I with artificials,
/// then phase II). Dantzig pricing, switching to Bland's rule after
/// `bland_after` consecutive degenerate pivots. The tableau is rebuilt from
/// the original data periodically and before any status is reported, so an
/// Optimal result always satisfies the bounds to feas_tol.
LpSolution solve(const LpProblem& problem, const LpOptions& opts = {});

struct LpResiduals {
  double row_violation = 0.0;
  double bound_violation = 0.0;
};

LpResiduals residuals(const LpProblem& problem, std::span<const double> x);

/// Plain-text dump: "n m", then c, then m rows of A, then row_lb, row_ub,
/// var_lb, var_ub, one vector per line, values with 17 significant digits.
void write_lp(std::ostream& out, const LpProblem& problem);
LpProblem read_lp(std::istream& in);

}  // namespace hlsga
