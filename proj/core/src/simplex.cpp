#include "hlsga/simplex.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <istream>
#include <limits>
#include <ostream>
#include <string>

#include "hlsga/errors.hpp"

namespace hlsga {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kPivotTol = 1e-9;
constexpr double kDegenerateStep = 1e-12;
constexpr double kCrashRelTol = 1e-3;

// kZero: nonbasic at 0 strictly inside its box; may enter in either direction.
enum class VarState : std::uint8_t { kBasic, kLower, kUpper, kZero };

// Column layout: [0, n) structural, [n, n + m) row slacks s = A x with the
// row bounds, [n + m, N) artificials. The equality system is
//   -A x + s + sum_k sign_k e_{row_k} a_k = 0.
class BoundedSimplex {
 public:
  BoundedSimplex(const LpProblem& p, const LpOptions& opts)
      : p_(p), opts_(opts), m_(p.num_rows()), n_(p.num_vars()) {
    max_iters_ = opts.max_iters ? opts.max_iters : 50 * (m_ + n_) + 1000;
    refactor_every_ = opts.refactor_every ? opts.refactor_every : std::max<std::size_t>(100, m_);
    harris_tol_ = 0.5 * opts.feas_tol;
    build_initial_basis();
    crash();
  }

  LpSolution run() {
    LpSolution sol;
    if (num_art_ > 0) {
      set_phase_one_costs();
      const LpStatus s = optimise();
      if (s == LpStatus::kIterationLimit) return finish(s);
      double infeasibility = 0.0;
      for (std::size_t j = n_ + m_; j < total_; ++j) infeasibility = std::max(infeasibility, x_[j]);
      if (infeasibility > opts_.feas_tol) return finish(LpStatus::kInfeasible);
      drive_out_artificials();
    }
    set_phase_two_costs();
    return finish(optimise());
  }

 private:
  // --- setup ---------------------------------------------------------------

  void build_initial_basis() {
    // Structural variables start at 0 when their box contains it, otherwise
    // at the bound nearest zero.
    x_.assign(n_ + m_, 0.0);
    lb_.assign(n_ + m_, 0.0);
    ub_.assign(n_ + m_, 0.0);
    state_.assign(n_ + m_, VarState::kLower);
    for (std::size_t j = 0; j < n_; ++j) {
      lb_[j] = p_.var_lb[j];
      ub_[j] = p_.var_ub[j];
      if (lb_[j] < 0.0 && ub_[j] > 0.0) {
        x_[j] = 0.0;
        state_[j] = VarState::kZero;
        continue;
      }
      const bool at_lower = std::abs(lb_[j]) <= std::abs(ub_[j]);
      x_[j] = at_lower ? lb_[j] : ub_[j];
      state_[j] = at_lower ? VarState::kLower : VarState::kUpper;
    }
    const Vector r = matvec(p_.A, std::span<const double>(x_.data(), n_));

    head_.resize(m_);
    std::vector<std::pair<std::size_t, double>> artificials;  // (row, sign)
    for (std::size_t i = 0; i < m_; ++i) {
      const std::size_t s = n_ + i;
      lb_[s] = p_.row_lb[i];
      ub_[s] = p_.row_ub[i];
      if (r[i] >= lb_[s] && r[i] <= ub_[s]) {
        x_[s] = r[i];
        state_[s] = VarState::kBasic;
        head_[i] = s;
      } else {
        const bool below = r[i] < lb_[s];
        x_[s] = below ? lb_[s] : ub_[s];
        state_[s] = below ? VarState::kLower : VarState::kUpper;
        artificials.emplace_back(i, r[i] > x_[s] ? 1.0 : -1.0);
      }
    }

    num_art_ = artificials.size();
    total_ = n_ + m_ + num_art_;
    art_row_.resize(num_art_);
    art_sign_.resize(num_art_);
    for (std::size_t k = 0; k < num_art_; ++k) {
      const auto [row, sign] = artificials[k];
      const std::size_t j = n_ + m_ + k;
      art_row_[k] = row;
      art_sign_[k] = sign;
      lb_.push_back(0.0);
      ub_.push_back(kInf);
      x_.push_back(std::abs(r[row] - x_[n_ + row]));
      state_.push_back(VarState::kBasic);
      head_[row] = j;
    }

    // The starting basis is diagonal with entries +-1, so B^{-1} M is M
    // with artificial rows sign-flipped.
    T_ = Matrix(m_, total_);
    for (std::size_t i = 0; i < m_; ++i) {
      for (std::size_t j = 0; j < n_; ++j) T_(i, j) = -p_.A(i, j);
      T_(i, n_ + i) = 1.0;
    }
    for (std::size_t k = 0; k < num_art_; ++k) {
      const std::size_t row = art_row_[k];
      const double sign = art_sign_[k];
      for (std::size_t j = 0; j < n_ + m_; ++j) T_(row, j) *= sign;
      T_(row, n_ + m_ + k) = 1.0;
    }
  }

  // Pivots structural columns into rows still held by slacks (largest pivot
  // first within each column). A displaced slack keeps its current value, so
  // the point does not move; only slacks at a bound or at an interior zero
  // can become nonbasic. Starting from x = 0 this lands next to the null
  // space of A, which matters for thin slabs -delta <= A x <= delta.
  void crash() {
    std::vector<double> col_scale(n_, 0.0);
    for (std::size_t i = 0; i < m_; ++i) {
      for (std::size_t j = 0; j < n_; ++j) col_scale[j] = std::max(col_scale[j], std::abs(p_.A(i, j)));
    }
    for (std::size_t j = 0; j < n_; ++j) {
      if (state_[j] == VarState::kBasic || lb_[j] == ub_[j] || col_scale[j] == 0.0) continue;
      std::size_t best = m_;
      double best_abs = std::max(kPivotTol, kCrashRelTol * col_scale[j]);
      for (std::size_t i = 0; i < m_; ++i) {
        const std::size_t s = head_[i];
        if (s < n_ || s >= n_ + m_) continue;
        const bool at_bound = x_[s] == lb_[s] || x_[s] == ub_[s];
        const bool interior_zero = x_[s] == 0.0 && lb_[s] < 0.0 && ub_[s] > 0.0;
        if (!at_bound && !interior_zero) continue;
        if (std::abs(T_(i, j)) > best_abs) {
          best_abs = std::abs(T_(i, j));
          best = i;
        }
      }
      if (best == m_) continue;
      const std::size_t s = head_[best];
      state_[s] = x_[s] == lb_[s] ? VarState::kLower
                  : x_[s] == ub_[s] ? VarState::kUpper
                                    : VarState::kZero;
      head_[best] = j;
      state_[j] = VarState::kBasic;
      eliminate(best, j);
    }
  }

  // Entry of the original equality matrix M.
  double original(std::size_t row, std::size_t col) const {
    if (col < n_) return -p_.A(row, col);
    if (col < n_ + m_) return col - n_ == row ? 1.0 : 0.0;
    const std::size_t k = col - n_ - m_;
    return art_row_[k] == row ? art_sign_[k] : 0.0;
  }

  void set_phase_one_costs() {
    cost_.assign(total_, 0.0);
    for (std::size_t j = n_ + m_; j < total_; ++j) cost_[j] = 1.0;
    compute_reduced_costs();
  }

  void set_phase_two_costs() {
    cost_.assign(total_, 0.0);
    std::copy(p_.c.begin(), p_.c.end(), cost_.begin());
    compute_reduced_costs();
  }

  void compute_reduced_costs() {
    d_ = cost_;
    for (std::size_t i = 0; i < m_; ++i) {
      const double cb = cost_[head_[i]];
      if (cb == 0.0) continue;
      const auto row = T_.row(i);
      for (std::size_t j = 0; j < total_; ++j) d_[j] -= cb * row[j];
    }
    for (std::size_t i = 0; i < m_; ++i) d_[head_[i]] = 0.0;
  }

  // --- basis refactorisation --------------------------------------------

  // Rebuilds T = B^{-1} M, the basic values and the reduced costs from the
  // original data. Gauss-Jordan with partial pivoting on the m x m basis.
  void refactor() {
    if (m_ == 0) {
      compute_reduced_costs();
      return;
    }
    Matrix b(m_, m_);
    for (std::size_t i = 0; i < m_; ++i) {
      for (std::size_t c = 0; c < m_; ++c) b(i, c) = original(i, head_[c]);
    }
    Matrix inv = Matrix::identity(m_);
    for (std::size_t col = 0; col < m_; ++col) {
      std::size_t piv = col;
      for (std::size_t r = col + 1; r < m_; ++r) {
        if (std::abs(b(r, col)) > std::abs(b(piv, col))) piv = r;
      }
      if (std::abs(b(piv, col)) < 1e-13) throw LpError("simplex: basis became singular");
      if (piv != col) {
        std::swap_ranges(b.row(piv).begin(), b.row(piv).end(), b.row(col).begin());
        std::swap_ranges(inv.row(piv).begin(), inv.row(piv).end(), inv.row(col).begin());
      }
      const double scale = 1.0 / b(col, col);
      for (double& v : b.row(col)) v *= scale;
      for (double& v : inv.row(col)) v *= scale;
      for (std::size_t r = 0; r < m_; ++r) {
        if (r == col) continue;
        const double f = b(r, col);
        if (f == 0.0) continue;
        axpy(-f, b.row(col), b.row(r));
        axpy(-f, inv.row(col), inv.row(r));
      }
    }

    // T = inv * M using the block structure of M.
    for (std::size_t i = 0; i < m_; ++i) {
      auto trow = T_.row(i);
      std::fill(trow.begin(), trow.end(), 0.0);
      const auto irow = inv.row(i);
      for (std::size_t k = 0; k < m_; ++k) {
        const double f = irow[k];
        if (f == 0.0) continue;
        const auto arow = p_.A.row(k);
        for (std::size_t j = 0; j < n_; ++j) trow[j] -= f * arow[j];
        trow[n_ + k] = f;
      }
      for (std::size_t a = 0; a < num_art_; ++a) trow[n_ + m_ + a] = irow[art_row_[a]] * art_sign_[a];
    }

    // x_B = -inv * (N x_N)
    Vector nx(m_, 0.0);
    for (std::size_t j = 0; j < total_; ++j) {
      if (state_[j] == VarState::kBasic || x_[j] == 0.0) continue;
      for (std::size_t i = 0; i < m_; ++i) {
        const double mij = original(i, j);
        if (mij != 0.0) nx[i] += mij * x_[j];
      }
    }
    for (std::size_t i = 0; i < m_; ++i) x_[head_[i]] = -dot(inv.row(i), nx);
    // Iterative refinement of x_B against M x = 0; the inverse of an
    // ill-conditioned basis alone leaves residuals well above feas_tol.
    Vector res(m_);
    for (int round = 0; round < 2; ++round) {
      for (std::size_t i = 0; i < m_; ++i) {
        long double acc = 0.0L;
        const auto arow = p_.A.row(i);
        for (std::size_t j = 0; j < n_; ++j) acc -= static_cast<long double>(arow[j]) * x_[j];
        acc += x_[n_ + i];
        res[i] = static_cast<double>(acc);
      }
      for (std::size_t a = 0; a < num_art_; ++a) res[art_row_[a]] += art_sign_[a] * x_[n_ + m_ + a];
      for (std::size_t i = 0; i < m_; ++i) x_[head_[i]] -= dot(inv.row(i), res);
    }
    compute_reduced_costs();
    since_refactor_ = 0;
  }

  // --- iterations ---------------------------------------------------------

  bool eligible(std::size_t j) const {
    if (state_[j] == VarState::kBasic || lb_[j] == ub_[j]) return false;
    return (state_[j] == VarState::kLower && d_[j] < -opts_.opt_tol) ||
           (state_[j] == VarState::kUpper && d_[j] > opts_.opt_tol) ||
           (state_[j] == VarState::kZero && std::abs(d_[j]) > opts_.opt_tol);
  }

  std::size_t choose_entering() const {
    std::size_t best = total_;
    double best_score = 0.0;
    for (std::size_t j = 0; j < total_; ++j) {
      if (!eligible(j)) continue;
      if (bland_) return j;
      const double score = std::abs(d_[j]);
      if (score > best_score) {
        best_score = score;
        best = j;
      }
    }
    return best;
  }

  double primal_infeasibility() const {
    double worst = 0.0;
    for (std::size_t i = 0; i < m_; ++i) {
      const std::size_t j = head_[i];
      worst = std::max({worst, lb_[j] - x_[j], x_[j] - ub_[j]});
    }
    return worst;
  }

  LpStatus optimise() {
    refactor();
    std::size_t degenerate_streak = 0;
    bool verified = false;
    while (true) {
      if (iterations_ >= max_iters_) return LpStatus::kIterationLimit;
      const std::size_t e = choose_entering();
      if (e == total_) {
        if (verified) return LpStatus::kOptimal;
        // Confirm optimality against freshly rebuilt data.
        refactor();
        verified = true;
        continue;
      }
      verified = false;
      ++iterations_;
      if (bland_) ++bland_pivots_;
      const double sigma =
          state_[e] == VarState::kLower || (state_[e] == VarState::kZero && d_[e] < 0.0) ? 1.0 : -1.0;

      // Ratio test (Harris two-pass; plain minimum under Bland's rule).
      std::size_t leave = m_;
      double theta = kInf;
      {
        double bound = kInf;
        for (std::size_t i = 0; i < m_; ++i) {
          const double alpha = sigma * T_(i, e);
          if (std::abs(alpha) <= kPivotTol) continue;
          const std::size_t b = head_[i];
          const double room = alpha > 0.0 ? x_[b] - lb_[b] : ub_[b] - x_[b];
          if (room == kInf) continue;
          const double tol = bland_ ? 0.0 : harris_tol_;
          bound = std::min(bound, std::max(room + tol, 0.0) / std::abs(alpha));
        }
        double best_alpha = 0.0;
        std::size_t best_head = total_;
        for (std::size_t i = 0; i < m_; ++i) {
          const double alpha = sigma * T_(i, e);
          if (std::abs(alpha) <= kPivotTol) continue;
          const std::size_t b = head_[i];
          const double room = alpha > 0.0 ? x_[b] - lb_[b] : ub_[b] - x_[b];
          if (room == kInf) continue;
          const double ratio = std::max(room, 0.0) / std::abs(alpha);
          if (ratio > bound * (1.0 + 1e-12) + 1e-15) continue;
          const bool better = bland_ ? b < best_head : std::abs(alpha) > best_alpha;
          if (better) {
            best_alpha = std::abs(alpha);
            best_head = b;
            leave = i;
            theta = ratio;
          }
        }
      }

      const double flip = sigma > 0.0 ? ub_[e] - x_[e] : x_[e] - lb_[e];
      if (leave == m_ && flip == kInf) return LpStatus::kUnbounded;

      if (flip <= theta) {
        // Entering variable reaches its other bound first.
        theta = flip;
        move_basics(e, sigma * theta);
        state_[e] = sigma > 0.0 ? VarState::kUpper : VarState::kLower;
        x_[e] = sigma > 0.0 ? ub_[e] : lb_[e];
      } else {
        move_basics(e, sigma * theta);
        x_[e] += sigma * theta;
        pivot(leave, e, sigma);
      }

      if (theta <= kDegenerateStep) {
        if (++degenerate_streak >= opts_.bland_after) bland_ = true;
      } else {
        degenerate_streak = 0;
        bland_ = false;
      }
      if (++since_refactor_ >= refactor_every_) refactor();
    }
  }

  void move_basics(std::size_t e, double step) {
    if (step == 0.0) return;
    for (std::size_t i = 0; i < m_; ++i) {
      const double t = T_(i, e);
      if (t != 0.0) x_[head_[i]] -= step * t;
    }
  }

  void pivot(std::size_t r, std::size_t e, double sigma) {
    const std::size_t leaving = head_[r];
    const double alpha = sigma * T_(r, e);
    // The leaving variable sits on the bound it was heading for.
    if (alpha > 0.0) {
      state_[leaving] = VarState::kLower;
      x_[leaving] = lb_[leaving];
    } else {
      state_[leaving] = VarState::kUpper;
      x_[leaving] = ub_[leaving];
    }
    head_[r] = e;
    state_[e] = VarState::kBasic;
    eliminate(r, e);
  }

  // Row operations making column e the unit vector of row r.
  void eliminate(std::size_t r, std::size_t e) {
    auto prow = T_.row(r);
    const double inv = 1.0 / prow[e];
    for (double& v : prow) v *= inv;
    prow[e] = 1.0;
    for (std::size_t i = 0; i < m_; ++i) {
      if (i == r) continue;
      auto row = T_.row(i);
      const double f = row[e];
      if (f == 0.0) continue;
      for (std::size_t j = 0; j < total_; ++j) row[j] -= f * prow[j];
      row[e] = 0.0;
    }
    if (d_.empty()) return;  // crash runs before any costs exist
    const double fd = d_[e];
    if (fd != 0.0) {
      for (std::size_t j = 0; j < total_; ++j) d_[j] -= fd * prow[j];
    }
    d_[e] = 0.0;
  }

  // After phase I, swap zero-valued basic artificials for real columns and
  // pin every artificial to zero.
  void drive_out_artificials() {
    for (std::size_t r = 0; r < m_; ++r) {
      if (head_[r] < n_ + m_) continue;
      std::size_t best = total_;
      double best_abs = 1e-7;
      for (std::size_t j = 0; j < n_ + m_; ++j) {
        if (state_[j] == VarState::kBasic) continue;
        if (std::abs(T_(r, j)) > best_abs) {
          best_abs = std::abs(T_(r, j));
          best = j;
        }
      }
      if (best == total_) continue;  // redundant row; artificial stays basic at 0
      const std::size_t art = head_[r];
      pivot(r, best, T_(r, best) > 0.0 ? 1.0 : -1.0);
      state_[art] = VarState::kLower;
      x_[art] = 0.0;
    }
    for (std::size_t j = n_ + m_; j < total_; ++j) {
      ub_[j] = 0.0;
      if (state_[j] != VarState::kBasic) x_[j] = 0.0;
    }
    refactor();
  }

  LpSolution finish(LpStatus status) {
    LpSolution sol;
    sol.status = status;
    sol.iterations = iterations_;
    sol.bland_pivots = bland_pivots_;
    sol.x.assign(x_.begin(), x_.begin() + n_);
    sol.objective = dot(p_.c, sol.x);
    if (status == LpStatus::kOptimal) {
      const LpResiduals res = residuals(p_, sol.x);
      if (res.row_violation > opts_.feas_tol || res.bound_violation > opts_.feas_tol ||
          primal_infeasibility() > opts_.feas_tol) {
        char buf[160];
        std::snprintf(buf, sizeof buf,
                      "simplex: optimal basis violates feasibility (rows %.3g, bounds %.3g, basic %.3g)",
                      res.row_violation, res.bound_violation, primal_infeasibility());
        throw LpError(buf);
      }
    }
    return sol;
  }

  const LpProblem& p_;
  LpOptions opts_;
  std::size_t m_;
  std::size_t n_;
  std::size_t num_art_ = 0;
  std::size_t total_ = 0;
  std::size_t max_iters_ = 0;
  std::size_t refactor_every_ = 0;
  std::size_t since_refactor_ = 0;
  std::size_t iterations_ = 0;
  std::size_t bland_pivots_ = 0;
  double harris_tol_ = 0.0;
  bool bland_ = false;

  std::vector<std::size_t> art_row_;
  std::vector<double> art_sign_;
  Vector lb_, ub_, x_, cost_, d_;
  std::vector<VarState> state_;
  std::vector<std::size_t> head_;
  Matrix T_;
};

}  // namespace

void LpProblem::validate() const {
  const std::size_t n = c.size();
  const std::size_t m = A.rows();
  if (A.cols() != n && !(m == 0 && A.cols() == 0)) {
    throw DimensionError("LP: A has " + std::to_string(A.cols()) + " columns for " +
                         std::to_string(n) + " variables");
  }
  if (row_lb.size() != m || row_ub.size() != m) throw DimensionError("LP: row bound length");
  if (var_lb.size() != n || var_ub.size() != n) throw DimensionError("LP: variable bound length");
  if (!all_finite(c) || !all_finite(row_lb) || !all_finite(row_ub) || !all_finite(var_lb) ||
      !all_finite(var_ub) || !all_finite(A.data())) {
    throw DomainError("LP: every coefficient and bound must be finite");
  }
  for (std::size_t i = 0; i < m; ++i) {
    if (row_lb[i] > row_ub[i]) throw DomainError("LP: row_lb > row_ub at row " + std::to_string(i));
  }
  for (std::size_t j = 0; j < n; ++j) {
    if (var_lb[j] > var_ub[j]) throw DomainError("LP: var_lb > var_ub at " + std::to_string(j));
  }
}

std::string_view to_string(LpStatus status) {
  switch (status) {
    case LpStatus::kOptimal: return "optimal";
    case LpStatus::kInfeasible: return "infeasible";
    case LpStatus::kUnbounded: return "unbounded";
    case LpStatus::kIterationLimit: return "iteration_limit";
  }
  return "unknown";
}

LpSolution solve(const LpProblem& problem, const LpOptions& opts) {
  problem.validate();
  if (problem.A.rows() == 0 && problem.A.cols() == 0 && problem.num_vars() > 0) {
    LpProblem copy = problem;
    copy.A = Matrix(0, problem.num_vars());
    return BoundedSimplex(copy, opts).run();
  }
  return BoundedSimplex(problem, opts).run();
}

LpResiduals residuals(const LpProblem& problem, std::span<const double> x) {
  if (x.size() != problem.num_vars()) throw DimensionError("residuals: wrong point length");
  LpResiduals r;
  for (std::size_t j = 0; j < x.size(); ++j) {
    r.bound_violation =
        std::max({r.bound_violation, problem.var_lb[j] - x[j], x[j] - problem.var_ub[j]});
  }
  for (std::size_t i = 0; i < problem.num_rows(); ++i) {
    const double ax = dot(problem.A.row(i), x);
    r.row_violation = std::max({r.row_violation, problem.row_lb[i] - ax, ax - problem.row_ub[i]});
  }
  return r;
}

void write_lp(std::ostream& out, const LpProblem& problem) {
  const auto old_precision = out.precision(17);
  auto line = [&out](std::span<const double> v) {
    for (std::size_t i = 0; i < v.size(); ++i) out << (i ? " " : "") << v[i];
    out << '\n';
  };
  out << problem.num_vars() << ' ' << problem.num_rows() << '\n';
  line(problem.c);
  for (std::size_t i = 0; i < problem.num_rows(); ++i) line(problem.A.row(i));
  line(problem.row_lb);
  line(problem.row_ub);
  line(problem.var_lb);
  line(problem.var_ub);
  out.precision(old_precision);
}

LpProblem read_lp(std::istream& in) {
  std::size_t n = 0;
  std::size_t m = 0;
  if (!(in >> n >> m)) throw FormatError("LP dump: missing header");
  auto read_vec = [&in](std::size_t len) {
    Vector v(len);
    for (double& x : v) {
      if (!(in >> x)) throw FormatError("LP dump: truncated");
    }
    return v;
  };
  LpProblem p;
  p.c = read_vec(n);
  p.A = Matrix(m, n, read_vec(m * n));
  p.row_lb = read_vec(m);
  p.row_ub = read_vec(m);
  p.var_lb = read_vec(n);
  p.var_ub = read_vec(n);
  p.validate();
  return p;
}

}  // namespace hlsga
