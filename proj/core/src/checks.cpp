#include "hlsga/checks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "hlsga/calculus.hpp"
#include "hlsga/csv.hpp"
#include "hlsga/hls.hpp"

namespace hlsga {

namespace {

// Gaussian elimination with partial pivoting; false when singular.
bool solve_square(std::vector<double> a, std::vector<double> b, std::size_t n, Vector& x) {
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r) {
      if (std::abs(a[r * n + col]) > std::abs(a[piv * n + col])) piv = r;
    }
    if (std::abs(a[piv * n + col]) < 1e-12) return false;
    if (piv != col) {
      for (std::size_t k = 0; k < n; ++k) std::swap(a[piv * n + k], a[col * n + k]);
      std::swap(b[piv], b[col]);
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = a[r * n + col] / a[col * n + col];
      if (f == 0.0) continue;
      for (std::size_t k = col; k < n; ++k) a[r * n + k] -= f * a[col * n + k];
      b[r] -= f * b[col];
    }
  }
  x.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) x[i] = b[i] / a[i * n + i];
  return true;
}

double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

}  // namespace

HlsConfig oracle_config() {
  HlsConfig cfg;
  cfg.delta = 0.0;
  cfg.t_grid.t0 = std::ldexp(1.0, -10);
  return cfg;
}

VertexEnumeration enumerate_vertices(const LpProblem& problem, double tol) {
  problem.validate();
  const std::size_t n = problem.num_vars();
  const std::size_t m = problem.num_rows();
  const std::size_t k = m + n;  // candidate constraints: rows then variables
  VertexEnumeration out;
  out.objective = std::numeric_limits<double>::infinity();

  std::vector<std::size_t> pick(n);
  for (std::size_t i = 0; i < n; ++i) pick[i] = i;
  if (n > k) return out;
  while (true) {
    for (std::uint64_t sides = 0; sides < (std::uint64_t{1} << n); ++sides) {
      std::vector<double> a(n * n, 0.0);
      std::vector<double> b(n, 0.0);
      for (std::size_t r = 0; r < n; ++r) {
        const std::size_t c = pick[r];
        const bool upper = (sides >> r) & 1u;
        if (c < m) {
          for (std::size_t j = 0; j < n; ++j) a[r * n + j] = problem.A(c, j);
          b[r] = upper ? problem.row_ub[c] : problem.row_lb[c];
        } else {
          a[r * n + (c - m)] = 1.0;
          b[r] = upper ? problem.var_ub[c - m] : problem.var_lb[c - m];
        }
      }
      Vector x;
      if (!solve_square(std::move(a), std::move(b), n, x)) continue;
      const LpResiduals res = residuals(problem, x);
      if (res.row_violation > tol || res.bound_violation > tol) continue;
      const double obj = dot(problem.c, x);
      out.vertex_objectives.push_back(obj);
      if (!out.feasible || obj < out.objective) {
        out.feasible = true;
        out.objective = obj;
        out.x = x;
      }
    }
    // Next n-combination of 0..k-1 in lexicographic order.
    std::size_t i = n;
    while (i > 0 && pick[i - 1] == k - n + i - 1) --i;
    if (i == 0) break;
    ++pick[i - 1];
    for (std::size_t j = i; j < n; ++j) pick[j] = pick[j - 1] + 1;
  }
  return out;
}

LpProblem random_boxed_lp(Rng& rng, std::size_t max_dim) {
  const std::size_t n = 1 + uniform_index(rng, max_dim);
  const std::size_t m = 1 + uniform_index(rng, max_dim);
  LpProblem p;
  p.c.resize(n);
  p.var_lb.resize(n);
  p.var_ub.resize(n);
  Vector inside(n);
  for (std::size_t j = 0; j < n; ++j) {
    p.c[j] = uniform(rng, -1.0, 1.0);
    p.var_lb[j] = uniform(rng, -2.0, 0.0);
    p.var_ub[j] = p.var_lb[j] + uniform(rng, 0.5, 2.5);
    inside[j] = uniform(rng, p.var_lb[j], p.var_ub[j]);
  }
  p.A = Matrix(m, n);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) p.A(i, j) = uniform(rng, -1.0, 1.0);
  }
  const Vector r = matvec(p.A, inside);
  p.row_lb.resize(m);
  p.row_ub.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double kind = uniform01(rng);
    if (kind < 0.15) {
      p.row_lb[i] = p.row_ub[i] = r[i];
    } else if (kind < 0.25) {
      p.row_lb[i] = uniform(rng, -3.0, 3.0);
      p.row_ub[i] = p.row_lb[i] + uniform(rng, 0.0, 0.5);
    } else {
      p.row_lb[i] = r[i] - uniform(rng, 0.0, 1.0);
      p.row_ub[i] = r[i] + uniform(rng, 0.0, 1.0);
    }
  }
  return p;
}

std::vector<CheckResult> check_analytic_directions() {
  std::vector<CheckResult> out;
  struct Case {
    const char* name;
    double lambda;
    double w;
  };
  for (const Case& c : {Case{"quadratic", 0.0, 0.0}, Case{"ridge", 0.0, 1.0}}) {
    const AnalyticBilevel problem(parse_analytic_kind(c.name));
    const OracleDirection oracle = analytic_bilevel_oracle(c.name, c.lambda, c.w);
    const Vector l0{c.lambda};
    const Vector w0{c.w};
    const FinetuneOutcome got = finetune(problem, l0, w0, oracle_config());
    const double err = std::max(std::abs(got.direction.d_lambda[0] - oracle.d_lambda),
                                std::abs(got.direction.d_w[0] - oracle.d_w));
    CheckResult r;
    r.name = std::string(c.name) + " direction";
    r.passed = err <= 1e-6;
    r.detail = "d=(" + format_g9(got.direction.d_lambda[0]) + "," + format_g9(got.direction.d_w[0]) +
               ") expected (" + format_g9(oracle.d_lambda) + "," + format_g9(oracle.d_w) +
               ") err=" + format_g9(err);
    out.push_back(r);

    if (std::string_view(c.name) == "quadratic") {
      const auto& s = got.search;
      const double f_star = s.curve[s.star_index].val_loss;
      CheckResult ls;
      ls.name = "quadratic line search";
      ls.passed = f_star <= 1e-6 && std::abs(s.t_star - 1.0) <= 1e-9;
      ls.detail = "t*=" + format_g9(s.t_star) + " F=" + format_g9(f_star);
      out.push_back(ls);
    }
  }
  return out;
}

CheckResult check_lp_differential(std::size_t count, std::uint64_t seed) {
  Rng rng = make_rng(seed, SeedStream::kSynth, 0x6c70);
  std::size_t failures = 0;
  std::size_t infeasible = 0;
  double worst_gap = 0.0;
  double worst_violation = 0.0;
  for (std::size_t t = 0; t < count; ++t) {
    const LpProblem p = random_boxed_lp(rng);
    const VertexEnumeration ref = enumerate_vertices(p);
    const LpSolution sol = solve(p);
    if (!ref.feasible) {
      ++infeasible;
      if (sol.status != LpStatus::kInfeasible) ++failures;
      continue;
    }
    if (sol.status != LpStatus::kOptimal) {
      ++failures;
      continue;
    }
    const LpResiduals res = residuals(p, sol.x);
    const double gap = std::abs(sol.objective - ref.objective);
    const double viol = std::max(res.row_violation, res.bound_violation);
    worst_gap = std::max(worst_gap, gap);
    worst_violation = std::max(worst_violation, viol);
    if (gap > 1e-7 || viol > 1e-9) ++failures;
  }
  CheckResult r;
  r.name = "lp vs vertex enumeration";
  r.passed = failures == 0;
  std::ostringstream os;
  os << count << " problems (" << infeasible << " infeasible), failures=" << failures
     << " max_gap=" << format_g9(worst_gap) << " max_violation=" << format_g9(worst_violation);
  r.detail = os.str();
  return r;
}

std::vector<CheckResult> run_oracle_suite(std::uint64_t seed) {
  std::vector<CheckResult> out = check_analytic_directions();
  out.push_back(check_lp_differential(100, seed));
  return out;
}

}  // namespace hlsga
