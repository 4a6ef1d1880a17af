#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "hlsga/hls.hpp"
#include "hlsga/rng.hpp"
#include "hlsga/simplex.hpp"

namespace hlsga {

/// Brute-force LP reference for tiny problems: solves every n x n system of
/// active row / bound constraints and keeps the best feasible point.
struct VertexEnumeration {
  bool feasible = false;
  double objective = 0.0;
  Vector x;
  std::vector<double> vertex_objectives;  // every feasible vertex found
};

VertexEnumeration enumerate_vertices(const LpProblem& problem, double tol = 1e-9);

/// Random LP with n, m in 1..max_dim and finite boxes. Rows are mostly built
/// around a point inside the box (feasible); some get equality rows or
/// arbitrary bounds that may be infeasible.
LpProblem random_boxed_lp(Rng& rng, std::size_t max_dim = 5);

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Exact rows (delta = 0) and a step grid 2^-10 * 2^k that contains t = 1.
HlsConfig oracle_config();

std::vector<CheckResult> check_analytic_directions();
/// Differential test of solve() against enumerate_vertices() on `count`
/// random problems: objective within 1e-7, violations at most 1e-9,
/// statuses agree.
CheckResult check_lp_differential(std::size_t count, std::uint64_t seed);

/// Everything above; used by the `oracles` command.
std::vector<CheckResult> run_oracle_suite(std::uint64_t seed = 0);

}  // namespace hlsga
