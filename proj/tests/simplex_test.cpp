#include <gtest/gtest.h>

#include <sstream>

#include "hlsga/checks.hpp"
#include "hlsga/errors.hpp"
#include "hlsga/simplex.hpp"
#include "test_util.hpp"

namespace hlsga {
namespace {

LpProblem make_lp(Vector c, std::size_t m, Vector a, Vector row_lb, Vector row_ub, Vector var_lb,
                  Vector var_ub) {
  const std::size_t n = c.size();
  return LpProblem{std::move(c), Matrix(m, n, std::move(a)), std::move(row_lb), std::move(row_ub),
                   std::move(var_lb), std::move(var_ub)};
}

void expect_feasible(const LpProblem& lp, const LpSolution& sol, double tol = 1e-9) {
  const LpResiduals r = residuals(lp, sol.x);
  EXPECT_LE(r.row_violation, tol);
  EXPECT_LE(r.bound_violation, tol);
  EXPECT_NEAR(sol.objective, dot(lp.c, sol.x), 1e-12);
}

TEST(Simplex, TextbookMaximisation) {
  // max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18  ->  (2, 6), 36.
  const LpProblem lp = make_lp({-3, -5}, 3, {1, 0, 0, 2, 3, 2}, {-100, -100, -100},
                               {4, 12, 18}, {0, 0}, {100, 100});
  const LpSolution sol = solve(lp);
  ASSERT_EQ(sol.status, LpStatus::kOptimal);
  EXPECT_NEAR(sol.objective, -36.0, 1e-9);
  EXPECT_NEAR(sol.x[0], 2.0, 1e-9);
  EXPECT_NEAR(sol.x[1], 6.0, 1e-9);
  expect_feasible(lp, sol);
}

TEST(Simplex, BoxOnlyPicksBoundsBySign) {
  const LpProblem lp = make_lp({1, -2, 0.5}, 0, {}, {}, {}, {-1, -3, 2}, {4, 5, 7});
  const LpSolution sol = solve(lp);
  ASSERT_EQ(sol.status, LpStatus::kOptimal);
  EXPECT_EQ(sol.x[0], -1.0);
  EXPECT_EQ(sol.x[1], 5.0);
  EXPECT_EQ(sol.x[2], 2.0);
  EXPECT_DOUBLE_EQ(sol.objective, -1.0 - 10.0 + 1.0);
}

TEST(Simplex, EqualityRow) {
  // min x - y, x + y = 1, box [0, 1]  ->  (0, 1).
  const LpProblem lp = make_lp({1, -1}, 1, {1, 1}, {1}, {1}, {0, 0}, {1, 1});
  const LpSolution sol = solve(lp);
  ASSERT_EQ(sol.status, LpStatus::kOptimal);
  EXPECT_NEAR(sol.objective, -1.0, 1e-12);
  expect_feasible(lp, sol);
}

TEST(Simplex, SlabAroundZero) {
  // The relaxed-LP shape: |x - y| <= delta, box [-1, 1], min -x.
  const double delta = 1e-6;
  const LpProblem lp = make_lp({-1, 0}, 1, {1, -1}, {-delta}, {delta}, {-1, -1}, {1, 1});
  const LpSolution sol = solve(lp);
  ASSERT_EQ(sol.status, LpStatus::kOptimal);
  EXPECT_NEAR(sol.objective, -1.0, 1e-12);
  expect_feasible(lp, sol);
}

TEST(Simplex, DetectsInfeasibility) {
  const LpProblem lp = make_lp({1, 1}, 1, {1, 1}, {3}, {10}, {0, 0}, {1, 1});
  EXPECT_EQ(solve(lp).status, LpStatus::kInfeasible);
  const LpProblem clash = make_lp({0, 0}, 2, {1, 1, 1, 1}, {-1, 1.5}, {0.5, 2}, {-1, -1}, {1, 1});
  EXPECT_EQ(solve(clash).status, LpStatus::kInfeasible);
}

TEST(Simplex, BealeCyclingExampleTerminates) {
  // Classic example on which textbook Dantzig pivoting cycles.
  const LpProblem lp = make_lp({-0.75, 20, -0.5, 6}, 3,
                               {0.25, -8, -1, 9,  //
                                0.5, -12, -0.5, 3,  //
                                0, 0, 1, 0},
                               {-1e6, -1e6, -1e6}, {0, 0, 1}, {0, 0, 0, 0}, {100, 100, 100, 100});
  const LpSolution sol = solve(lp);
  ASSERT_EQ(sol.status, LpStatus::kOptimal);
  EXPECT_NEAR(sol.objective, -1.25, 1e-9);
  expect_feasible(lp, sol);
}

TEST(Simplex, DegenerateVertexWithManyTightRows) {
  // Eight rows all tight at the origin.
  const std::size_t m = 8;
  Vector a;
  for (std::size_t i = 0; i < m; ++i) {
    a.push_back(1.0 + static_cast<double>(i));
    a.push_back(-1.0);
    a.push_back(static_cast<double>(i % 3) - 1.0);
  }
  const LpProblem lp =
      make_lp({-1, -1, -1}, m, a, Vector(m, -50), Vector(m, 0), {0, 0, 0}, {5, 5, 5});
  const LpSolution sol = solve(lp, LpOptions{.bland_after = 1});
  ASSERT_EQ(sol.status, LpStatus::kOptimal);
  expect_feasible(lp, sol);
  const VertexEnumeration ref = enumerate_vertices(lp);
  ASSERT_TRUE(ref.feasible);
  EXPECT_NEAR(sol.objective, ref.objective, 1e-9);
}

TEST(Simplex, IterationLimitIsReported) {
  const LpProblem lp = make_lp({-3, -5}, 3, {1, 0, 0, 2, 3, 2}, {-100, -100, -100},
                               {4, 12, 18}, {0, 0}, {100, 100});
  const LpSolution sol = solve(lp, LpOptions{.max_iters = 1});
  EXPECT_EQ(sol.status, LpStatus::kIterationLimit);
  EXPECT_EQ(to_string(LpStatus::kIterationLimit), "iteration_limit");
}

TEST(Simplex, ValidateRejectsMalformedProblems) {
  LpProblem lp = make_lp({1, 1}, 1, {1, 1}, {0}, {1}, {0, 0}, {1, 1});
  EXPECT_NO_THROW(lp.validate());
  LpProblem bad = lp;
  bad.var_ub = {1};
  EXPECT_THROW(solve(bad), DimensionError);
  bad = lp;
  bad.row_lb = {2};
  EXPECT_THROW(solve(bad), DomainError);
  bad = lp;
  bad.var_lb[0] = -std::numeric_limits<double>::infinity();
  EXPECT_THROW(solve(bad), DomainError);
  bad = lp;
  bad.c[1] = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(solve(bad), DomainError);
}

TEST(Simplex, DumpRoundTripIsExact) {
  Rng rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const LpProblem lp = random_boxed_lp(rng);
    std::stringstream buf;
    write_lp(buf, lp);
    const LpProblem back = read_lp(buf);
    EXPECT_EQ(back.c, lp.c);
    EXPECT_EQ(back.A, lp.A);
    EXPECT_EQ(back.row_lb, lp.row_lb);
    EXPECT_EQ(back.row_ub, lp.row_ub);
    EXPECT_EQ(back.var_lb, lp.var_lb);
    EXPECT_EQ(back.var_ub, lp.var_ub);
  }
  std::stringstream garbage("2 1\n1 x\n");
  EXPECT_THROW(read_lp(garbage), FormatError);
  std::stringstream short_input("2 1\n1 2\n");
  EXPECT_THROW(read_lp(short_input), FormatError);
}

TEST(Simplex, AgreesWithVertexEnumeration) {
  Rng rng(2);
  int infeasible = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const LpProblem lp = random_boxed_lp(rng);
    const LpSolution sol = solve(lp);
    const VertexEnumeration ref = enumerate_vertices(lp);
    if (!ref.feasible) {
      EXPECT_EQ(sol.status, LpStatus::kInfeasible) << "trial " << trial;
      ++infeasible;
      continue;
    }
    ASSERT_EQ(sol.status, LpStatus::kOptimal) << "trial " << trial;
    EXPECT_NEAR(sol.objective, ref.objective, 1e-7) << "trial " << trial;
    expect_feasible(lp, sol);
    // No vertex beats the reported optimum.
    for (double v : ref.vertex_objectives) EXPECT_GE(v, sol.objective - 1e-7);
  }
  EXPECT_GT(infeasible, 0);
}

TEST(Simplex, NoSampledFeasiblePointBeatsOptimum) {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const LpProblem lp = random_boxed_lp(rng, 4);
    const LpSolution sol = solve(lp);
    if (sol.status != LpStatus::kOptimal) continue;
    for (int s = 0; s < 200; ++s) {
      Vector x(lp.num_vars());
      for (std::size_t j = 0; j < x.size(); ++j) {
        x[j] = testing::uniform(rng, lp.var_lb[j], lp.var_ub[j]);
      }
      const LpResiduals r = residuals(lp, x);
      if (r.row_violation > 0.0) continue;
      EXPECT_GE(dot(lp.c, x), sol.objective - 1e-9);
    }
  }
}

TEST(Simplex, InvariantUnderPositiveScaling) {
  Rng rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const LpProblem lp = random_boxed_lp(rng);
    const LpSolution base = solve(lp);
    LpProblem scaled = lp;
    const double kc = testing::uniform(rng, 0.1, 10.0);
    for (double& v : scaled.c) v *= kc;
    for (std::size_t i = 0; i < lp.num_rows(); ++i) {
      const double kr = testing::uniform(rng, 0.1, 10.0);
      for (double& v : scaled.A.row(i)) v *= kr;
      scaled.row_lb[i] *= kr;
      scaled.row_ub[i] *= kr;
    }
    const LpSolution other = solve(scaled);
    ASSERT_EQ(other.status, base.status) << "trial " << trial;
    if (base.status == LpStatus::kOptimal) {
      EXPECT_NEAR(other.objective, kc * base.objective, 1e-7 * (1.0 + std::abs(kc * base.objective)));
    }
  }
}

TEST(Simplex, LargeRelaxedSystemStaysFeasible) {
  // Random dense slab |A x| <= delta with a box, shaped like the fine-tuning LP.
  Rng rng(5);
  const std::size_t m = 40;
  const std::size_t n = 45;
  LpProblem lp{testing::random_vector(rng, n), testing::random_matrix(rng, m, n), Vector(m, -1e-6),
               Vector(m, 1e-6), Vector(n, -1.0), Vector(n, 1.0)};
  const LpSolution sol = solve(lp);
  ASSERT_EQ(sol.status, LpStatus::kOptimal);
  expect_feasible(lp, sol, 1e-9);
  EXPECT_LT(sol.objective, 0.0);
}

}  // namespace
}  // namespace hlsga
