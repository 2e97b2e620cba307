#include <gtest/gtest.h>

#include <random>

#include "powermod/lp.hpp"

using namespace powermod;

// min -x1 - 2 x2 s.t. x1 + x2 + s = 4, x1 + 3 x2 + s2 = 6  -> x=(3,1), obj -5
TEST(LpSolverTest, SmallKnownOptimum) {
  LpProblem p;
  int r1 = p.add_row(4.0);
  int r2 = p.add_row(6.0);
  int x1 = p.add_col(-1.0);
  int x2 = p.add_col(-2.0);
  int s1 = p.add_col(0.0);
  int s2 = p.add_col(0.0);
  p.add_entry(x1, r1, 1.0);
  p.add_entry(x1, r2, 1.0);
  p.add_entry(x2, r1, 1.0);
  p.add_entry(x2, r2, 3.0);
  p.add_entry(s1, r1, 1.0);
  p.add_entry(s2, r2, 1.0);
  auto sol = solve_lp(p);
  EXPECT_EQ(sol.status, LpStatus::Optimal);
  EXPECT_NEAR(sol.objective, -5.0, 1e-8);
  EXPECT_NEAR(sol.x[static_cast<size_t>(x1)], 3.0, 1e-6);
  EXPECT_NEAR(sol.x[static_cast<size_t>(x2)], 1.0, 1e-6);
}

TEST(LpSolverTest, DegenerateZeroRhs) {
  LpProblem p;
  int r = p.add_row(0.0);
  int x = p.add_col(1.0);
  int s = p.add_col(2.0);
  p.add_entry(x, r, 1.0);
  p.add_entry(s, r, 1.0);
  auto sol = solve_lp(p);
  EXPECT_EQ(sol.status, LpStatus::Optimal);
  EXPECT_NEAR(sol.objective, 0.0, 1e-9);
}

TEST(LpSolverTest, RandomStaircaseProgramsSolveToTolerance) {
  // Feasible-by-construction staircase programs: b = A x_true with
  // x_true > 0, so an interior point exists and the duality gap must close.
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.5, 2.0);
  for (int rep = 0; rep < 20; ++rep) {
    const int m = 8 + rep;
    LpProblem p;
    std::vector<double> rhs(static_cast<size_t>(m), 0.0);
    for (int i = 0; i < m; ++i) p.add_row(0.0);
    for (int i = 0; i < m; ++i) {
      for (int k = 0; k < 3; ++k) {
        int v = p.add_col(u(rng));
        const double xtrue = u(rng);
        p.add_entry(v, i, u(rng));
        rhs[static_cast<size_t>(i)] += p.cols.back()[0].second * xtrue;
        if (i + 1 < m && k == 0) {
          const double w = u(rng);
          p.add_entry(v, i + 1, w);
          rhs[static_cast<size_t>(i + 1)] += w * xtrue;
        }
      }
    }
    p.b = rhs;
    auto s = solve_lp(p);
    ASSERT_EQ(s.status, LpStatus::Optimal) << "rep " << rep;
    EXPECT_LE(s.primal_inf, 1e-9);
    EXPECT_LE(s.rel_gap, 1e-9);
    // solution must reproduce b
    std::vector<double> ax(static_cast<size_t>(m), 0.0);
    for (int j = 0; j < p.n; ++j)
      for (auto& [r, v] : p.cols[static_cast<size_t>(j)])
        ax[static_cast<size_t>(r)] += v * s.x[static_cast<size_t>(j)];
    for (int i = 0; i < m; ++i)
      EXPECT_NEAR(ax[static_cast<size_t>(i)], rhs[static_cast<size_t>(i)],
                  1e-7 * std::max(1.0, std::fabs(rhs[static_cast<size_t>(i)])));
  }
}

TEST(LpSolverTest, TightToleranceOnTinyProgram) {
  // min x1 + x2 s.t. x1 + x2 = 1 -> obj exactly 1
  LpProblem p;
  int r = p.add_row(1.0);
  int x1 = p.add_col(1.0);
  int x2 = p.add_col(1.0);
  p.add_entry(x1, r, 1.0);
  p.add_entry(x2, r, 1.0);
  LpOptions opt;
  opt.tol = 1e-12;
  auto sol = solve_lp(p, opt);
  EXPECT_EQ(sol.status, LpStatus::Optimal);
  EXPECT_NEAR(sol.objective, 1.0, 1e-10);
}
