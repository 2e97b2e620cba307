#include <gtest/gtest.h>

#include <sstream>

#include "powermod/plan.hpp"
#include "powermod/trace.hpp"
#include "test_util.hpp"

using namespace powermod;

TEST(PowerTraceTest, ValidatesInvariants) {
  EXPECT_THROW(PowerTrace::make({}, 1.0 / 6), ValidationError);
  EXPECT_THROW(PowerTrace::make({1.0}, 0.0), ValidationError);
  EXPECT_THROW(PowerTrace::make({-1.0}, 1.0 / 6), ValidationError);
  EXPECT_THROW(PowerTrace::make({5.0}, 1.0 / 6, 4.0), ValidationError);
  auto t = PowerTrace::make({1.0, 2.0}, 1.0 / 6);
  EXPECT_DOUBLE_EQ(t.p_max, 2.0);
}

TEST(TariffTest, FlatBroadcastAndLengthCheck) {
  auto t = Tariff::flat(0.046, 17.75);
  EXPECT_TRUE(t.is_flat());
  EXPECT_DOUBLE_EQ(t.alpha(123), 0.046);
  EXPECT_NO_THROW(t.check_matches(4320));
  auto tv = Tariff::time_varying({0.1, 0.2, 0.3}, 0.0);
  EXPECT_THROW(tv.check_matches(4), ValidationError);
  EXPECT_THROW(Tariff::flat(-0.1, 0.0), ValidationError);
  EXPECT_THROW(Tariff::flat(0.1, -1.0), ValidationError);
}

TEST(WorkloadStatsTest, SpecExamples) {
  auto s1 = workload_stats(PowerTrace::make({10, 10, 10, 10}, 1.0 / 6));
  EXPECT_DOUBLE_EQ(s1.par, 1.0);
  EXPECT_DOUBLE_EQ(s1.p70, 1.0);
  auto s2 = workload_stats(PowerTrace::make({10, 0, 0, 0}, 1.0 / 6));
  EXPECT_DOUBLE_EQ(s2.par, 4.0);
  EXPECT_DOUBLE_EQ(s2.p70, 0.25);
  auto s3 = workload_stats(PowerTrace::make({0, 0}, 1.0 / 6, 10.0));
  EXPECT_TRUE(s3.all_zero);
  EXPECT_DOUBLE_EQ(s3.par, 1.0);
}

TEST(FeasibilityTest, ZeroTraceAllZeroPlan) {
  auto trace = PowerTrace::make({0, 0}, 1.0 / 6, 5.0);
  auto model = ModulationModel::make(0.72, 0.02, 2, 1);
  Plan plan(2, 1);
  EXPECT_TRUE(check_feasible(plan, trace, model).feasible);
}

TEST(FeasibilityTest, DeferAllWithinDeadline) {
  auto trace = PowerTrace::make({10, 0}, 1.0 / 6);
  auto model = ModulationModel::make(0.72, 0.02, 2, 1);
  Plan plan(2, 1);
  plan.residual(1, 1) = 10.0;  // r carried from slot 0 into slot 1
  plan.admitted(1, 1) = 10.0;
  plan.y_max = 10.0;
  EXPECT_TRUE(check_feasible(plan, trace, model).feasible);
}

TEST(FeasibilityTest, UndrainedResidualViolatesHorizon) {
  auto trace = PowerTrace::make({10, 0}, 1.0 / 6);
  auto model = ModulationModel::make(0.72, 0.02, 2, 2);
  Plan plan(2, 2);
  plan.residual(1, 1) = 10.0;
  plan.admitted(1, 1) = 0.0;  // left unserved past the horizon
  plan.y_max = 10.0;
  auto rep = check_feasible(plan, trace, model);
  EXPECT_FALSE(rep.feasible);
  EXPECT_EQ(rep.violated, "eq4:horizon-drain");
  EXPECT_NEAR(rep.magnitude, 10.0, 1e-12);
}

TEST(FeasibilityTest, DeadlineViolationReported) {
  auto trace = PowerTrace::make({10, 0, 0}, 1.0 / 6);
  auto model = ModulationModel::make(0.72, 0.02, 2, 1);
  Plan plan(3, 1);
  plan.residual(1, 1) = 10.0;
  plan.admitted(1, 1) = 0.0;  // origin 0 demand due at slot 1 left unserved
  plan.y_max = 10.0;
  auto rep = check_feasible(plan, trace, model);
  EXPECT_FALSE(rep.feasible);
  EXPECT_EQ(rep.violated, "eq3:deadline");
}

TEST(FeasibilityTest, DimensionMismatchIsStructural) {
  auto trace = PowerTrace::make({10, 0}, 1.0 / 6);
  auto model = ModulationModel::make(0.72, 0.02, 2, 1);
  Plan plan(3, 1);
  EXPECT_THROW(check_feasible(plan, trace, model), ValidationError);
  Plan plan2(2, 2);
  EXPECT_THROW(check_feasible(plan2, trace, model), ValidationError);
}

TEST(EvaluateCostTest, FlatTraceTableRates) {
  auto trace = PowerTrace::make(std::vector<double>(6, 100.0), 1.0 / 6);
  auto tariff = Tariff::flat(0.046, 17.75);
  auto model = ModulationModel::make(0.72, 0.02, 2, 0);
  auto plan = make_baseline_plan(trace, 0);
  auto c = evaluate_cost(plan, trace, tariff, model);
  EXPECT_NEAR(c.energy_cost, 4.60, 1e-12);
  EXPECT_NEAR(c.peak_cost, 1775.00, 1e-12);
  EXPECT_NEAR(c.total, 1779.60, 1e-12);
  EXPECT_NEAR(c.savings_pct, 0.0, 1e-12);
}

TEST(EvaluateCostTest, ZeroTraceFlagsUndefinedSavings) {
  auto trace = PowerTrace::make({0, 0, 0}, 1.0 / 6, 1.0);
  auto c = evaluate_cost(Plan(3, 0), trace, Tariff::flat(0.046, 17.75),
                         ModulationModel::make(0.72, 0.0, 2, 0));
  EXPECT_DOUBLE_EQ(c.total, 0.0);
  EXPECT_DOUBLE_EQ(c.savings_pct, 0.0);
  EXPECT_TRUE(c.baseline_zero);
}

TEST(EvaluateCostTest, DropAllSingleSlot) {
  auto trace = PowerTrace::make({10}, 1.0 / 6);
  Plan plan(1, 0);
  plan.dropped(0, 0) = 10.0;
  auto c = evaluate_cost(plan, trace, Tariff::flat(0.0, 0.0),
                         ModulationModel::make(0.72, 0.0, 2, 0));
  EXPECT_NEAR(c.total, 1.20, 1e-12);
}

TEST(EvaluateCostTest, RejectsInfeasiblePlan) {
  auto trace = PowerTrace::make({10}, 1.0 / 6);
  Plan plan(1, 0);  // admits nothing, drops nothing
  EXPECT_THROW(evaluate_cost(plan, trace, Tariff::flat(0.046, 17.75),
                             ModulationModel::make(0.72, 0.0, 2, 0)),
               InfeasiblePlanError);
}

TEST(EvaluateCostTest, DelayLossUsesAgeAndExponent) {
  auto trace = PowerTrace::make({6, 0, 0}, 0.5);
  auto model = ModulationModel::make(1.0, 0.1, 2, 2);
  Plan plan(3, 2);
  plan.residual(1, 1) = 6.0;
  plan.admitted(1, 1) = 2.0;
  plan.residual(2, 2) = 4.0;
  plan.admitted(2, 2) = 4.0;
  plan.y_max = 4.0;
  auto c = evaluate_cost(plan, trace, Tariff::flat(0.0, 0.0), model);
  // 0.1 * (1^2*2 + 2^2*4) * 0.5
  EXPECT_NEAR(c.delay_loss, 0.1 * (2.0 + 16.0) * 0.5, 1e-12);
}

TEST(ModelProperties, ConservationOnRandomFeasiblePlans) {
  std::mt19937_64 rng(7);
  for (int rep = 0; rep < 50; ++rep) {
    auto trace = pmtest::random_trace(rng, 1 + rep % 17, 50.0);
    const int tau = rep % 4;
    auto plan = pmtest::random_feasible_plan(rng, trace, tau, rep % 2 == 0);
    auto model = ModulationModel::make(0.72, 0.02, 2, tau);
    ASSERT_TRUE(check_feasible(plan, trace, model).feasible);
    double treated = 0.0;
    for (size_t t = 0; t < plan.T; ++t)
      for (int a = 0; a <= tau; ++a)
        treated += plan.admitted(t, a) + plan.dropped(t, a);
    EXPECT_NEAR(treated, trace.total_power(),
                1e-9 * std::max(1.0, trace.total_power()));
  }
}

TEST(ModelProperties, CostMonotoneInPrices) {
  std::mt19937_64 rng(11);
  auto trace = pmtest::random_trace(rng, 24, 80.0);
  auto model = ModulationModel::make(0.72, 0.02, 2, 2);
  auto plan = pmtest::random_feasible_plan(rng, trace, 2);
  const double base =
      evaluate_cost(plan, trace, Tariff::flat(0.05, 10.0), model).total;
  EXPECT_GE(evaluate_cost(plan, trace, Tariff::flat(0.06, 10.0), model).total, base);
  EXPECT_GE(evaluate_cost(plan, trace, Tariff::flat(0.05, 11.0), model).total, base);
}

TEST(ModelProperties, BaselinePlanAlwaysFeasible) {
  std::mt19937_64 rng(13);
  for (int rep = 0; rep < 20; ++rep) {
    auto trace = pmtest::random_trace(rng, 1 + rep, 30.0);
    auto plan = make_baseline_plan(trace, rep % 3);
    auto model = ModulationModel::make(0.5, 0.1, 1, rep % 3);
    EXPECT_TRUE(check_feasible(plan, trace, model).feasible);
    EXPECT_DOUBLE_EQ(plan.y_max, trace.max_value());
  }
}

TEST(TraceCsvTest, RoundTripAndStrictness) {
  auto trace = PowerTrace::make({1.5, 0.0, 3.25}, 1.0 / 6);
  std::stringstream ss;
  write_trace_csv(ss, trace);
  auto back = read_trace_csv(ss, 1.0 / 6);
  ASSERT_EQ(back.size(), 3u);
  EXPECT_DOUBLE_EQ(back.values[2], 3.25);

  std::stringstream gap("slot,power_kw\n0,1.0\n2,2.0\n");
  EXPECT_THROW(read_trace_csv(gap, 1.0 / 6), ValidationError);
  std::stringstream neg("slot,power_kw\n0,-1.0\n");
  EXPECT_THROW(read_trace_csv(neg, 1.0 / 6), ValidationError);
  std::stringstream nan("slot,power_kw\n0,nan\n");
  EXPECT_THROW(read_trace_csv(nan, 1.0 / 6), ValidationError);
  std::stringstream hdr("slot,kw\n0,1.0\n");
  EXPECT_THROW(read_trace_csv(hdr, 1.0 / 6), ValidationError);
  std::stringstream junk("slot,power_kw\n0,1.0x\n");
  EXPECT_THROW(read_trace_csv(junk, 1.0 / 6), ValidationError);
}

TEST(PriceCsvTest, HeaderChecked) {
  std::stringstream ok("slot,price_per_kwh\n0,0.046\n1,0.05\n");
  auto p = read_price_csv(ok);
  ASSERT_EQ(p.size(), 2u);
  std::stringstream bad("slot,power_kw\n0,0.046\n");
  EXPECT_THROW(read_price_csv(bad), ValidationError);
}

TEST(PlanCsvTest, RoundTrip) {
  std::mt19937_64 rng(17);
  auto trace = pmtest::random_trace(rng, 9, 20.0);
  auto plan = pmtest::random_feasible_plan(rng, trace, 2);
  std::stringstream ss;
  write_plan_csv(ss, plan);
  auto back = read_plan_csv(ss, plan.T, plan.tau);
  auto model = ModulationModel::make(0.72, 0.02, 2, 2);
  EXPECT_TRUE(check_feasible(back, trace, model).feasible);
  for (size_t t = 0; t < plan.T; ++t)
    for (int a = 0; a <= 2; ++a) {
      EXPECT_NEAR(back.admitted(t, a), plan.admitted(t, a), 1e-9);
      EXPECT_NEAR(back.dropped(t, a), plan.dropped(t, a), 1e-9);
    }
}
