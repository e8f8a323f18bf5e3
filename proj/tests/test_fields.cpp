#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "osgood/field.hpp"

using namespace osgood;

namespace {

oracle::Phi as_phi(const Modulus& m) {
  return [m](long double t) { return static_cast<long double>(m(static_cast<double>(t))); };
}

std::vector<Modulus> all_builtins() {
  std::vector<Modulus> out;
  for (const auto& name : families::builtin_names()) out.push_back(families::by_name(name, 2.0));
  return out;
}

std::vector<Modulus> convergent_builtins() {
  std::vector<Modulus> out;
  for (const auto& m : all_builtins()) {
    if (m.tag() == SeriesTag::KnownConvergent) out.push_back(m);
  }
  return out;
}

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

}  // namespace

TEST(BlowupField, BreakpointValues) {
  const auto f = build_blowup_field(families::poly2());
  EXPECT_EQ(f.eval(0.0), 1.0);
  EXPECT_EQ(f.eval(-5.0), 1.0);
  EXPECT_DOUBLE_EQ(f.eval(1.0), 1.0);
  EXPECT_NEAR(f.eval(std::exp(1.0)), 4.0 * std::exp(1.0), 1e-14 * 4.0 * std::exp(1.0));
  EXPECT_NEAR(f.eval(std::exp(2.0)), 9.0 * std::exp(2.0), 1e-14 * 9.0 * std::exp(2.0));
  for (long k = 0; k <= 30; ++k) {
    EXPECT_NEAR(f.eval(std::exp(static_cast<double>(k))), f.breakpoint(k), 1e-14 * f.breakpoint(k)) << k;
  }
  EXPECT_THROW(f.breakpoint(-1), std::out_of_range);
}

TEST(BlowupField, SubUnitPieceIsAffine) {
  const auto f = build_blowup_field(families::constant(3.0));
  EXPECT_DOUBLE_EQ(f.eval(0.5), 2.0);
  EXPECT_DOUBLE_EQ(f.eval(1.0), 3.0);
}

TEST(BlowupField, OverflowsToInfinityNotNaN) {
  const auto f = build_blowup_field(families::poly2());
  EXPECT_TRUE(std::isinf(f.eval(1e308)));
}

TEST(NonuniqField, BreakpointAndRepairValues) {
  const auto f = build_nonuniqueness_field(families::poly2());
  EXPECT_EQ(f.eval(0.0), 0.0);
  EXPECT_EQ(f.eval(-1.0), 0.0);
  EXPECT_DOUBLE_EQ(f.eval(1.0), 1.0);
  EXPECT_DOUBLE_EQ(f.eval(5.0), 1.0);
  EXPECT_DOUBLE_EQ(f.eval(0.6), 0.6);
  for (long n = 1; n <= 40; ++n) {
    const double y = std::exp(-static_cast<double>(n));
    const double expect = y * families::poly2()(static_cast<double>(n - 1));
    EXPECT_NEAR(f.eval(y), expect, 1e-14 * expect) << n;
    EXPECT_NEAR(f.breakpoint(-n), expect, 1e-14 * expect) << n;
  }
  const auto g = build_nonuniqueness_field(families::constant(2.0));
  EXPECT_DOUBLE_EQ(g.eval(0.5), 1.0);  // phi(0) y
  EXPECT_DOUBLE_EQ(g.eval(3.0), 2.0);  // phi(0)
}

TEST(NonuniqField, TinyArgumentsStayFinite) {
  const auto f = build_nonuniqueness_field(families::poly2());
  for (double y : {1e-200, 1e-305, 4.9e-324}) {
    const double v = f.eval(y);
    EXPECT_TRUE(std::isfinite(v)) << y;
    EXPECT_GT(v, 0.0) << y;
    EXPECT_LT(v, 1e-190) << y;
  }
}

TEST(NonuniqField, ExponentialModulusDoesNotVanishAtZero) {
  // F(e^-n) = e^-n e^(n-1) = 1/e for every n: this is why the construction truncates phi
  const auto f = build_nonuniqueness_field(families::exponential());
  for (int n = 2; n <= 400; n += 37) {
    EXPECT_NEAR(f.eval(std::exp(-static_cast<double>(n))), std::exp(-1.0), 1e-12) << n;
  }
  const auto t = build_nonuniqueness_field(truncate_modulus(families::exponential()));
  EXPECT_LT(t.eval(std::exp(-300.0)), 1e-120);
}

TEST(Fields, MatchDirectInterpolationOracle) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (const auto& m : all_builtins()) {
    const auto up = build_blowup_field(m);
    const auto down = build_nonuniqueness_field(m);
    for (int i = 0; i < 2000; ++i) {
      const double y_up = std::exp(-3.0 + 40.0 * unit(rng));
      const double y_down = std::exp(-40.0 + 41.0 * unit(rng));
      const double a = static_cast<double>(oracle::blowup_field(as_phi(m), y_up));
      const double b = static_cast<double>(oracle::nonuniq_field(as_phi(m), y_down));
      EXPECT_LT(rel(up.eval(y_up), a), 1e-12) << m.family() << " y=" << y_up;
      EXPECT_LT(rel(down.eval(y_down), b), 1e-12) << m.family() << " y=" << y_down;
    }
  }
}

TEST(Fields, ContinuousAtEveryBreakpoint) {
  for (const auto& m : all_builtins()) {
    const auto up = build_blowup_field(m);
    for (int k = 0; k <= 30; ++k) {
      const double y = std::exp(static_cast<double>(k));
      const double left = up.eval(std::nextafter(y, 0.0));
      const double right = up.eval(std::nextafter(y, INFINITY));
      EXPECT_LT(rel(left, right), 1e-14) << m.family() << " k=" << k;
    }
    const auto down = build_nonuniqueness_field(m);
    for (int n = 0; n <= 30; ++n) {
      const double y = std::exp(-static_cast<double>(n));
      const double left = down.eval(std::nextafter(y, 0.0));
      const double right = down.eval(std::nextafter(y, INFINITY));
      EXPECT_LT(rel(left, right), 1e-14) << m.family() << " n=" << n;
    }
    if (m.family() != "exp") {
      EXPECT_LT(std::abs(down.eval(1e-320)), 1e-300);
    }
  }
}

TEST(Fields, LogSpaceAgreesWithLinear) {
  for (const auto& m : all_builtins()) {
    const auto up = build_blowup_field(m);
    const auto down = build_nonuniqueness_field(m);
    for (double u = -30.0; u <= 30.0; u += 0.173) {
      const double y = std::exp(u);
      EXPECT_LT(rel(up.eval_log(u), up.eval(y) / y), 1e-12) << m.family() << " u=" << u;
      EXPECT_LT(rel(down.eval_log(u), down.eval(y) / y), 1e-12) << m.family() << " u=" << u;
    }
    for (int k = 1; k <= 20; ++k) {
      // breakpoints: both neighbouring segment formulas give the same slope
      const double u = k;
      EXPECT_LT(rel(up.eval_log_segment(u, k - 1), up.eval_log_segment(u, k)), 1e-14);
      EXPECT_LT(rel(down.eval_log_segment(-u, -k - 1), down.eval_log_segment(-u, -k)), 1e-14);
    }
  }
  EXPECT_THROW(eval_field_logspace(build_blowup_field(families::poly2()), std::nan("")), std::domain_error);
}

TEST(Fields, SegmentBookkeeping) {
  const auto up = build_blowup_field(families::poly2());
  EXPECT_EQ(up.segment_of(2.0, +1), 2);
  EXPECT_EQ(up.segment_of(2.0, -1), 1);
  EXPECT_EQ(up.segment_of(-3.0, +1), -1);
  EXPECT_EQ(up.segment_bounds(3), (std::pair<double, double>{3.0, 4.0}));
  EXPECT_TRUE(std::isinf(up.segment_bounds(-1).first));
  const auto down = build_nonuniqueness_field(families::poly2());
  EXPECT_EQ(down.segment_of(-2.0, -1), -3);
  EXPECT_EQ(down.segment_of(-2.0, +1), -2);
  EXPECT_EQ(down.segment_of(0.5, -1), 0);
  EXPECT_TRUE(std::isinf(down.segment_bounds(0).second));
}

TEST(OsgoodCondition, HoldsForConvergentNonuniquenessFields) {
  for (const auto& m : convergent_builtins()) {
    const auto f = build_nonuniqueness_field(m);
    const ConditionReport r = check_osgood_difference(f.as_scalar_field(), m, 1.0);
    EXPECT_TRUE(r.passed) << m.family() << " ratio=" << r.worst_ratio;
    EXPECT_EQ(r.samples_checked, 100000);
    EXPECT_LT(r.worst_ratio, 1.0);
  }
}

TEST(OsgoodCondition, HoldsForDivergentModuliToo) {
  // the construction satisfies the condition for any modulus; only the series decides the rest
  for (const auto& m : {families::linear(), families::n_log_n(), families::sqrt_rate()}) {
    const ConditionReport r = check_osgood_difference(build_nonuniqueness_field(m).as_scalar_field(), m, 1.0);
    EXPECT_TRUE(r.passed) << m.family() << " ratio=" << r.worst_ratio;
  }
}

TEST(OsgoodCondition, SqrtFieldFailsNearZero) {
  const ConditionReport r = check_osgood_difference(demo::sqrt_field(), families::linear(), 1.0);
  EXPECT_FALSE(r.passed);
  EXPECT_GT(r.worst_ratio, 1.0);
  EXPECT_LT(r.worst_witness.z - r.worst_witness.y, 1e-6);
}

TEST(OsgoodCondition, LinearFieldPassesWithConstantModulus) {
  const ConditionReport r = check_osgood_difference(demo::linear_field(2.0), families::constant(2.5), 1.0);
  EXPECT_TRUE(r.passed);
  EXPECT_NEAR(r.worst_ratio, 0.8, 1e-6);
}

TEST(OsgoodCondition, DeterministicPerSeed) {
  const auto m = families::poly2();
  const auto f = build_nonuniqueness_field(m).as_scalar_field();
  DifferencePlan p;
  p.samples = 5000;
  const auto a = check_osgood_difference(f, m, 1.0, p);
  const auto b = check_osgood_difference(f, m, 1.0, p);
  EXPECT_EQ(a.worst_ratio, b.worst_ratio);
  EXPECT_EQ(a.worst_witness.y, b.worst_witness.y);
  p.seed = 1;
  const auto c = check_osgood_difference(f, m, 1.0, p);
  EXPECT_NE(a.worst_witness.x, c.worst_witness.x);
  EXPECT_THROW(check_osgood_difference(f, m, 0.0, p), std::invalid_argument);
}

TEST(GrowthCondition, BlowupFieldsStayUnderTheirModulusWithRatioGuard) {
  for (const auto& m : all_builtins()) {
    const double psi = growth_guard(m);
    const ConditionReport r = check_growth_bound(build_blowup_field(m).as_scalar_field(), m, psi);
    EXPECT_TRUE(r.passed) << m.family() << " ratio=" << r.worst_ratio;
  }
  EXPECT_NEAR(growth_guard(families::poly2()), std::numbers::e * 4.0, 1e-12);
  EXPECT_NEAR(growth_guard(families::constant(3.0)), std::numbers::e, 1e-15);
}

TEST(GrowthCondition, WithoutGuardTheSegmentPeaksExceedTheBound) {
  const ConditionReport r =
      check_growth_bound(build_blowup_field(families::poly2()).as_scalar_field(), families::poly2(), 1.0);
  EXPECT_FALSE(r.passed);
  EXPECT_LT(r.worst_ratio, std::numbers::e * 4.0);
}

TEST(GrowthCondition, LinearFieldExample) {
  GrowthPlan p;
  p.both_signs = true;
  EXPECT_TRUE(check_growth_bound(demo::linear_field(2.0), families::constant(2.0), 1.01, p).passed);
}

TEST(GrowthCondition, RiccatiViolatesLinearGrowth) {
  GrowthPlan p;
  p.both_signs = true;
  const ConditionReport r = check_growth_bound(demo::riccati_field(), families::linear(), 1.0, p);
  EXPECT_FALSE(r.passed);
}

TEST(DemoFields, Values) {
  EXPECT_DOUBLE_EQ(demo::sqrt_field()(0.0, -4.0), 4.0);
  EXPECT_DOUBLE_EQ(demo::riccati_field()(3.0, 2.0), 5.0);
  EXPECT_DOUBLE_EQ(demo::linear_field(2.0)(0.0, 3.0), -6.0);
  EXPECT_DOUBLE_EQ(reverse_time(demo::linear_field(2.0))(1.0, 3.0), 6.0);
  const ScalarField t{[](double x, double y) { return x * y; }, false, "xy"};
  EXPECT_DOUBLE_EQ(reverse_time(t)(2.0, 3.0), 6.0);  // -(-2 * 3)
}

TEST(DemoFields, SqrtFamilySolvesTheOde) {
  const double inf = std::numeric_limits<double>::infinity();
  for (auto [a, b] : {std::pair{-1.0, 2.0}, std::pair{0.0, 0.0}, std::pair{-inf, 1.0}}) {
    for (double x = -3.0; x <= 4.0; x += 0.25) {
      const double h = 1e-6;
      const double dy = (demo_sqrt_family(a, b, x + h) - demo_sqrt_family(a, b, x - h)) / (2 * h);
      EXPECT_NEAR(dy, demo::sqrt_field()(x, demo_sqrt_family(a, b, x)), 1e-6) << a << " " << b << " " << x;
    }
    EXPECT_EQ(demo_sqrt_family(a, b, b), 0.0);
  }
  EXPECT_DOUBLE_EQ(demo_sqrt_family(0.0, 1.0, 3.0), 4.0);
  EXPECT_DOUBLE_EQ(demo_sqrt_family(0.0, 1.0, -2.0), -4.0);
  EXPECT_THROW(demo_sqrt_family(1.0, 0.0, 0.0), std::invalid_argument);
}
