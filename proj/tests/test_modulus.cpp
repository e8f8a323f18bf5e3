#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "osgood/modulus.hpp"

using namespace osgood;

namespace {

oracle::Phi as_phi(const Modulus& m) {
  return [m](long double t) { return static_cast<long double>(m(static_cast<double>(t))); };
}

}  // namespace

TEST(Modulus, BuiltinValues) {
  EXPECT_DOUBLE_EQ(families::constant(2.5)(7.0), 2.5);
  EXPECT_DOUBLE_EQ(families::linear()(3.0), 4.0);
  EXPECT_DOUBLE_EQ(families::sqrt_rate()(4.0), 3.0);
  EXPECT_DOUBLE_EQ(families::poly2()(2.0), 9.0);
  EXPECT_DOUBLE_EQ(families::max_square()(0.5), 1.0);
  EXPECT_DOUBLE_EQ(families::max_square()(3.0), 9.0);
  EXPECT_DOUBLE_EQ(families::exponential()(1.0), std::numbers::e);
  EXPECT_DOUBLE_EQ(families::n_log_n()(std::numbers::e - 1.0), std::numbers::e * 2.0);
  EXPECT_DOUBLE_EQ(families::power(1.5)(3.0), 8.0);
}

TEST(Modulus, Tags) {
  EXPECT_EQ(families::poly2().tag(), SeriesTag::KnownConvergent);
  EXPECT_EQ(families::max_square().tag(), SeriesTag::KnownConvergent);
  EXPECT_EQ(families::exponential().tag(), SeriesTag::KnownConvergent);
  EXPECT_EQ(families::linear().tag(), SeriesTag::KnownDivergent);
  EXPECT_EQ(families::n_log_n().tag(), SeriesTag::KnownDivergent);
  EXPECT_EQ(families::power(1.0).tag(), SeriesTag::KnownDivergent);
  EXPECT_EQ(families::power(1.01).tag(), SeriesTag::KnownConvergent);
  EXPECT_EQ(families::poly2().with_tag(SeriesTag::Untagged).tag(), SeriesTag::Untagged);
}

TEST(Modulus, DomainErrors) {
  const Modulus m = families::linear();
  EXPECT_THROW(m(-1e-300), std::domain_error);
  EXPECT_THROW(m(std::numeric_limits<double>::quiet_NaN()), std::domain_error);
  const Modulus bad([](double t) { return t - 1.0; }, "bad");
  EXPECT_THROW(bad(0.5), std::domain_error);
  EXPECT_NO_THROW(bad(2.0));
  EXPECT_THROW(families::constant(0.0), std::invalid_argument);
  EXPECT_THROW(families::power(-1.0), std::invalid_argument);
  EXPECT_THROW(families::by_name("nope"), std::invalid_argument);
}

TEST(Modulus, ByNameCoversBuiltins) {
  for (const auto& name : families::builtin_names()) {
    EXPECT_EQ(families::by_name(name, 2.0).family(), name);
  }
  EXPECT_DOUBLE_EQ(families::by_name("constant", 3.0)(100.0), 3.0);
  EXPECT_DOUBLE_EQ(families::by_name("power", 3.0)(1.0), 8.0);
}

TEST(Modulus, SampledMonotoneForAllBuiltins) {
  for (const auto& name : families::builtin_names()) {
    EXPECT_TRUE(sampled_monotone(families::by_name(name, 2.0), 0, 1000, 100.0)) << name;
  }
  const Modulus dip([](double t) { return t < 50.0 ? 2.0 : 1.0; }, "dip");
  EXPECT_FALSE(sampled_monotone(dip, 0, 1000, 100.0));
}

TEST(Modulus, TableInterpolatesAndClampsBeyondLastPoint) {
  const Modulus m = families::table({{0.0, 1.0}, {2.0, 3.0}, {4.0, 11.0}});
  EXPECT_DOUBLE_EQ(m(0.0), 1.0);
  EXPECT_DOUBLE_EQ(m(1.0), 2.0);
  EXPECT_DOUBLE_EQ(m(3.0), 7.0);
  EXPECT_DOUBLE_EQ(m(4.0), 11.0);
  EXPECT_DOUBLE_EQ(m(1e9), 11.0);
  EXPECT_EQ(m.tag(), SeriesTag::Untagged);
}

TEST(Modulus, TableRejectsBadInput) {
  EXPECT_THROW(families::table({}), std::invalid_argument);
  EXPECT_THROW(families::table({{1.0, 1.0}, {2.0, 2.0}}), std::invalid_argument);
  EXPECT_THROW(families::table({{0.0, 2.0}, {1.0, 1.0}}), std::invalid_argument);
  EXPECT_THROW(families::table({{0.0, 0.0}, {1.0, 1.0}}), std::invalid_argument);
  EXPECT_THROW(families::table({{0.0, 1.0}, {0.0, 2.0}}), std::invalid_argument);
}

TEST(Truncate, Examples) {
  const Modulus e = truncate_modulus(families::exponential());
  EXPECT_DOUBLE_EQ(e(3.0), 9.0);
  EXPECT_DOUBLE_EQ(e(0.0), 1.0);
  EXPECT_DOUBLE_EQ(truncate_modulus(families::linear())(5.0), 6.0);
  EXPECT_EQ(e.tag(), SeriesTag::KnownConvergent);
}

TEST(Truncate, IdempotentAndMatchesIntegerFormula) {
  for (const auto& name : families::builtin_names()) {
    const Modulus m = families::by_name(name, 0.5);
    const Modulus once = truncate_modulus(m);
    const Modulus twice = truncate_modulus(once);
    for (double t = 0.0; t <= 60.0; t += 0.37) EXPECT_DOUBLE_EQ(once(t), twice(t)) << name << " t=" << t;
    for (int n = 1; n <= 50; ++n) {
      const double dn = n;
      EXPECT_DOUBLE_EQ(once(dn), std::min(m(dn), dn * dn)) << name;
    }
  }
}

TEST(PartialSum, MatchesFrozenAndBruteForce) {
  const Modulus m = families::poly2();
  EXPECT_NEAR(partial_sum(m, 10), oracle::kPoly2Partial10, 1e-15);
  for (const auto& name : families::builtin_names()) {
    const Modulus f = families::by_name(name, 3.0);
    const double brute = static_cast<double>(oracle::brute_sum(as_phi(f), 1, 5000));
    EXPECT_NEAR(partial_sum(f, 5000), brute, 1e-14 * std::max(1.0, brute)) << name;
  }
  EXPECT_THROW(partial_sum(m, 0), std::invalid_argument);
}

TEST(PartialSum, IncrementIsOneTerm) {
  for (const auto& name : families::builtin_names()) {
    const Modulus m = families::by_name(name, 2.0);
    for (std::int64_t N : {1, 2, 7, 100, 1000}) {
      const double diff = partial_sum(m, N + 1) - partial_sum(m, N);
      const double term = 1.0 / m(static_cast<double>(N + 1));
      EXPECT_NEAR(diff, term, 8 * std::numeric_limits<double>::epsilon() * partial_sum(m, N + 1)) << name;
    }
  }
}

TEST(PartialSum, ZetaTwoLimit) {
  // sum_{k>=2} 1/k^2 = pi^2/6 - 1; the tail after 2^20 terms is ~1e-6
  const double s = partial_sum(families::poly2(), std::int64_t{1} << 20);
  EXPECT_NEAR(s, oracle::kZeta2Minus1, 1e-6);
  EXPECT_LT(s, oracle::kZeta2Minus1);
}

TEST(RangeSum, Examples) {
  EXPECT_NEAR(range_sum(families::poly2(), 0, 10), 1.0 + oracle::kPoly2Partial10, 1e-15);
  EXPECT_DOUBLE_EQ(range_sum(families::poly2(), 5, 4), 0.0);
}

TEST(TailBounds, FrozenExamples) {
  const TailBounds p = tail_bounds(families::poly2(), 10);
  EXPECT_NEAR(p.lower, 1.0 / 12.0, 1e-10);
  EXPECT_NEAR(p.upper, 1.0 / 11.0, 1e-10);
  EXPECT_EQ(p.status, TailStatus::Ok);
  const TailBounds e = tail_bounds(families::exponential(), 1);
  EXPECT_NEAR(e.lower, std::exp(-2.0), 1e-12);
  EXPECT_NEAR(e.upper, std::exp(-1.0), 1e-12);
  const TailBounds d = tail_bounds(families::linear(), 10);
  EXPECT_TRUE(std::isinf(d.lower));
  EXPECT_TRUE(std::isinf(d.upper));
  EXPECT_THROW(tail_bounds(families::poly2(), 0), std::invalid_argument);
}

TEST(TailBounds, SandwichTheTrueTail) {
  // true tail T lies in [head, head + int_M^inf dt/phi] with head = sum_{N<n<=M}
  struct Case {
    Modulus m;
    std::function<double(double)> rest;
  };
  const std::vector<Case> cases = {
      {families::poly2(), [](double M) { return 1.0 / (1.0 + M); }},
      {families::max_square(), [](double M) { return 1.0 / M; }},
      {families::exponential(), [](double M) { return std::exp(-M); }},
      {families::power(1.5), [](double M) { return 2.0 / std::sqrt(1.0 + M); }},
      {families::power(3.0), [](double M) { return 0.5 / ((1.0 + M) * (1.0 + M)); }},
  };
  constexpr long M = 200000;
  for (const auto& c : cases) {
    for (std::int64_t N : {1, 5, 20, 100}) {
      const TailBounds tb = tail_bounds(c.m, N);
      const double head = static_cast<double>(oracle::brute_sum(as_phi(c.m), N + 1, M));
      const double eps = 1e-9;
      EXPECT_LE(tb.lower, head + c.rest(M) + eps) << c.m.family() << " N=" << N;
      EXPECT_GE(tb.upper, head - eps) << c.m.family() << " N=" << N;
      EXPECT_LE(tb.lower, tb.upper);
    }
  }
}

TEST(TailBounds, PowerFamilyClosedForm) {
  // int_a^inf (1+t)^-p dt = (1+a)^(1-p) / (p-1)
  for (double p : {1.5, 2.0, 3.0}) {
    const TailBounds tb = tail_bounds(families::power(p), 50);
    // lower omits the extrapolated remainder past the 1e15 cutoff, 2e-7 at most here
    const double lo = std::pow(52.0, 1.0 - p) / (p - 1.0);
    EXPECT_LE(tb.lower, lo * (1.0 + 1e-12)) << p;
    EXPECT_NEAR(tb.lower, lo, 1e-10 * lo + std::pow(1e15, 1.0 - p) / (p - 1.0)) << p;
    EXPECT_NEAR(tb.upper, std::pow(51.0, 1.0 - p) / (p - 1.0), 1e-10 * tb.upper) << p;
  }
}

TEST(TailBounds, NonMonotoneModulusIsRejected) {
  const Modulus wiggle([](double t) { return t < 1e3 ? 1.0 + t : 1.0; }, "wiggle");
  EXPECT_THROW(tail_bounds(wiggle, 10), std::domain_error);
}

TEST(Classify, TagsAreAuthoritative) {
  const SeriesEstimate c = classify_series(families::poly2());
  EXPECT_EQ(c.verdict, Verdict::Converges);
  EXPECT_FALSE(c.inconsistent);
  EXPECT_NEAR(c.partial + c.tail_lower, oracle::kZeta2Minus1, 1e-9);
  const SeriesEstimate d = classify_series(families::linear());
  EXPECT_EQ(d.verdict, Verdict::Diverges);
  EXPECT_FALSE(d.inconsistent);
}

TEST(Classify, CheckpointsArePowersOfTwo) {
  ClassifyOptions opt;
  opt.budget = 1 << 10;
  const SeriesEstimate e = classify_series(families::poly2(), opt);
  ASSERT_EQ(e.checkpoints.size(), 11u);
  for (std::size_t k = 0; k < e.checkpoints.size(); ++k) {
    EXPECT_EQ(e.checkpoints[k].first, std::int64_t{1} << k);
    EXPECT_NEAR(e.checkpoints[k].second, partial_sum(families::poly2(), e.checkpoints[k].first), 1e-15);
  }
}

TEST(Classify, InconsistentTagIsFlaggedNotOverridden) {
  const Modulus liar = families::constant(1e-7).with_tag(SeriesTag::KnownConvergent);
  const SeriesEstimate e = classify_series(liar);
  EXPECT_EQ(e.verdict, Verdict::Converges);
  EXPECT_TRUE(e.inconsistent);
  EXPECT_FALSE(e.evidence.empty());
  const SeriesEstimate f = classify_series(families::exponential().with_tag(SeriesTag::KnownDivergent));
  EXPECT_EQ(f.verdict, Verdict::Diverges);
  EXPECT_TRUE(f.inconsistent);
}

TEST(Classify, UntaggedIsConservative) {
  // fast convergence: the integral tail is far below 1e-12
  EXPECT_EQ(classify_series(families::exponential().with_tag(SeriesTag::Untagged)).verdict, Verdict::Converges);
  // huge partial sums that keep growing
  EXPECT_EQ(classify_series(families::constant(1e-7).with_tag(SeriesTag::Untagged)).verdict, Verdict::Diverges);
  // both slow: the tail after 2^20 terms is ~1e-6, the harmonic sum only ~14
  EXPECT_EQ(classify_series(families::poly2().with_tag(SeriesTag::Untagged)).verdict, Verdict::Unknown);
  EXPECT_EQ(classify_series(families::linear().with_tag(SeriesTag::Untagged)).verdict, Verdict::Unknown);
}

TEST(Classify, NeverContradictsTagsAcrossFamilies) {
  for (const auto& name : families::builtin_names()) {
    const Modulus m = families::by_name(name, 2.0);
    ClassifyOptions opt;
    opt.budget = 1 << 14;
    const SeriesEstimate e = classify_series(m, opt);
    const Verdict expect = m.tag() == SeriesTag::KnownConvergent ? Verdict::Converges : Verdict::Diverges;
    EXPECT_EQ(e.verdict, expect) << name;
    EXPECT_FALSE(e.inconsistent) << name;
  }
}

TEST(Compensated, BeatsNaiveSummation) {
  detail::CompensatedSum acc;
  double naive = 0.0;
  acc.add(1.0);
  naive += 1.0;
  for (int i = 0; i < 1000000; ++i) {
    acc.add(1e-16);
    naive += 1e-16;
  }
  EXPECT_NEAR(acc.value(), 1.0 + 1e-10, 1e-22);
  EXPECT_DOUBLE_EQ(naive, 1.0);
}
