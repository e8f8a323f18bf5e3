#pragma once

#include <cfloat>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "osgood/modulus.hpp"

namespace osgood {

/// A continuous slope function F(x, y).
struct ScalarField {
  std::function<double(double, double)> fn;
  bool autonomous = false;
  std::string label;

  double operator()(double x, double y) const { return fn(x, y); }
};

inline double eval_field(const ScalarField& f, double x, double y) { return f(x, y); }

enum class PiecewiseKind { BlowUp, NonUniqueness };

inline const char* to_string(PiecewiseKind k) {
  return k == PiecewiseKind::BlowUp ? "blowup" : "nonuniq";
}

/// Autonomous field that is affine in y between breakpoints on the grid e^k.
///
/// BlowUp:        F(y) = 1 for y <= 0, F(0) = 1, F(e^n) = e^n phi(n) for n >= 0.
/// NonUniqueness: F(y) = 0 for y <= 0, F(e^-n) = e^-n phi(n-1) for n >= 1,
///                F(y) = phi(0) y on [1/e, 1], F(y) = phi(0) for y >= 1.
///
/// Segments are indexed by k with u = log y in [k, k+1]. Breakpoints are
/// never tabulated; each evaluation derives its segment from floor(log y).
class PiecewiseLogLinearField {
 public:
  PiecewiseLogLinearField(PiecewiseKind kind, Modulus m) : kind_(kind), m_(std::move(m)) {}

  PiecewiseKind kind() const { return kind_; }
  const Modulus& modulus() const { return m_; }

  /// F(y).
  double eval(double y) const {
    if (std::isnan(y)) return y;
    return kind_ == PiecewiseKind::BlowUp ? eval_blowup(y) : eval_nonuniq(y);
  }

  /// F(e^u) / e^u, evaluated without forming e^u on the breakpoint grid.
  double eval_log(double u) const { return eval_log_segment(u, segment_of(u, +1)); }

  /// The affine formula of segment `seg`, continued to any u. The integrator
  /// freezes the segment for a whole step so the kink never falls inside one.
  double eval_log_segment(double u, long seg) const {
    if (kind_ == PiecewiseKind::BlowUp) {
      if (seg < 0) return std::exp(-u) + (m_(0.0) - 1.0);
      return log_affine(u, seg, m_(static_cast<double>(seg)), m_(static_cast<double>(seg + 1)));
    }
    if (seg >= 0) return m_(0.0) * std::exp(-u);
    if (seg == -1) return m_(0.0);
    return log_affine(u, seg, m_(static_cast<double>(-seg - 1)),
                      m_(static_cast<double>(-seg - 2)));
  }

  /// Segment containing u when moving in direction `dir` (a breakpoint belongs
  /// to the segment ahead of it).
  long segment_of(double u, int dir) const {
    double k = dir >= 0 ? std::floor(u) : std::ceil(u) - 1.0;
    if (kind_ == PiecewiseKind::BlowUp) {
      if (k < 0.0) return -1;
    } else {
      if (k >= 0.0) return 0;
    }
    constexpr double kLimit = 1e15;
    return static_cast<long>(std::clamp(k, -kLimit, kLimit));
  }

  /// (lo, hi) of a segment in log coordinates; infinite where the piece is unbounded.
  std::pair<double, double> segment_bounds(long seg) const {
    constexpr double inf = std::numeric_limits<double>::infinity();
    if (kind_ == PiecewiseKind::BlowUp && seg < 0) return {-inf, 0.0};
    if (kind_ == PiecewiseKind::NonUniqueness && seg >= 0) return {0.0, inf};
    return {static_cast<double>(seg), static_cast<double>(seg) + 1.0};
  }

  /// Stored breakpoint value F(e^k).
  double breakpoint(long k) const {
    const double y = std::exp(static_cast<double>(k));
    if (kind_ == PiecewiseKind::BlowUp) {
      if (k < 0) throw std::out_of_range("blow-up breakpoints start at k = 0");
      return y * m_(static_cast<double>(k));
    }
    if (k >= 0) return m_(0.0);
    return y * m_(static_cast<double>(-k - 1));
  }

  ScalarField as_scalar_field() const {
    auto self = std::make_shared<const PiecewiseLogLinearField>(*this);
    return {[self](double, double y) { return self->eval(y); }, true,
            std::string(to_string(kind_)) + "(" + m_.family() + ")"};
  }

 private:
  static constexpr double kE = std::numbers::e;

  // Segment [k, k+1] in u, value phi_lo at u=k and phi_hi at u=k+1 (as F/y).
  // With s = u - k, F/y = e^-s [(1-w) phi_lo + w e phi_hi], w = (e^s - 1)/(e - 1).
  static double log_affine(double u, long k, double phi_lo, double phi_hi) {
    const double s = u - static_cast<double>(k);
    const double w = std::expm1(s) / (kE - 1.0);
    return std::exp(-s) * ((1.0 - w) * phi_lo + w * kE * phi_hi);
  }

  // Largest integer k with e^k <= y, computed so the stored breakpoint e^k is exact.
  static long grid_floor(double y) {
    long k = static_cast<long>(std::floor(std::log(y)));
    while (std::exp(static_cast<double>(k)) > y) --k;
    while (std::exp(static_cast<double>(k + 1)) <= y) ++k;
    return k;
  }

  double eval_blowup(double y) const {
    if (y <= 0.0) return 1.0;
    if (y <= 1.0) return 1.0 + y * (m_(0.0) - 1.0);
    if (!std::isfinite(y) || std::log(y) >= 709.0) return std::numeric_limits<double>::infinity();
    const long n = grid_floor(y);
    const double base = std::exp(static_cast<double>(n));
    const double w = (y / base - 1.0) / (kE - 1.0);
    const double lo = m_(static_cast<double>(n));
    if (w == 0.0) return base * lo;
    return base * ((1.0 - w) * lo + w * kE * m_(static_cast<double>(n + 1)));
  }

  double eval_nonuniq(double y) const {
    if (y <= 0.0) return 0.0;
    const double phi0 = m_(0.0);
    if (y >= 1.0) return phi0;
    if (y >= std::exp(-1.0)) return phi0 * y;
    if (y < 1e-300) return y * eval_log_segment(std::log(y), segment_of(std::log(y), +1));
    const long k = grid_floor(y);  // k <= -2
    const double base = std::exp(static_cast<double>(k));
    const double w = (y / base - 1.0) / (kE - 1.0);
    const double lo = m_(static_cast<double>(-k - 1));
    if (w == 0.0) return base * lo;
    return base * ((1.0 - w) * lo + w * kE * m_(static_cast<double>(-k - 2)));
  }

  PiecewiseKind kind_;
  Modulus m_;
};

inline PiecewiseLogLinearField build_blowup_field(const Modulus& m) {
  return {PiecewiseKind::BlowUp, m};
}

inline PiecewiseLogLinearField build_nonuniqueness_field(const Modulus& m) {
  return {PiecewiseKind::NonUniqueness, m};
}

inline double eval_field(const PiecewiseLogLinearField& f, double, double y) { return f.eval(y); }

inline double eval_field_logspace(const PiecewiseLogLinearField& f, double u) {
  if (std::isnan(u)) throw std::domain_error("log-space evaluation at NaN");
  return f.eval_log(u);
}

namespace demo {

/// y' = 2 sqrt|y|.
inline ScalarField sqrt_field() {
  return {[](double, double y) { return 2.0 * std::sqrt(std::abs(y)); }, true, "sqrt"};
}

/// y' = 1 + y^2.
inline ScalarField riccati_field() {
  return {[](double, double y) { return 1.0 + y * y; }, true, "riccati"};
}

/// y' = -L y.
inline ScalarField linear_field(double L) {
  return {[L](double, double y) { return -L * y; }, true, "linear:" + std::to_string(L)};
}

}  // namespace demo

/// The solution family of y' = 2 sqrt|y|, y(0) = 0 parametrized by a <= b
/// (either may be infinite).
inline double demo_sqrt_family(double a, double b, double x) {
  if (a > b) throw std::invalid_argument("demo_sqrt_family needs a <= b");
  if (x < a) return -(x - a) * (x - a);
  if (x > b) return (x - b) * (x - b);
  return 0.0;
}

/// (x, y) -> -F(-x, y).
inline ScalarField reverse_time(const ScalarField& f) {
  auto inner = f.fn;
  return {[inner](double x, double y) { return -inner(-x, y); }, f.autonomous,
          "reversed(" + f.label + ")"};
}

struct Witness {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
};

struct ConditionReport {
  std::int64_t samples_checked = 0;
  double worst_ratio = 0.0;
  Witness worst_witness;
  bool passed = true;
};

/// Sampling plan for the difference bound: (x, y) uniform in the box, gap
/// z - y log-stratified over [gap_lo, gap_hi]. A quarter of the samples sit at
/// or straddle the anchor points, where counterexample fields concentrate
/// their irregularity.
struct DifferencePlan {
  double x_lo = 0.0, x_hi = 1.0;
  double y_lo = 0.0, y_hi = 1.0;
  double gap_lo = 1e-12, gap_hi = 1.0;
  std::int64_t samples = 100000;
  std::uint64_t seed = 0;
  std::vector<double> anchors{0.0};
};

/// Sampling plan for the growth bound: |y| log-stratified over [y_lo, y_hi].
struct GrowthPlan {
  double x_lo = 0.0, x_hi = 1.0;
  double y_lo = 1.0, y_hi = 4.851651954097903e8;  // e^20
  std::int64_t samples = 100000;
  std::uint64_t seed = 0;
  bool both_signs = false;
};

namespace detail {

// Absolute rounding error allowed when forming F(y) - F(z) in floating point.
inline double difference_slack(double fy, double fz) {
  return 16.0 * DBL_EPSILON * (std::abs(fy) + std::abs(fz));
}

}  // namespace detail

/// Samples |F(x,y) - F(x,z)| < (z - y) psi phi(|log(z - y)|) for y < z <= y + 1.
///
/// The ratio reported per sample is the observed difference, less its
/// floating-point rounding slack, over the bound; passed iff every ratio < 1.
inline ConditionReport check_osgood_difference(const ScalarField& f, const Modulus& m,
                                               double psi_const, const DifferencePlan& plan = {}) {
  if (!(psi_const > 0.0)) throw std::invalid_argument("psi_const must be positive");
  std::mt19937_64 rng(plan.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double log_lo = std::log(plan.gap_lo);
  const double log_hi = std::log(plan.gap_hi);
  ConditionReport rep;
  const std::int64_t n = plan.samples;
  for (std::int64_t i = 0; i < n; ++i) {
    const double stratum = (static_cast<double>(i) + unit(rng)) / static_cast<double>(n);
    const double gap = std::exp(log_lo + stratum * (log_hi - log_lo));
    const double x = plan.x_lo + unit(rng) * (plan.x_hi - plan.x_lo);
    double y = plan.y_lo + unit(rng) * (plan.y_hi - plan.y_lo);
    const double mode = unit(rng);
    if (!plan.anchors.empty() && mode < 0.25) {
      const auto idx = static_cast<std::size_t>(unit(rng) * static_cast<double>(plan.anchors.size()));
      const double a = plan.anchors[std::min(idx, plan.anchors.size() - 1)];
      y = mode < 0.125 ? a : a - gap * unit(rng);
    }
    const double z = y + gap;
    const double d = z - y;
    if (!(d > 0.0) || d > 1.0) continue;
    const double fy = f(x, y), fz = f(x, z);
    const double bound = d * psi_const * m(std::abs(std::log(d)));
    const double excess = std::max(0.0, std::abs(fy - fz) - detail::difference_slack(fy, fz));
    const double ratio = excess / bound;
    ++rep.samples_checked;
    if (ratio > rep.worst_ratio || rep.samples_checked == 1) {
      rep.worst_ratio = ratio;
      rep.worst_witness = {x, y, z};
    }
  }
  rep.passed = rep.worst_ratio < 1.0;
  return rep;
}

/// e * max phi(n+1)/phi(n) over 0 <= n <= n_max. A blow-up field peaks at
/// e^(n+1) phi(n+1) on a segment whose growth floor is about e^n phi(n), so
/// this psi makes the growth bound hold for it on y <= e^n_max.
inline double growth_guard(const Modulus& m, int n_max = 21) {
  double worst = 1.0;
  for (int n = 0; n <= n_max; ++n) {
    worst = std::max(worst, m(static_cast<double>(n + 1)) / m(static_cast<double>(n)));
  }
  return std::numbers::e * worst;
}

/// Samples |F(x,y)| < |y| psi phi(log(2 + |y|)).
inline ConditionReport check_growth_bound(const ScalarField& f, const Modulus& m, double psi_const,
                                          const GrowthPlan& plan = {}) {
  if (!(psi_const > 0.0)) throw std::invalid_argument("psi_const must be positive");
  std::mt19937_64 rng(plan.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double log_lo = std::log(plan.y_lo);
  const double log_hi = std::log(plan.y_hi);
  ConditionReport rep;
  const std::int64_t n = plan.samples;
  for (std::int64_t i = 0; i < n; ++i) {
    const double stratum = (static_cast<double>(i) + unit(rng)) / static_cast<double>(n);
    double y = std::exp(log_lo + stratum * (log_hi - log_lo));
    const double x = plan.x_lo + unit(rng) * (plan.x_hi - plan.x_lo);
    if (plan.both_signs && unit(rng) < 0.5) y = -y;
    const double ay = std::abs(y);
    const double bound = ay * psi_const * m(std::log(2.0 + ay));
    const double ratio = std::abs(f(x, y)) / bound;
    ++rep.samples_checked;
    if (ratio > rep.worst_ratio || rep.samples_checked == 1) {
      rep.worst_ratio = ratio;
      rep.worst_witness = {x, y, y};
    }
  }
  rep.passed = rep.worst_ratio < 1.0;
  return rep;
}

}  // namespace osgood
