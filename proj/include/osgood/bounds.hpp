#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "osgood/crossings.hpp"

namespace osgood {

struct BoundKind {
  enum class Type { LipschitzEnvelope, SeparationSqrt, SeparationLog, GrowthSqrt, GrowthLog };
  Type type = Type::LipschitzEnvelope;
  double L = 1.0;  ///< only meaningful for LipschitzEnvelope

  static BoundKind lipschitz(double L) {
    if (!(L > 0.0)) throw std::invalid_argument("Lipschitz constant must be positive");
    return {Type::LipschitzEnvelope, L};
  }
  static BoundKind separation_sqrt() { return {Type::SeparationSqrt, 1.0}; }
  static BoundKind separation_log() { return {Type::SeparationLog, 1.0}; }
  static BoundKind growth_sqrt() { return {Type::GrowthSqrt, 1.0}; }
  static BoundKind growth_log() { return {Type::GrowthLog, 1.0}; }
};

inline std::string to_string(const BoundKind& k) {
  switch (k.type) {
    case BoundKind::Type::LipschitzEnvelope: {
      char buf[64];
      std::snprintf(buf, sizeof buf, "lipschitz:%g", k.L);
      return buf;
    }
    case BoundKind::Type::SeparationSqrt: return "sep-sqrt";
    case BoundKind::Type::SeparationLog: return "sep-log";
    case BoundKind::Type::GrowthSqrt: return "growth-sqrt";
    case BoundKind::Type::GrowthLog: return "growth-log";
  }
  return "?";
}

/// A floor or ceiling value with its logarithm; the log is authoritative
/// since e^-x^2 is subnormal long before the region where it is claimed.
struct EnvelopeValue {
  double value = 0.0;
  double log_value = 0.0;
  bool valid = true;  ///< false outside the region where the estimate is stated
};

struct LipschitzEnvelope {
  double upper = 0.0;
  double lower = 0.0;
};

/// |y(x)| <= e^{Lx}|y0| and |y1 - y2|(x) >= e^{-Lx}|y1(0) - y2(0)|.
inline LipschitzEnvelope lipschitz_envelope(double L, double y0, double x) {
  if (!(L > 0.0)) throw std::domain_error("Lipschitz constant must be positive");
  if (!(x >= 0.0)) throw std::domain_error("envelope needs x >= 0");
  const double a = std::abs(y0);
  return {std::exp(L * x) * a, std::exp(-L * x) * a};
}

/// e^{-x^2} (valid for x > 35) or e^{-e^{2x} - 4} (valid for x >= 0).
inline EnvelopeValue separation_lower(const BoundKind& kind, double x) {
  EnvelopeValue v;
  switch (kind.type) {
    case BoundKind::Type::SeparationSqrt:
      v.log_value = -x * x;
      v.valid = x > 35.0;
      break;
    case BoundKind::Type::SeparationLog:
      v.log_value = -std::exp(2.0 * x) - 4.0;
      v.valid = x >= 0.0;
      break;
    default: throw std::invalid_argument("separation_lower needs a separation kind");
  }
  v.value = std::exp(v.log_value);
  return v;
}

/// e^{x^2/4 + x} or e^{e^x}.
inline EnvelopeValue growth_upper(const BoundKind& kind, double x) {
  EnvelopeValue v;
  v.valid = x >= 0.0;
  switch (kind.type) {
    case BoundKind::Type::GrowthSqrt: v.log_value = 0.25 * x * x + x; break;
    case BoundKind::Type::GrowthLog: v.log_value = std::exp(x); break;
    default: throw std::invalid_argument("growth_upper needs a growth kind");
  }
  v.value = std::exp(v.log_value);
  return v;
}

/// Lower bounds for the first time x_n the separation reaches e^-n.
struct CrossingBound {
  double value = 0.0;       ///< closed form
  double telescoped = 0.0;  ///< the summed gap bounds, (1 - 1/e) sum_{v < n} 1/rate(v)
  bool refined = false;     ///< Log kind: the 1/2 ln(n+1) refinement applies (n >= 4)
};

/// Sqrt: (1 - 1/e)(2 sqrt n - 2 log(sqrt n + 1)).
/// Log:  max((1 - 1/e) log n, [n >= 4] 1/2 ln(n + 1)).
inline CrossingBound crossing_lower_bound(const BoundKind& kind, long n) {
  if (n < 1) throw std::domain_error("crossing bound needs n >= 1");
  constexpr double c = 1.0 - 1.0 / std::numbers::e;
  const double dn = static_cast<double>(n);
  CrossingBound b;
  switch (kind.type) {
    case BoundKind::Type::SeparationSqrt: {
      const double r = std::sqrt(dn);
      b.value = c * (2.0 * r - 2.0 * std::log(r + 1.0));
      for (long v = 0; v < n; ++v) b.telescoped += 1.0 / (1.0 + std::sqrt(static_cast<double>(v)));
      break;
    }
    case BoundKind::Type::SeparationLog: {
      b.refined = n >= 4;
      b.value = c * std::log(dn);
      if (b.refined) b.value = std::max(b.value, 0.5 * std::log(dn + 1.0));
      for (long v = 0; v < n; ++v) b.telescoped += 1.0 / (static_cast<double>(v) + 1.0);
      break;
    }
    default: throw std::invalid_argument("crossing_lower_bound needs a separation kind");
  }
  b.telescoped *= c;
  return b;
}

/// Exact crossing times of the extremal separations f' = -f(1 + sqrt|log f|)
/// and f' = -f(1 + |log f|), f(0) = 1, at f = e^-n.
inline double crossing_oracle(const BoundKind& kind, long n) {
  if (n < 1) throw std::domain_error("crossing oracle needs n >= 1");
  const double dn = static_cast<double>(n);
  switch (kind.type) {
    case BoundKind::Type::SeparationSqrt: {
      const double v = std::sqrt(dn);
      return 2.0 * (v - std::log1p(v));
    }
    case BoundKind::Type::SeparationLog: return std::log1p(dn);
    default: throw std::invalid_argument("crossing_oracle needs a separation kind");
  }
}

/// Log-space slopes of the extremal experiments.
namespace extremal {

/// u' = -(1 + sqrt(-u)), the log of f' = -f(1 + sqrt|log f|) while f <= 1.
inline ScalarField separation_sqrt() {
  return {[](double, double u) { return -(1.0 + std::sqrt(std::max(0.0, -u))); }, true,
          "u'=-(1+sqrt(-u))"};
}

/// u' = u - 1, the log of f' = -f(1 + |log f|) while f <= 1.
inline ScalarField separation_log() {
  return {[](double, double u) { return u - 1.0; }, true, "u'=u-1"};
}

/// y' = y sqrt(1 + log y).
inline ScalarField growth_sqrt() {
  return {[](double, double y) {
            const double ay = std::abs(y);
            return ay > 0.0 ? y * std::sqrt(std::max(0.0, 1.0 + std::log(ay))) : 0.0;
          },
          true, "y'=y*sqrt(1+log y)"};
}

/// u' = sqrt(1 + u), the log of y' = y sqrt(1 + log y).
inline ScalarField growth_sqrt_log() {
  return {[](double, double u) { return std::sqrt(std::max(0.0, 1.0 + u)); }, true,
          "u'=sqrt(1+u)"};
}

/// u' = u, the log of y' = y log y.
inline ScalarField growth_log() {
  return {[](double, double u) { return u; }, true, "u'=u"};
}

}  // namespace extremal

/// A single named check inside a verification run.
struct Check {
  std::string name;
  double worst = 0.0;  ///< worst observed error or slack for this check
  double tolerance = 0.0;
  double witness_x = 0.0;
  bool passed = true;
};

struct BoundReport {
  BoundKind kind;
  double x_lo = 0.0;
  double x_hi = 0.0;
  /// Smallest slack of the envelope inequality over the grid, in log space
  /// (relative for the growth kinds); >= 0 means satisfied.
  double worst_margin = std::numeric_limits<double>::infinity();
  double witness_x = 0.0;
  double tolerance = 0.0;
  /// worst_margin >= -tolerance and every auxiliary check passed.
  bool passed = false;
  std::string cause;
  std::vector<Check> checks;
  std::vector<CrossingRecord> crossings;
};

/// 0 followed by `count - 1` points log-uniform over [hi * 1e-3, hi].
inline std::vector<double> verification_grid(double hi, int count = 50) {
  std::vector<double> g{0.0};
  const double a = std::log(hi * 1e-3), b = std::log(hi);
  for (int i = 0; i < count - 1; ++i) g.push_back(std::exp(a + (b - a) * i / (count - 2)));
  g.back() = hi;
  return g;
}

namespace detail {

struct MarginTracker {
  double worst = std::numeric_limits<double>::infinity();
  double at = 0.0;
  void observe(double slack, double x) {
    if (slack < worst) {
      worst = slack;
      at = x;
    }
  }
};

inline bool trajectory_ok(const Trajectory& tr, BoundReport& rep) {
  if (tr.termination == Termination::StepFailure) {
    rep.passed = false;
    rep.cause = "integration failed: " + tr.failure_reason;
    return false;
  }
  if (tr.termination != Termination::SpanEnd) {
    rep.passed = false;
    rep.cause = std::string("integration stopped early (") + to_string(tr.termination) + ")";
    return false;
  }
  return true;
}

inline Check crossing_agreement(const Trajectory& tr, const BoundKind& kind, int n_hi,
                                std::vector<CrossingRecord>& sink) {
  sink = detect_level_crossings(tr, 1, n_hi, LevelGrid::Decay);
  Check c{"crossings match closed-form oracle", 0.0, 1e-8, 0.0, true};
  if (static_cast<int>(sink.size()) != n_hi) {
    c.passed = false;
    c.worst = std::numeric_limits<double>::infinity();
  }
  for (const auto& r : sink) {
    const double oracle = crossing_oracle(kind, r.n);
    const double err = std::abs(r.x_first - oracle) / std::max(1.0, oracle);
    if (err > c.worst) {
      c.worst = err;
      c.witness_x = r.x_first;
    }
  }
  c.passed = c.passed && c.worst <= c.tolerance;
  return c;
}

}  // namespace detail

/// Runs the extremal experiment for `kind` and checks its envelope pointwise.
///
///   LipschitzEnvelope(L): y' = -L y, y(0) = 1 on [0, 5]; e^{-Lx} <= |y| <= e^{Lx}.
///   SeparationSqrt: u' = -(1 + sqrt(-u)), u(0) = 0 on [0, 40]; u >= -x^2 on (35, 40].
///   SeparationLog:  u' = u - 1, u(0) = 0 on [0, 6]; u >= -e^{2x} - 4.
///   GrowthSqrt: y' = y sqrt(1 + log y), y(0) = 1 on [0, 5] (log space past x = 3).
///   GrowthLog:  u' = u, u(0) = 1 on [0, 3]; y = e^u <= e^{e^x}.
/// Tolerances for the verification experiments, whose checks are near 1e-10 relative.
inline IntegratorConfig verification_config() {
  IntegratorConfig cfg;
  cfg.rel_tol = 1e-12;
  cfg.abs_tol = 1e-16;
  return cfg;
}

inline BoundReport verify_proposition(const BoundKind& kind,
                                      const IntegratorConfig& user_cfg = verification_config()) {
  // The extremal runs go far below u = -300; only the explicit spans limit them.
  IntegratorConfig cfg = user_cfg;
  cfg.n_max = std::max(cfg.n_max, 1'000'000);
  BoundReport rep;
  rep.kind = kind;
  detail::MarginTracker env;
  switch (kind.type) {
    case BoundKind::Type::LipschitzEnvelope: {
      const double L = kind.L;
      rep.x_hi = 5.0;
      rep.tolerance = 1e-9;
      const Trajectory tr = integrate(demo::linear_field(L), 1.0, {0.0, rep.x_hi}, cfg);
      if (!detail::trajectory_ok(tr, rep)) return rep;
      Check sat{"saturates lower envelope (relative)", 0.0, 1e-9, 0.0, true};
      for (double x : verification_grid(rep.x_hi)) {
        const double ly = std::log(std::abs(tr.value_at(x)));
        env.observe(std::min(ly + L * x, L * x - ly), x);
        const double rel = std::abs(std::expm1(ly + L * x));
        if (rel > sat.worst) {
          sat.worst = rel;
          sat.witness_x = x;
        }
      }
      sat.passed = sat.worst < sat.tolerance;
      rep.checks.push_back(sat);
      break;
    }
    case BoundKind::Type::SeparationSqrt: {
      rep.x_lo = 35.0;
      rep.x_hi = 40.0;
      rep.tolerance = 0.0;
      const Trajectory tr = integrate_logspace(extremal::separation_sqrt(), 0.0, {0.0, rep.x_hi}, cfg);
      if (!detail::trajectory_ok(tr, rep)) return rep;
      for (int i = 1; i <= 50; ++i) {
        const double x = 35.0 + 5.0 * i / 50.0;
        env.observe(tr.value_at(x) - separation_lower(kind, x).log_value, x);
      }
      rep.checks.push_back(detail::crossing_agreement(tr, kind, 200, rep.crossings));
      Check floor{"crossings exceed telescoped floor", std::numeric_limits<double>::infinity(), 0.0, 0.0, true};
      for (const auto& r : rep.crossings) {
        const double slack = r.x_first - crossing_lower_bound(kind, r.n).value;
        if (slack < floor.worst) {
          floor.worst = slack;
          floor.witness_x = r.x_first;
        }
      }
      floor.passed = floor.worst >= 0.0;
      rep.checks.push_back(floor);
      break;
    }
    case BoundKind::Type::SeparationLog: {
      rep.x_hi = 6.0;
      rep.tolerance = 0.0;
      const Trajectory tr = integrate_logspace(extremal::separation_log(), 0.0, {0.0, rep.x_hi}, cfg);
      if (!detail::trajectory_ok(tr, rep)) return rep;
      Check exact{"u matches 1 - e^x (relative)", 0.0, 1e-10, 0.0, true};
      for (double x : verification_grid(rep.x_hi)) {
        const double u = tr.value_at(x);
        env.observe(u - separation_lower(kind, x).log_value, x);
        const double truth = -std::expm1(x);
        const double rel = truth == 0.0 ? std::abs(u) : std::abs(u - truth) / std::abs(truth);
        if (rel > exact.worst) {
          exact.worst = rel;
          exact.witness_x = x;
        }
      }
      exact.passed = exact.worst < exact.tolerance;
      rep.checks.push_back(exact);
      const int n_hi = static_cast<int>(std::floor(std::expm1(rep.x_hi)));
      rep.checks.push_back(detail::crossing_agreement(tr, kind, n_hi, rep.crossings));
      Check x4{"x_4 >= (1 - 1/e)(1 + 1/2 + 1/3)", 0.0, 0.0, 0.0, false};
      for (const auto& r : rep.crossings) {
        if (r.n == 4) {
          const double floor4 = (1.0 - 1.0 / std::numbers::e) * (1.0 + 1.0 / 2 + 1.0 / 3);
          x4.worst = r.x_first - floor4;
          x4.witness_x = r.x_first;
          x4.passed = x4.worst > 0.0;
        }
      }
      rep.checks.push_back(x4);
      break;
    }
    case BoundKind::Type::GrowthSqrt: {
      rep.x_hi = 5.0;
      rep.tolerance = 1e-8;
      constexpr double x_switch = 3.0;
      const Trajectory lin = integrate(extremal::growth_sqrt(), 1.0, {0.0, x_switch}, cfg);
      if (!detail::trajectory_ok(lin, rep)) return rep;
      const Trajectory log_leg = integrate_logspace(extremal::growth_sqrt_log(), std::log(lin.y_end()),
                                                    {x_switch, rep.x_hi}, cfg);
      if (!detail::trajectory_ok(log_leg, rep)) return rep;
      Check exact{"y matches e^(x^2/4+x) (relative)", 0.0, 1e-8, 0.0, true};
      for (double x : verification_grid(rep.x_hi)) {
        const double log_y = x <= x_switch ? std::log(lin.value_at(x)) : log_leg.value_at(x);
        const double log_env = growth_upper(kind, x).log_value;
        // relative slack (env - y)/env = 1 - e^{log y - log env}
        const double slack = -std::expm1(log_y - log_env);
        env.observe(slack, x);
        if (std::abs(slack) > exact.worst) {
          exact.worst = std::abs(slack);
          exact.witness_x = x;
        }
      }
      exact.passed = exact.worst < exact.tolerance;
      rep.checks.push_back(exact);
      break;
    }
    case BoundKind::Type::GrowthLog: {
      rep.x_hi = 3.0;
      rep.tolerance = 1e-10;
      const Trajectory tr = integrate_logspace(extremal::growth_log(), 1.0, {0.0, rep.x_hi}, cfg);
      if (!detail::trajectory_ok(tr, rep)) return rep;
      Check exact{"u matches e^x (relative)", 0.0, 1e-10, 0.0, true};
      for (double x : verification_grid(rep.x_hi)) {
        const double u = tr.value_at(x);
        const double log_env = growth_upper(kind, x).log_value;  // e^x
        const double slack = (log_env - u) / log_env;
        env.observe(slack, x);
        if (std::abs(slack) > exact.worst) {
          exact.worst = std::abs(slack);
          exact.witness_x = x;
        }
      }
      exact.passed = exact.worst < exact.tolerance;
      rep.checks.push_back(exact);
      break;
    }
  }
  rep.worst_margin = env.worst;
  rep.witness_x = env.at;
  rep.passed = rep.worst_margin >= -rep.tolerance &&
               std::all_of(rep.checks.begin(), rep.checks.end(), [](const Check& c) { return c.passed; });
  if (!rep.passed && rep.cause.empty()) {
    rep.cause = rep.worst_margin < -rep.tolerance ? "envelope violated" : "auxiliary check failed";
  }
  return rep;
}

}  // namespace osgood
