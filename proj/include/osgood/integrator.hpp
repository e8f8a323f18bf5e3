#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "osgood/field.hpp"

namespace osgood {

struct IntegratorConfig {
  double rel_tol = 1e-10;
  double abs_tol = 1e-12;
  double h_init = 0.0;  ///< 0 selects an initial step automatically
  double h_min = 1e-18;
  double h_max = std::numeric_limits<double>::infinity();
  double y_max = 1e15;  ///< blow-up threshold on |y|
  int n_max = 300;      ///< log-space runs stop at u = -n_max (numerical zero)
  bool logspace = false;
  bool stop_at_zero = false;  ///< linear runs: stop when y first reaches 0 from either side
  std::size_t max_steps = 1'000'000;

  void validate() const {
    if (!(rel_tol > 0.0) || !(abs_tol > 0.0)) throw std::invalid_argument("tolerances must be > 0");
    if (!(h_min > 0.0) || !(h_min <= h_max)) throw std::invalid_argument("need 0 < h_min <= h_max");
    if (h_init < 0.0) throw std::invalid_argument("h_init must be >= 0");
    if (!(y_max > 1.0)) throw std::invalid_argument("y_max must exceed 1");
    if (n_max < 1) throw std::invalid_argument("n_max must be >= 1");
    if (max_steps == 0) throw std::invalid_argument("max_steps must be positive");
  }
};

struct Interval {
  double a = 0.0;
  double b = 0.0;
};

enum class Termination { SpanEnd, BlowUp, HitZero, StepFailure };

inline const char* to_string(Termination t) {
  switch (t) {
    case Termination::SpanEnd: return "SpanEnd";
    case Termination::BlowUp: return "BlowUp";
    case Termination::HitZero: return "HitZero";
    case Termination::StepFailure: return "StepFailure";
  }
  return "?";
}

enum class Coordinates { Linear, Log };

struct Node {
  double x = 0.0;
  double y = 0.0;
  double slope = 0.0;
};

/// Continuous extension of one accepted Dormand-Prince step, valid on [x0, x_end].
///
/// x_end may lie short of x0 + h when the step was cut back to a breakpoint
/// or an event; the polynomial itself is always parametrized by the full h.
struct DenseSegment {
  double x0 = 0.0;
  double h = 0.0;
  double x_end = 0.0;
  std::array<double, 5> c{};

  double operator()(double x) const {
    const double th = (x - x0) / h;
    const double th1 = 1.0 - th;
    return c[0] + th * (c[1] + th1 * (c[2] + th * (c[3] + th1 * c[4])));
  }
};

/// Numerical solution with dense output.
///
/// Integration always runs forward in an internal time s; a backward span is
/// integrated as the reversed field with x = -s. Nodes and segments are stored
/// in s, accessors take and return x.
class Trajectory {
 public:
  Coordinates coords = Coordinates::Linear;
  int time_sign = 1;
  std::vector<Node> nodes;  ///< x and slope in internal time
  std::vector<DenseSegment> segments;
  Termination termination = Termination::SpanEnd;
  std::string failure_reason;
  std::size_t steps_accepted = 0;
  std::size_t steps_rejected = 0;
  std::string label;

  double x_start() const { return time_sign * nodes.front().x; }
  double x_end() const { return time_sign * nodes.back().x; }
  double y_end() const { return nodes.back().y; }

  /// Node i with x and slope mapped back to the caller's time direction.
  Node node(std::size_t i) const {
    const Node& n = nodes.at(i);
    return {time_sign * n.x, n.y, time_sign * n.slope};
  }
  std::size_t size() const { return nodes.size(); }

  /// Dense output at x; throws std::out_of_range outside the integrated span.
  double value_at(double x) const {
    const double s = time_sign * x;
    const double lo = nodes.front().x, hi = nodes.back().x;
    if (!(s >= lo && s <= hi)) throw std::out_of_range("trajectory queried outside its span");
    if (segments.empty()) return nodes.front().y;
    auto it = std::lower_bound(segments.begin(), segments.end(), s,
                               [](const DenseSegment& seg, double v) { return seg.x_end < v; });
    if (it == segments.end()) --it;
    if (s == it->x_end) return nodes[static_cast<std::size_t>(it - segments.begin()) + 1].y;
    if (s == it->x0) return nodes[static_cast<std::size_t>(it - segments.begin())].y;
    return (*it)(s);
  }

  /// Linear-coordinate value: e^u for log trajectories.
  double linear_value_at(double x) const {
    const double v = value_at(x);
    return coords == Coordinates::Log ? std::exp(v) : v;
  }
};

namespace detail {

// Dormand-Prince 5(4) tableau.
inline constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
inline constexpr double a21 = 1.0 / 5;
inline constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
inline constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
inline constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                        a54 = -212.0 / 729;
inline constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                        a64 = 49.0 / 176, a65 = -5103.0 / 18656;
inline constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192,
                        a75 = -2187.0 / 6784, a76 = 11.0 / 84;
inline constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                        e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
inline constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                        d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                        d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;

/// A right-hand side whose formula changes at known levels of y.
template <class S>
concept Segmented = requires(const S& s, double x, double y, long seg, int dir) {
  { s.segment_of(y, dir) } -> std::convertible_to<long>;
  { s.eval_segment(x, y, seg) } -> std::convertible_to<double>;
  { s.segment_bounds(seg) } -> std::convertible_to<std::pair<double, double>>;
  { s.direction() } -> std::convertible_to<int>;
};

struct Thresholds {
  double lower = -std::numeric_limits<double>::infinity();  ///< reaching it => HitZero
  double upper = std::numeric_limits<double>::infinity();   ///< reaching it => BlowUp
  bool abs_upper = false;  ///< compare |y| against upper (linear blow-up in either sign)
  bool zero_crossing = false;
};

inline double event_tolerance(double x) { return 1e-12 * std::max(1.0, std::abs(x)); }

/// Bisection for g(x) = 0 on [a, b] with g(a), g(b) of opposite sign or
/// g(b) == 0, to full precision or to event_tolerance. Returns the right end
/// of the final bracket so the located point has already reached the level.
template <class G>
double bisect(G&& g, double a, double b, bool to_event_tolerance = false) {
  double ga = g(a);
  if (ga == 0.0) return a;
  for (int it = 0; it < 2100; ++it) {
    if (to_event_tolerance && (b - a) <= event_tolerance(b)) break;
    const double m = 0.5 * (a + b);
    if (m <= a || m >= b) break;
    const double gm = g(m);
    if (gm == 0.0) return m;
    if ((gm < 0.0) == (ga < 0.0)) {
      a = m;
      ga = gm;
    } else {
      b = m;
    }
  }
  return b;
}

struct StepResult {
  double y_new = 0.0;
  double f_new = 0.0;
  double err = 0.0;
  DenseSegment dense;
};

template <class Rhs>
StepResult dopri_step(const Rhs& f, double x, double y, double k1, double h,
                      const IntegratorConfig& cfg) {
  const double k2 = f(x + c2 * h, y + h * (a21 * k1));
  const double k3 = f(x + c3 * h, y + h * (a31 * k1 + a32 * k2));
  const double k4 = f(x + c4 * h, y + h * (a41 * k1 + a42 * k2 + a43 * k3));
  const double k5 = f(x + c5 * h, y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
  const double k6 = f(x + h, y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
  const double y_new = y + h * (a71 * k1 + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
  const double k7 = f(x + h, y_new);
  StepResult r;
  r.y_new = y_new;
  r.f_new = k7;
  const double err_abs = std::abs(h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7));
  const double scale = cfg.abs_tol + cfg.rel_tol * std::max(std::abs(y), std::abs(y_new));
  r.err = err_abs / scale;
  if (!std::isfinite(r.err) || !std::isfinite(y_new) || !std::isfinite(k7)) {
    r.err = std::numeric_limits<double>::infinity();
  }
  const double ydiff = y_new - y;
  const double bspl = h * k1 - ydiff;
  r.dense.x0 = x;
  r.dense.h = h;
  r.dense.x_end = x + h;
  r.dense.c = {y, ydiff, bspl, ydiff - h * k7 - bspl,
               h * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6 + d7 * k7)};
  return r;
}

template <class Rhs>
double initial_step(const Rhs& f, double x, double y, double f0, double span,
                    const IntegratorConfig& cfg) {
  if (cfg.h_init > 0.0) return std::min(cfg.h_init, span);
  const double sk = cfg.abs_tol + cfg.rel_tol * std::abs(y);
  const double dnf = (f0 / sk) * (f0 / sk);
  const double dny = (y / sk) * (y / sk);
  double h = (dnf <= 1e-10 || dny <= 1e-10) ? 1e-6 : std::sqrt(dny / dnf) * 0.01;
  h = std::min(h, span);
  const double f1 = f(x + h, y + h * f0);
  const double der2 = std::abs((f1 - f0) / sk) / h;
  const double der12 = std::max(std::abs(der2), std::sqrt(dnf));
  const double h1 = der12 <= 1e-15 ? std::max(1e-6, h * 1e-3) : std::pow(0.01 / der12, 0.2);
  h = std::min({100.0 * h, h1, span, cfg.h_max});
  return std::isfinite(h) && h > 0.0 ? h : std::min(1e-6, span);
}

/// Core adaptive loop in internal time s over [s0, s1], s1 > s0.
template <class System>
Trajectory run(const System& sys, double s0, double s1, double y0, const IntegratorConfig& cfg,
               const Thresholds& th, Coordinates coords, int time_sign) {
  cfg.validate();
  if (!(s1 > s0)) throw std::invalid_argument("integration span is empty");
  if (!std::isfinite(y0)) throw std::invalid_argument("initial value must be finite");

  constexpr bool segmented = Segmented<System>;
  auto segment_at = [&](double y) -> long {
    if constexpr (segmented) return sys.segment_of(y, sys.direction());
    else return 0;
  };
  auto rhs_in = [&](long seg) {
    return [&sys, seg](double x, double y) -> double {
      if constexpr (segmented) return sys.eval_segment(x, y, seg);
      else { (void)seg; return sys(x, y); }
    };
  };

  Trajectory tr;
  tr.coords = coords;
  tr.time_sign = time_sign;
  double x = s0, y = y0;
  long seg = segment_at(y);
  double fx = rhs_in(seg)(x, y);
  tr.nodes.push_back({x, y, fx});

  auto reached_upper = [&](double v) { return th.abs_upper ? std::abs(v) >= th.upper : v >= th.upper; };
  if (reached_upper(y)) {
    tr.termination = Termination::BlowUp;
    return tr;
  }
  if (y <= th.lower) {
    tr.termination = Termination::HitZero;
    return tr;
  }

  double h = initial_step(rhs_in(seg), x, y, fx, s1 - s0, cfg);
  double fac_max = 5.0;
  std::size_t attempts = 0;

  while (x < s1) {
    if (++attempts > cfg.max_steps) {
      tr.termination = Termination::StepFailure;
      tr.failure_reason = "max_steps exhausted";
      return tr;
    }
    h = std::min(h, cfg.h_max);
    bool last = false;
    if (x + h >= s1) {
      h = s1 - x;
      last = true;
    }
    if (h < cfg.h_min || x + h == x) {
      tr.termination = Termination::StepFailure;
      tr.failure_reason = "step size underflow at x=" + std::to_string(time_sign * x);
      return tr;
    }
    const auto rhs = rhs_in(seg);
    StepResult st = dopri_step(rhs, x, y, fx, h, cfg);
    if (!(st.err <= 1.0)) {
      ++tr.steps_rejected;
      const double fac = std::isfinite(st.err) ? std::max(0.2, 0.9 * std::pow(st.err, -0.2)) : 0.1;
      h *= fac;
      fac_max = 1.0;
      continue;
    }
    ++tr.steps_accepted;
    double x_new = last ? s1 : x + h;
    double y_new = st.y_new;
    double f_new = st.f_new;
    bool on_breakpoint = false;

    // Cut the step back to the end of the frozen segment.
    if constexpr (segmented) {
      const auto [lo, hi] = sys.segment_bounds(seg);
      const int dir = sys.direction();
      const double edge = dir > 0 ? hi : lo;
      if (std::isfinite(edge) && (dir > 0 ? y_new > edge : y_new < edge)) {
        const auto& d = st.dense;
        x_new = bisect([&](double s) { return d(s) - edge; }, x, x_new);
        y_new = edge;
        on_breakpoint = true;
      }
    }

    // Threshold events inside the (possibly shortened) step.
    Termination stop = Termination::SpanEnd;
    bool stopped = false;
    {
      const auto& d = st.dense;
      auto value = [&](double s) { return s == x_new ? y_new : d(s); };
      if (reached_upper(y_new)) {
        const double level = th.upper;
        auto g = th.abs_upper ? std::function<double(double)>([&](double s) { return std::abs(value(s)) - level; })
                              : std::function<double(double)>([&](double s) { return value(s) - level; });
        x_new = bisect(g, x, x_new);
        y_new = th.abs_upper ? std::copysign(level, value(x_new)) : level;
        stop = Termination::BlowUp;
        stopped = true;
      } else if (y_new <= th.lower) {
        x_new = bisect([&](double s) { return value(s) - th.lower; }, x, x_new);
        y_new = th.lower;
        stop = Termination::HitZero;
        stopped = true;
      } else if (th.zero_crossing && y != 0.0 && (y_new == 0.0 || (y_new < 0.0) != (y < 0.0))) {
        x_new = bisect([&](double s) { return value(s); }, x, x_new);
        y_new = 0.0;
        stop = Termination::HitZero;
        stopped = true;
      }
    }

    st.dense.x_end = x_new;
    if (on_breakpoint || stopped) {
      if constexpr (segmented) seg = sys.segment_of(y_new, sys.direction());
      f_new = rhs_in(seg)(x_new, y_new);
    }
    tr.segments.push_back(st.dense);
    tr.nodes.push_back({x_new, y_new, f_new});
    x = x_new;
    y = y_new;
    fx = f_new;
    if (stopped) {
      tr.termination = stop;
      return tr;
    }
    if constexpr (segmented) {
      const long next = sys.segment_of(y, sys.direction());
      if (next != seg) {
        seg = next;
        fx = rhs_in(seg)(x, y);
        tr.nodes.back().slope = fx;
      }
    }
    const double fac = st.err == 0.0 ? fac_max : std::min(fac_max, std::max(0.2, 0.9 * std::pow(st.err, -0.2)));
    h *= fac;
    fac_max = 5.0;
  }
  tr.termination = Termination::SpanEnd;
  return tr;
}

/// Runs a field over [a, b] in either direction by reversing time internally.
template <class Slope>
Trajectory run_span(Slope&& slope, Interval span, double y0, const IntegratorConfig& cfg,
                    const Thresholds& th, Coordinates coords) {
  if (span.b == span.a) throw std::invalid_argument("integration span is empty");
  if (span.b > span.a) {
    return run(slope, span.a, span.b, y0, cfg, th, coords, 1);
  }
  auto reversed = [&slope](double s, double y) { return -slope(-s, y); };
  return run(reversed, -span.a, -span.b, y0, cfg, th, coords, -1);
}

/// u' = sign * g(u) for a piecewise log-linear field, with segment freezing.
struct LogFlow {
  const PiecewiseLogLinearField* field;
  int sign;

  int direction() const { return sign; }
  long segment_of(double u, int dir) const { return field->segment_of(u, dir); }
  double eval_segment(double, double u, long seg) const {
    return sign * field->eval_log_segment(u, seg);
  }
  std::pair<double, double> segment_bounds(long seg) const { return field->segment_bounds(seg); }
};

}  // namespace detail

/// Integrates y' = F(x, y), y(a) = y0 over span [a, b] (b < a integrates backward).
///
/// Stops with BlowUp when |y| reaches cfg.y_max, and with HitZero at the first
/// zero of y when cfg.stop_at_zero is set.
inline Trajectory integrate(const ScalarField& f, double y0, Interval span,
                            const IntegratorConfig& cfg = {}) {
  detail::Thresholds th;
  th.upper = cfg.y_max;
  th.abs_upper = true;
  th.zero_crossing = cfg.stop_at_zero;
  Trajectory tr = detail::run_span(f.fn, span, y0, cfg, th, Coordinates::Linear);
  tr.label = f.label;
  return tr;
}

/// Integrates u' = s(x, u) where s is already the log-space slope F(x, e^u)/e^u.
///
/// Stops with BlowUp at u = log(y_max) and HitZero at u = -n_max.
inline Trajectory integrate_logspace(const ScalarField& log_slope, double u0, Interval span,
                                     const IntegratorConfig& cfg = {}) {
  detail::Thresholds th;
  th.upper = std::log(cfg.y_max);
  th.lower = -static_cast<double>(cfg.n_max);
  Trajectory tr = detail::run_span(log_slope.fn, span, u0, cfg, th, Coordinates::Log);
  tr.label = log_slope.label;
  return tr;
}

/// (x, u) -> F(x, e^u) / e^u.
inline ScalarField to_log_slope(const ScalarField& f) {
  auto inner = f.fn;
  return {[inner](double x, double u) { return inner(x, std::exp(u)) * std::exp(-u); },
          f.autonomous, "log(" + f.label + ")"};
}

/// Which way the log-space flow of a piecewise field runs.
enum class Drift { Natural, Up, Down };

/// Log-space integration of a piecewise field: u' = +g(u) for blow-up fields
/// (y' = F(y)) and u' = -g(u) for non-uniqueness fields (y' = -F(y)) unless a
/// drift is forced. Steps never straddle a breakpoint.
inline Trajectory integrate_logspace(const PiecewiseLogLinearField& f, double u0, Interval span,
                                     const IntegratorConfig& cfg = {}, Drift drift = Drift::Natural) {
  if (!std::isfinite(u0)) throw std::invalid_argument("u0 must be finite");
  int sign = f.kind() == PiecewiseKind::BlowUp ? 1 : -1;
  if (drift == Drift::Up) sign = 1;
  if (drift == Drift::Down) sign = -1;
  detail::Thresholds th;
  th.upper = std::log(cfg.y_max);
  th.lower = -static_cast<double>(cfg.n_max);
  if (!(span.b > span.a)) throw std::invalid_argument("piecewise log-space runs need a forward span");
  detail::LogFlow flow{&f, sign};
  Trajectory tr = detail::run(flow, span.a, span.b, u0, cfg, th, Coordinates::Log, 1);
  tr.label = std::string(sign > 0 ? "+" : "-") + "log(" + to_string(f.kind()) + ")";
  return tr;
}

/// G(x, t) = F(x, t + y1(x)) - F(x, y1(x)); G(x, 0) = 0 identically.
inline ScalarField shifted_field(const ScalarField& f, const Trajectory& y1) {
  if (y1.coords != Coordinates::Linear) {
    throw std::invalid_argument("shifted_field needs a linear-coordinate trajectory");
  }
  auto ref = std::make_shared<const Trajectory>(y1);
  auto inner = f.fn;
  return {[inner, ref](double x, double t) {
            const double base = ref->value_at(x);
            return inner(x, t + base) - inner(x, base);
          },
          false, "shifted(" + f.label + ")"};
}

}  // namespace osgood
