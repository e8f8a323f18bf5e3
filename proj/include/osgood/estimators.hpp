#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "osgood/crossings.hpp"
#include "osgood/modulus.hpp"

namespace osgood {

/// One observed crossing gap checked against the construction's bounds.
struct GapRecord {
  int n = 0;
  double x_n = 0.0;
  double x_next = 0.0;
  double gap = 0.0;  ///< x_{n+1} - x_n^+ (equals x_{n+1} - x_n on monotone runs)
  double upper_bound = std::numeric_limits<double>::infinity();  ///< as stated in the construction
  double lower_bound = 0.0;
  /// Upper bound that holds for the interpolated field; differs from upper_bound
  /// only where F is not monotone on the segment.
  double provable_upper = std::numeric_limits<double>::infinity();
  bool ok = true;        ///< within provable_upper and lower_bound
  bool stated_ok = true; ///< within upper_bound and lower_bound
};

/// Finite-time escape (to infinity or to zero) with its analytic completion.
struct BlowupReport {
  enum class Mode { BlowUp, Collapse };
  Mode mode = Mode::BlowUp;
  Verdict series = Verdict::Unknown;
  double x_reach = 0.0;  ///< time the numeric run reached its threshold
  double tail_bound = std::numeric_limits<double>::infinity();
  double bracket_lo = 0.0;
  double bracket_hi = std::numeric_limits<double>::infinity();
  bool finite = false;  ///< a finite escape time is bracketed
  bool gaps_ok = true;         ///< every gap within its provable bounds
  bool stated_gaps_ok = true;  ///< every gap within the bounds as stated
  bool budget_exceeded = false;
  Termination termination = Termination::SpanEnd;
  std::string cause;
  std::vector<GapRecord> gaps;
  std::vector<CrossingRecord> crossings;
  std::vector<Trajectory> legs;  ///< numeric pieces in run order
};

struct EscapeOptions {
  double horizon = 1e6;             ///< give up (budget) if no escape by this x
  std::int64_t tail_terms = 4096;   ///< terms summed explicitly before the integral tail
  double gap_slack = 1e-9;
};

namespace detail {

/// sum_{n >= N} 1/phi(n): explicit terms, then the integral-test upper tail.
inline double series_tail_from(const Modulus& m, Verdict verdict, std::int64_t N,
                               std::int64_t terms) {
  if (verdict != Verdict::Converges) return std::numeric_limits<double>::infinity();
  const std::int64_t first = std::max<std::int64_t>(N, 0);
  const std::int64_t last = first + terms - 1;
  double head = range_sum(m, first, last);
  const TailBounds tb = detail::tail_bounds_assuming(m, std::max<std::int64_t>(last, 1),
                                                     SeriesTag::KnownConvergent);
  return head + tb.upper;
}

inline Verdict verdict_of(const Modulus& m) {
  switch (m.tag()) {
    case SeriesTag::KnownConvergent: return Verdict::Converges;
    case SeriesTag::KnownDivergent: return Verdict::Diverges;
    case SeriesTag::Untagged: break;
  }
  ClassifyOptions opt;
  opt.budget = std::int64_t{1} << 16;
  return classify_series(m, opt).verdict;
}

}  // namespace detail

/// Integrates y' = F(y) for a blow-up field until y reaches cfg.y_max and
/// completes the escape time with the tail sum_{n >= N} 2/phi(n), N = floor(log y_max).
///
/// Below y = 1 the run is linear; from y = 1 on it is in u = log y with steps
/// cut at every integer u. Each observed gap x_{n+1} - x_n is checked against 2/phi(n).
inline BlowupReport estimate_blowup(const PiecewiseLogLinearField& f, double y0,
                                    const IntegratorConfig& cfg = {},
                                    const EscapeOptions& opt = {}) {
  if (f.kind() != PiecewiseKind::BlowUp) throw std::invalid_argument("estimate_blowup needs a blow-up field");
  cfg.validate();
  const Modulus& m = f.modulus();
  BlowupReport rep;
  rep.mode = BlowupReport::Mode::BlowUp;
  rep.series = detail::verdict_of(m);

  double x_log_start = 0.0;
  double u0 = 0.0;
  if (y0 < 1.0) {
    detail::Thresholds th;
    th.upper = 1.0;
    // The sub-unit formula is used even past y = 1 so no stage sees the kink there.
    const double slope0 = m(0.0) - 1.0;
    auto below_one = [slope0](double, double y) { return 1.0 + y * slope0; };
    Trajectory leg = detail::run(below_one, 0.0, opt.horizon, y0, cfg, th, Coordinates::Linear, 1);
    leg.label = f.as_scalar_field().label;
    rep.termination = leg.termination;
    const bool reached = leg.termination == Termination::BlowUp;
    x_log_start = leg.x_end();
    rep.legs.push_back(std::move(leg));
    if (!reached) {
      rep.budget_exceeded = true;
      rep.cause = "linear leg did not reach y = 1";
      return rep;
    }
  } else {
    u0 = std::log(y0);
  }

  Trajectory tr = integrate_logspace(f, u0, {x_log_start, x_log_start + opt.horizon}, cfg);
  rep.termination = tr.termination;
  rep.x_reach = tr.x_end();
  if (tr.termination != Termination::BlowUp) {
    rep.budget_exceeded = true;
    rep.cause = std::string("log-space leg ended with ") + to_string(tr.termination) +
                (tr.failure_reason.empty() ? "" : " (" + tr.failure_reason + ")");
  }

  const double u_max = std::log(cfg.y_max);
  const int n_lo = static_cast<int>(std::ceil(u0));
  const int n_hi = static_cast<int>(std::floor(u_max));
  rep.crossings = detect_level_crossings(tr, n_lo, n_hi, LevelGrid::Growth);
  for (std::size_t i = 0; i + 1 < rep.crossings.size(); ++i) {
    const auto& a = rep.crossings[i];
    const auto& b = rep.crossings[i + 1];
    if (b.n != a.n + 1) continue;
    GapRecord g;
    g.n = a.n;
    g.x_n = a.x_first;
    g.x_next = b.x_first;
    g.gap = b.x_first - a.x_first;
    g.upper_bound = 2.0 / m(static_cast<double>(a.n));
    g.provable_upper = g.upper_bound;
    g.ok = g.stated_ok = g.gap <= g.upper_bound + opt.gap_slack;
    rep.gaps_ok = rep.gaps_ok && g.ok;
    rep.stated_gaps_ok = rep.gaps_ok;
    rep.gaps.push_back(g);
  }
  rep.legs.push_back(std::move(tr));

  if (!rep.budget_exceeded) {
    const auto N = static_cast<std::int64_t>(std::floor(u_max));
    rep.tail_bound = 2.0 * detail::series_tail_from(m, rep.series, N, opt.tail_terms);
    rep.bracket_lo = rep.x_reach;
    rep.bracket_hi = rep.x_reach + rep.tail_bound;
    rep.finite = std::isfinite(rep.bracket_hi);
    if (!rep.finite) rep.cause = "series not known to converge: no finite escape bracket";
  }
  return rep;
}

/// Direct (linear-coordinate) blow-up run for an arbitrary field, e.g. y' = 1 + y^2.
///
/// For autonomous fields the remaining time past y_max is the integral of
/// dy/F(y) over [y_max, inf), evaluated by quadrature.
inline BlowupReport estimate_blowup_direct(const ScalarField& f, double y0,
                                           const IntegratorConfig& cfg = {},
                                           const EscapeOptions& opt = {}) {
  BlowupReport rep;
  rep.mode = BlowupReport::Mode::BlowUp;
  Trajectory tr = integrate(f, y0, {0.0, opt.horizon}, cfg);
  rep.termination = tr.termination;
  rep.x_reach = tr.x_end();
  if (tr.termination != Termination::BlowUp) {
    rep.budget_exceeded = true;
    rep.cause = std::string("run ended with ") + to_string(tr.termination);
  } else if (f.autonomous && tr.y_end() > 0.0) {
    auto inv = [&f](double y) { return 1.0 / f(0.0, y); };
    const TailIntegral t = integrate_tail(inv, cfg.y_max);
    rep.tail_bound = t.computed + t.remainder;
    rep.series = std::isfinite(rep.tail_bound) ? Verdict::Converges : Verdict::Unknown;
  }
  rep.bracket_lo = rep.x_reach;
  rep.bracket_hi = rep.x_reach + rep.tail_bound;
  rep.finite = !rep.budget_exceeded && std::isfinite(rep.bracket_hi);
  rep.crossings = detect_level_crossings(tr, 0, static_cast<int>(std::floor(std::log(cfg.y_max))),
                                         LevelGrid::Growth);
  rep.legs.push_back(std::move(tr));
  return rep;
}

/// Integrates the decay y' = -F(y) of a non-uniqueness field from y0 in (0, 1]
/// down to y = e^-n_max and brackets the zero-hitting time with
/// sum_{n >= n_max} (e - 1)/phi(n).
///
/// Every gap is checked against both construction bounds: x_{n+1} - x_n <= (e-1)/phi(n)
/// and x_{n+1} - x_n^+ >= 1/(2 phi(n+1)). For a divergent series no finite
/// bracket exists and the report certifies persistence through the lower bounds.
inline BlowupReport hitting_time_zero(const PiecewiseLogLinearField& f, double y0,
                                      const IntegratorConfig& cfg = {},
                                      const EscapeOptions& opt = {}) {
  if (f.kind() != PiecewiseKind::NonUniqueness) {
    throw std::invalid_argument("hitting_time_zero needs a non-uniqueness field");
  }
  if (!(y0 > 0.0 && y0 <= 1.0)) throw std::invalid_argument("hitting_time_zero needs y0 in (0, 1]");
  cfg.validate();
  const Modulus& m = f.modulus();
  BlowupReport rep;
  rep.mode = BlowupReport::Mode::Collapse;
  rep.series = detail::verdict_of(m);

  const double u0 = std::log(y0);
  Trajectory tr = integrate_logspace(f, u0, {0.0, opt.horizon}, cfg, Drift::Down);
  rep.termination = tr.termination;
  rep.x_reach = tr.x_end();
  if (tr.termination != Termination::HitZero) {
    rep.budget_exceeded = true;
    rep.cause = std::string("decay ended with ") + to_string(tr.termination) +
                (tr.failure_reason.empty() ? "" : " (" + tr.failure_reason + ")");
  }

  const int n_lo = static_cast<int>(std::ceil(-u0 - 1e-12));
  rep.crossings = detect_level_crossings(tr, std::max(n_lo, 0), cfg.n_max, LevelGrid::Decay);
  constexpr double kEm1 = std::numbers::e - 1.0;
  for (std::size_t i = 0; i + 1 < rep.crossings.size(); ++i) {
    const auto& a = rep.crossings[i];
    const auto& b = rep.crossings[i + 1];
    if (b.n != a.n + 1) continue;
    GapRecord g;
    g.n = a.n;
    g.x_n = a.x_first;
    g.x_next = b.x_first;
    g.gap = b.x_first - a.x_last_before_next;
    const double phi_n = m(static_cast<double>(a.n));
    g.upper_bound = kEm1 / phi_n;
    // The slowest point of the segment is whichever end has the smaller F:
    // F(e^-n-1) = e^-n-1 phi(n) or F(e^-n) = e^-n phi(n-1).
    const double phi_prev = a.n >= 1 ? m(static_cast<double>(a.n - 1)) : phi_n;
    g.provable_upper = kEm1 / std::min(phi_n, std::numbers::e * phi_prev);
    g.lower_bound = 1.0 / (2.0 * m(static_cast<double>(a.n + 1)));
    const double full_gap = b.x_first - a.x_first;
    const bool lower_ok = g.gap >= g.lower_bound - opt.gap_slack;
    g.ok = full_gap <= g.provable_upper + opt.gap_slack && lower_ok;
    g.stated_ok = full_gap <= g.upper_bound + opt.gap_slack && lower_ok;
    rep.gaps_ok = rep.gaps_ok && g.ok;
    rep.stated_gaps_ok = rep.stated_gaps_ok && g.stated_ok;
    rep.gaps.push_back(g);
  }
  rep.legs.push_back(std::move(tr));

  if (!rep.budget_exceeded) {
    rep.tail_bound = kEm1 * detail::series_tail_from(m, rep.series, cfg.n_max, opt.tail_terms);
    rep.bracket_lo = rep.x_reach;
    rep.bracket_hi = rep.x_reach + rep.tail_bound;
    rep.finite = std::isfinite(rep.bracket_hi);
    if (!rep.finite) rep.cause = "series not known to converge: persistence certified by gap lower bounds";
  }
  return rep;
}

}  // namespace osgood
