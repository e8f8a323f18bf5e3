#pragma once

#include <cmath>
#include <limits>

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace osgood {

/// Result of integrating a nonnegative, eventually decreasing integrand over [a, inf).
struct TailIntegral {
  double computed = 0.0;   ///< integral over [a, reached]
  double remainder = 0.0;  ///< geometric estimate of the integral beyond `reached`, or +inf
  double reached = 0.0;
  double last_ratio = 0.0; ///< ratio of the last two panel contributions
  bool converged = true;   ///< every panel met its quadrature tolerance
};

namespace detail {

inline constexpr double kTailCutoff = 1e15;
inline constexpr double kDecayingRatio = 0.75;

}  // namespace detail

/// Integrates f over [a, inf) on panels of doubling width up to `cutoff`.
///
/// The remainder past the last panel is extrapolated geometrically from the
/// ratio r of the last two panel contributions, c*r/(1-r). When r exceeds
/// `max_ratio` the remainder is reported as +inf; callers that know the
/// integral converges can pass a max_ratio just below 1.
template <class F>
TailIntegral integrate_tail(F&& f, double a, double max_ratio = detail::kDecayingRatio,
                            double cutoff = detail::kTailCutoff) {
  using boost::math::quadrature::gauss_kronrod;
  TailIntegral out;
  double lo = a;
  double width = std::max(1.0, 1e-3 * std::abs(a));
  double total = 0.0;
  double prev = -1.0;
  double last = 0.0;
  int panels = 0;
  while (true) {
    const double hi = lo + width;
    double err = 0.0;
    const double c = gauss_kronrod<double, 31>::integrate(f, lo, hi, 12, 1e-13, &err);
    if (!std::isfinite(c) || err > 1e-9 * std::abs(c) + 1e-300) out.converged = false;
    total += c;
    ++panels;
    if (prev > 0.0) out.last_ratio = c / prev;
    last = c;
    prev = c;
    lo = hi;
    width *= 2.0;
    if (c == 0.0 && panels > 1) {
      out.last_ratio = 0.0;
      break;
    }
    if (panels >= 4 && out.last_ratio <= max_ratio && c <= 1e-17 * total) break;
    if (lo >= cutoff) break;
  }
  out.computed = total;
  out.reached = lo;
  const double r = out.last_ratio;
  if (last == 0.0) {
    out.remainder = 0.0;
  } else if (r <= max_ratio && r < 1.0) {
    out.remainder = last * r / (1.0 - r);
  } else {
    out.remainder = std::numeric_limits<double>::infinity();
  }
  return out;
}

}  // namespace osgood
