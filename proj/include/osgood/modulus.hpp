#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "osgood/quadrature.hpp"

namespace osgood {

/// Analytic knowledge about the series sum 1/phi(n), supplied when a modulus is built.
enum class SeriesTag { KnownDivergent, KnownConvergent, Untagged };

enum class Verdict { Diverges, Converges, Unknown };

inline const char* to_string(SeriesTag t) {
  switch (t) {
    case SeriesTag::KnownDivergent: return "KnownDivergent";
    case SeriesTag::KnownConvergent: return "KnownConvergent";
    case SeriesTag::Untagged: return "Untagged";
  }
  return "?";
}

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::Diverges: return "Diverges";
    case Verdict::Converges: return "Converges";
    case Verdict::Unknown: return "Unknown";
  }
  return "?";
}

/// A nondecreasing positive function phi on [0, inf).
///
/// Immutable after construction; copies share the underlying callable.
class Modulus {
 public:
  using Function = std::function<double(double)>;

  Modulus(Function fn, std::string family, SeriesTag tag = SeriesTag::Untagged)
      : fn_(std::make_shared<const Function>(std::move(fn))),
        family_(std::move(family)),
        tag_(tag) {}

  /// Checked evaluation; throws std::domain_error for t < 0 or a nonpositive value.
  double operator()(double t) const {
    if (!(t >= 0.0)) throw std::domain_error("modulus evaluated at negative or NaN t");
    const double v = (*fn_)(t);
    if (!(v > 0.0)) {
      throw std::domain_error("modulus '" + family_ + "' is not positive at t=" + std::to_string(t));
    }
    return v;
  }

  const std::string& family() const { return family_; }
  SeriesTag tag() const { return tag_; }

  Modulus with_tag(SeriesTag tag) const {
    Modulus m = *this;
    m.tag_ = tag;
    return m;
  }

 private:
  std::shared_ptr<const Function> fn_;
  std::string family_;
  SeriesTag tag_;
};

inline double eval_modulus(const Modulus& m, double t) { return m(t); }

namespace families {

inline Modulus constant(double L) {
  if (!(L > 0.0)) throw std::invalid_argument("constant modulus needs L > 0");
  return {[L](double) { return L; }, "constant", SeriesTag::KnownDivergent};
}

inline Modulus linear() {
  return {[](double t) { return 1.0 + t; }, "linear", SeriesTag::KnownDivergent};
}

/// 1 + sqrt(t): the rate in the square-root separation estimate.
inline Modulus sqrt_rate() {
  return {[](double t) { return 1.0 + std::sqrt(t); }, "sqrt", SeriesTag::KnownDivergent};
}

inline Modulus poly2() {
  return {[](double t) { return (1.0 + t) * (1.0 + t); }, "poly2", SeriesTag::KnownConvergent};
}

inline Modulus max_square() {
  return {[](double t) { return std::max(1.0, t * t); }, "maxsq", SeriesTag::KnownConvergent};
}

inline Modulus exponential() {
  return {[](double t) { return std::exp(t); }, "exp", SeriesTag::KnownConvergent};
}

inline Modulus n_log_n() {
  return {[](double t) { return (1.0 + t) * (1.0 + std::log1p(t)); }, "nlogn",
          SeriesTag::KnownDivergent};
}

/// (1 + t)^p; the series converges exactly when p > 1.
inline Modulus power(double p) {
  if (!(p >= 0.0)) throw std::invalid_argument("power modulus needs p >= 0");
  return {[p](double t) { return std::pow(1.0 + t, p); }, "power",
          p > 1.0 ? SeriesTag::KnownConvergent : SeriesTag::KnownDivergent};
}

/// Piecewise-linear interpolation of (t, phi) breakpoints, constant beyond the last one.
inline Modulus table(std::vector<std::pair<double, double>> points) {
  if (points.empty()) throw std::invalid_argument("modulus table is empty");
  std::sort(points.begin(), points.end());
  if (points.front().first != 0.0) {
    throw std::invalid_argument("modulus table must start at t = 0");
  }
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!(points[i].second > 0.0)) throw std::invalid_argument("modulus table value must be > 0");
    if (i > 0) {
      if (points[i].first == points[i - 1].first) {
        throw std::invalid_argument("modulus table has duplicate abscissae");
      }
      if (points[i].second < points[i - 1].second) {
        throw std::invalid_argument("modulus table is not nondecreasing");
      }
    }
  }
  auto shared = std::make_shared<const std::vector<std::pair<double, double>>>(std::move(points));
  return {[shared](double t) {
            const auto& p = *shared;
            if (t >= p.back().first) return p.back().second;
            auto hi = std::upper_bound(p.begin(), p.end(), t,
                                       [](double v, const auto& q) { return v < q.first; });
            auto lo = hi - 1;
            const double w = (t - lo->first) / (hi->first - lo->first);
            return lo->second + w * (hi->second - lo->second);
          },
          "table", SeriesTag::Untagged};
}

/// The built-in families by name.
inline std::vector<std::string> builtin_names() {
  return {"constant", "linear", "sqrt", "poly2", "maxsq", "exp", "nlogn"};
}

inline Modulus by_name(const std::string& name, double param = 1.0) {
  if (name == "constant") return constant(param);
  if (name == "linear") return linear();
  if (name == "sqrt") return sqrt_rate();
  if (name == "poly2") return poly2();
  if (name == "maxsq") return max_square();
  if (name == "exp") return exponential();
  if (name == "nlogn") return n_log_n();
  if (name == "power") return power(param);
  throw std::invalid_argument("unknown modulus family '" + name + "'");
}

}  // namespace families

/// Samples `pairs` random pairs s <= t in [0, t_max] and reports whether phi is
/// positive and nondecreasing on all of them.
inline bool sampled_monotone(const Modulus& m, std::uint64_t seed = 0, int pairs = 1000,
                             double t_max = 100.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, t_max);
  for (int i = 0; i < pairs; ++i) {
    double s = u(rng), t = u(rng);
    if (s > t) std::swap(s, t);
    const double fs = m(s), ft = m(t);
    if (fs > ft) return false;
  }
  return true;
}

/// min(phi(t), max(1, t^2)); on integers n >= 1 this is min(phi(n), n^2).
inline Modulus truncate_modulus(const Modulus& m) {
  Modulus inner = m;
  return {[inner](double t) { return std::min(inner(t), std::max(1.0, t * t)); },
          "truncated(" + m.family() + ")", m.tag()};
}

namespace detail {

/// Neumaier-compensated accumulator.
class CompensatedSum {
 public:
  void add(double v) {
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v)) {
      comp_ += (sum_ - t) + v;
    } else {
      comp_ += (v - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

inline double reciprocal_term(const Modulus& m, std::int64_t n) {
  const double v = m(static_cast<double>(n));
  const double r = 1.0 / v;
  if (!std::isfinite(r)) throw std::overflow_error("1/phi(n) overflowed");
  return r;
}

}  // namespace detail

/// Sum of 1/phi(n) for n = 1..N, ascending, compensated.
inline double partial_sum(const Modulus& m, std::int64_t N) {
  if (N < 1) throw std::invalid_argument("partial_sum needs N >= 1");
  detail::CompensatedSum acc;
  for (std::int64_t n = 1; n <= N; ++n) acc.add(detail::reciprocal_term(m, n));
  return acc.value();
}

/// Sum of 1/phi(n) for n = first..last.
inline double range_sum(const Modulus& m, std::int64_t first, std::int64_t last) {
  detail::CompensatedSum acc;
  for (std::int64_t n = first; n <= last; ++n) acc.add(detail::reciprocal_term(m, n));
  return acc.value();
}

enum class TailStatus { Ok, UnknownTail };

/// Integral-test bracket for the tail sum over n > N.
struct TailBounds {
  double lower = 0.0;
  double upper = 0.0;
  TailStatus status = TailStatus::Ok;
};

namespace detail {

inline TailBounds tail_bounds_assuming(const Modulus& m, std::int64_t N, SeriesTag assumed) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  if (assumed == SeriesTag::KnownDivergent) return {inf, inf, TailStatus::Ok};
  const double a = static_cast<double>(N);
  auto inv = [&m](double t) { return 1.0 / m(t); };
  double head_err = 0.0;
  const double head = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
      inv, a, a + 1.0, 12, 1e-14, &head_err);
  // With a convergence tag the integral is known finite, so any decaying panel
  // ratio is trusted for the extrapolated remainder.
  const double max_ratio =
      assumed == SeriesTag::KnownConvergent ? 0.999 : detail::kDecayingRatio;
  const TailIntegral tail = integrate_tail(inv, a + 1.0, max_ratio);
  TailBounds out;
  out.lower = tail.computed;
  out.upper = head + tail.computed + tail.remainder;
  if (!tail.converged || head_err > 1e-9 * std::abs(head) + 1e-300) {
    out.status = TailStatus::UnknownTail;
  }
  return out;
}

inline void check_monotone_beyond(const Modulus& m, std::int64_t N) {
  double prev = m(static_cast<double>(N));
  double t = static_cast<double>(N);
  for (int i = 0; i < 64; ++i) {
    t = t * 1.5 + 1.0;
    const double v = m(t);
    if (v < prev) throw std::domain_error("modulus '" + m.family() + "' is not monotone");
    prev = v;
  }
}

}  // namespace detail

/// lower = int_{N+1}^inf dt/phi, upper = int_N^inf dt/phi, bracketing sum_{n>N} 1/phi(n).
///
/// A KnownDivergent tag yields +inf for both; an upper bound of +inf also
/// signals a tail that did not visibly decay before the cutoff.
inline TailBounds tail_bounds(const Modulus& m, std::int64_t N) {
  if (N < 1) throw std::invalid_argument("tail_bounds needs N >= 1");
  detail::check_monotone_beyond(m, N);
  return detail::tail_bounds_assuming(m, N, m.tag());
}

struct SeriesEstimate {
  std::int64_t N = 0;
  double partial = 0.0;
  double tail_lower = 0.0;
  double tail_upper = 0.0;
  Verdict verdict = Verdict::Unknown;
  bool inconsistent = false;  ///< numeric evidence contradicts the analytic tag
  std::string evidence;
  std::vector<std::pair<std::int64_t, double>> checkpoints;  ///< (2^k, partial sum)
};

struct ClassifyOptions {
  std::int64_t budget = std::int64_t{1} << 20;  ///< max number of phi(n) terms summed
  double s_max = 1e6;
  double eps_tail = 1e-12;
};

/// Decides or estimates whether sum 1/phi(n) diverges.
///
/// An analytic tag is authoritative; the numeric path only reports a verdict
/// it can support (partial sums past S_max with non-decaying increments, or a
/// finite tail below eps_tail) and otherwise answers Unknown.
inline SeriesEstimate classify_series(const Modulus& m, const ClassifyOptions& opt = {}) {
  SeriesEstimate est;
  const std::int64_t budget = std::max<std::int64_t>(opt.budget, 1);
  detail::CompensatedSum acc;
  // The slowing test below needs four checkpoints, so S_max never stops the loop earlier.
  constexpr std::size_t kMinCheckpoints = 4;
  std::int64_t next_checkpoint = 1;
  for (std::int64_t n = 1; n <= budget; ++n) {
    acc.add(detail::reciprocal_term(m, n));
    if (n != next_checkpoint) continue;
    est.checkpoints.emplace_back(n, acc.value());
    if (acc.value() > opt.s_max && est.checkpoints.size() >= kMinCheckpoints) break;
    if (next_checkpoint > budget / 2) break;
    next_checkpoint *= 2;
  }
  est.N = est.checkpoints.back().first;
  est.partial = est.checkpoints.back().second;

  // Increments between doubling checkpoints: geometric decay means the tail is small.
  bool slowing = false;
  const auto& cp = est.checkpoints;
  if (cp.size() >= kMinCheckpoints) {
    int slow = 0;
    for (std::size_t k = cp.size() - 3; k < cp.size(); ++k) {
      const double d1 = cp[k].second - cp[k - 1].second;
      const double d0 = cp[k - 1].second - (k >= 2 ? cp[k - 2].second : 0.0);
      if (d0 > 0.0 && d1 / d0 > detail::kDecayingRatio) ++slow;
    }
    slowing = slow == 3;
  }

  const TailBounds numeric = detail::tail_bounds_assuming(m, est.N, SeriesTag::Untagged);
  const bool numeric_diverges = est.partial > opt.s_max && slowing;
  const bool numeric_converges = std::isfinite(numeric.upper) && numeric.upper < opt.eps_tail &&
                                 numeric.status == TailStatus::Ok;

  std::ostringstream ev;
  ev << "N=" << est.N << " partial=" << est.partial;
  switch (m.tag()) {
    case SeriesTag::KnownDivergent: {
      est.verdict = Verdict::Diverges;
      est.tail_lower = est.tail_upper = std::numeric_limits<double>::infinity();
      est.inconsistent = numeric_converges;
      ev << "; tag KnownDivergent";
      if (est.inconsistent) ev << "; INCONSISTENT: numeric tail below eps_tail";
      break;
    }
    case SeriesTag::KnownConvergent: {
      est.verdict = Verdict::Converges;
      const TailBounds tagged = detail::tail_bounds_assuming(m, est.N, SeriesTag::KnownConvergent);
      est.tail_lower = tagged.lower;
      est.tail_upper = tagged.upper;
      est.inconsistent = numeric_diverges || !std::isfinite(tagged.upper);
      ev << "; tag KnownConvergent; tail in [" << est.tail_lower << ", " << est.tail_upper << "]";
      if (est.inconsistent) ev << "; INCONSISTENT: partial sums do not settle";
      break;
    }
    case SeriesTag::Untagged: {
      est.tail_lower = numeric.lower;
      est.tail_upper = numeric.upper;
      if (numeric_diverges) {
        est.verdict = Verdict::Diverges;
        ev << "; partial sum exceeds S_max with slowing decay";
      } else if (numeric_converges) {
        est.verdict = Verdict::Converges;
        ev << "; tail upper bound " << numeric.upper << " below eps_tail";
      } else {
        est.verdict = Verdict::Unknown;
        ev << "; no conclusive numeric evidence (tail upper " << numeric.upper << ")";
      }
      break;
    }
  }
  est.evidence = ev.str();
  return est;
}

}  // namespace osgood
