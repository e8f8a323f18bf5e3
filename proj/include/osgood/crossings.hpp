#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <vector>

#include "osgood/integrator.hpp"

namespace osgood {

enum class LevelGrid { Decay, Growth };

/// First crossing x_n of a level and the last crossing before x_{n+1}.
struct CrossingRecord {
  int n = 0;
  double level = 0.0;  ///< in the trajectory's coordinates (e^-n, e^n, -n or n)
  double x_first = 0.0;
  double x_last_before_next = 0.0;
  std::size_t crossings = 1;  ///< sign changes resolved between the two
  bool dense = false;         ///< more crossings than can be meaningfully resolved
};

namespace detail {

inline constexpr int kSubdivisions = 8;
inline constexpr std::size_t kDenseCrossings = 1000;

/// Piecewise sampling of a trajectory's dense output in internal time.
class DenseScan {
 public:
  explicit DenseScan(const Trajectory& tr) : tr_(tr) {
    const auto& segs = tr.segments;
    pts_.push_back({tr.nodes.front().x, tr.nodes.front().y, 0});
    for (std::size_t i = 0; i < segs.size(); ++i) {
      const auto& d = segs[i];
      for (int j = 1; j < kSubdivisions; ++j) {
        const double s = d.x0 + (d.x_end - d.x0) * j / kSubdivisions;
        pts_.push_back({s, d(s), i});
      }
      pts_.push_back({d.x_end, tr.nodes[i + 1].y, i});
    }
  }

  /// Internal time of the first point at or after which v - level changes sign.
  std::optional<double> first_root(double level) const {
    if (pts_[0].v == level) return pts_[0].s;
    for (std::size_t j = 1; j < pts_.size(); ++j) {
      const double h0 = pts_[j - 1].v - level, h1 = pts_[j].v - level;
      if (h1 == 0.0) return pts_[j].s;
      if ((h0 < 0.0) != (h1 < 0.0)) return refine(j, level, pts_[j - 1].s, pts_[j].s);
    }
    return std::nullopt;
  }

  /// Last root of v - level in [s_lo, s_hi], with the number of sign changes seen.
  std::optional<std::pair<double, std::size_t>> last_root(double level, double s_lo,
                                                          double s_hi) const {
    std::optional<double> last;
    std::size_t changes = 0;
    double prev_s = s_lo;
    double prev_h = value(s_lo) - level;
    auto consider = [&](std::size_t j, double s, double v) {
      const double h = v - level;
      if (h == 0.0 || (h < 0.0) != (prev_h < 0.0)) {
        if (prev_h != 0.0) {
          ++changes;
          last = h == 0.0 ? s : refine(j, level, prev_s, s);
        }
      }
      prev_s = s;
      prev_h = h;
    };
    for (std::size_t j = 1; j < pts_.size(); ++j) {
      if (pts_[j].s <= s_lo) continue;
      if (pts_[j].s >= s_hi) {
        consider(j, s_hi, value(s_hi));
        break;
      }
      consider(j, pts_[j].s, pts_[j].v);
    }
    if (!last) return std::nullopt;
    return std::make_pair(*last, changes);
  }

  double value(double s) const { return tr_.value_at(tr_.time_sign * s); }

 private:
  struct Point {
    double s;
    double v;
    std::size_t seg;  ///< segment owning the interval ending at this point
  };

  double refine(std::size_t j, double level, double a, double b) const {
    const auto& d = tr_.segments[pts_[j].seg];
    const double end = d.x_end;
    const double end_v = tr_.nodes[pts_[j].seg + 1].y;
    return bisect([&](double s) { return (s == end ? end_v : d(s)) - level; }, a, b, true);
  }

  const Trajectory& tr_;
  std::vector<Point> pts_;
};

}  // namespace detail

/// Locates x_n and x_n^+ for every n in [n_lo, n_hi] the trajectory reaches.
///
/// Levels are e^-n (Decay) or e^n (Growth) for linear trajectories and -n or n
/// for log-space ones. Roots are bracketed on the dense output and bisected
/// to 1e-12 max(1, |x|). Levels never reached produce no record.
inline std::vector<CrossingRecord> detect_level_crossings(const Trajectory& tr, int n_lo, int n_hi,
                                                          LevelGrid grid) {
  std::vector<CrossingRecord> out;
  if (tr.nodes.empty() || n_hi < n_lo) return out;
  const detail::DenseScan scan(tr);
  auto level_of = [&](int n) {
    const double k = grid == LevelGrid::Decay ? -static_cast<double>(n) : static_cast<double>(n);
    return tr.coords == Coordinates::Log ? k : std::exp(k);
  };
  std::vector<std::optional<double>> firsts;
  for (int n = n_lo; n <= n_hi + 1; ++n) firsts.push_back(scan.first_root(level_of(n)));
  for (int n = n_lo; n <= n_hi; ++n) {
    const auto& first = firsts[static_cast<std::size_t>(n - n_lo)];
    if (!first) continue;
    const auto& next = firsts[static_cast<std::size_t>(n - n_lo) + 1];
    const double level = level_of(n);
    const double s_first = *first;
    const double s_hi = next && *next >= s_first ? *next : tr.nodes.back().x;
    CrossingRecord rec;
    rec.n = n;
    rec.level = level;
    rec.x_first = tr.time_sign * s_first;
    rec.x_last_before_next = rec.x_first;
    if (auto last = scan.last_root(level, s_first, s_hi)) {
      rec.x_last_before_next = tr.time_sign * last->first;
      rec.crossings = 1 + last->second;
      rec.dense = rec.crossings > detail::kDenseCrossings;
    }
    out.push_back(rec);
  }
  return out;
}

}  // namespace osgood
