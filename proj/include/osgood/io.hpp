#pragma once

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "osgood/bounds.hpp"
#include "osgood/estimators.hpp"
#include "osgood/field.hpp"
#include "osgood/modulus.hpp"

namespace osgood::io {

using json = nlohmann::ordered_json;

inline constexpr const char* kSchema = "osgood-report/1";

/// Shortest round-trip decimal form; non-finite values as inf, -inf, nan.
inline std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

/// JSON number, or a string for non-finite values (JSON has no infinity).
inline json num(double v) {
  if (std::isfinite(v)) return v;
  return fmt(v);
}

inline double parse_double(const std::string& s) {
  if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (!s.empty() && s[0] == '+') ++first;
  auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last) throw std::invalid_argument("not a number: '" + s + "'");
  return v;
}

inline double json_double(const json& j) {
  if (j.is_string()) return parse_double(j.get<std::string>());
  return j.get<double>();
}

inline json wrap(const std::string& type, json body) {
  json j;
  j["schema"] = kSchema;
  j["type"] = type;
  for (auto it = body.begin(); it != body.end(); ++it) j[it.key()] = it.value();
  return j;
}

// ---------------------------------------------------------------- CSV

inline void write_trajectory_csv(std::ostream& os, const Trajectory& tr) {
  os << (tr.coords == Coordinates::Log ? "x,u,slope\n" : "x,y,slope\n");
  for (std::size_t i = 0; i < tr.size(); ++i) {
    const Node n = tr.node(i);
    os << fmt(n.x) << ',' << fmt(n.y) << ',' << fmt(n.slope) << '\n';
  }
}

inline void write_crossings_csv(std::ostream& os, const std::vector<CrossingRecord>& recs) {
  os << "n,level,x_first,x_last\n";
  for (const auto& r : recs) {
    os << r.n << ',' << fmt(r.level) << ',' << fmt(r.x_first) << ',' << fmt(r.x_last_before_next)
       << '\n';
  }
}

/// Breakpoints e^k for k in [k_lo, k_hi] plus `per_segment - 1` interior points per segment.
inline void write_field_csv(std::ostream& os, const PiecewiseLogLinearField& f, int k_lo, int k_hi,
                            int per_segment = 4) {
  if (k_hi < k_lo) throw std::invalid_argument("empty breakpoint range");
  os << "y,F\n";
  for (int k = k_lo; k <= k_hi; ++k) {
    const double y = std::exp(static_cast<double>(k));
    os << fmt(y) << ',' << fmt(f.eval(y)) << '\n';
    if (k == k_hi) break;
    const double y_next = std::exp(static_cast<double>(k + 1));
    for (int j = 1; j < per_segment; ++j) {
      const double t = y + (y_next - y) * j / per_segment;
      os << fmt(t) << ',' << fmt(f.eval(t)) << '\n';
    }
  }
}

struct SweepRow {
  double param = 0.0;
  double series_sum = 0.0;
  double x_infinity_lower = 0.0;
  double x_infinity_upper = 0.0;
};

inline void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
  os << "param,series_sum,x_infinity_lower,x_infinity_upper\n";
  for (const auto& r : rows) {
    os << fmt(r.param) << ',' << fmt(r.series_sum) << ',' << fmt(r.x_infinity_lower) << ','
       << fmt(r.x_infinity_upper) << '\n';
  }
}

// ---------------------------------------------------------------- JSON

inline json to_json(const SeriesEstimate& e, const Modulus& m) {
  json cps = json::array();
  for (const auto& [n, s] : e.checkpoints) cps.push_back({n, num(s)});
  return wrap("series", {{"modulus", m.family()},
                         {"tag", to_string(m.tag())},
                         {"N", e.N},
                         {"partial", num(e.partial)},
                         {"tail_lower", num(e.tail_lower)},
                         {"tail_upper", num(e.tail_upper)},
                         {"verdict", to_string(e.verdict)},
                         {"inconsistent", e.inconsistent},
                         {"evidence", e.evidence},
                         {"checkpoints", cps}});
}

inline json to_json(const ConditionReport& r, const std::string& condition, double psi_const = 1.0) {
  return wrap("condition", {{"condition", condition},
                            {"psi_const", num(psi_const)},
                            {"samples_checked", r.samples_checked},
                            {"worst_ratio", num(r.worst_ratio)},
                            {"worst_witness",
                             {{"x", num(r.worst_witness.x)},
                              {"y", num(r.worst_witness.y)},
                              {"z", num(r.worst_witness.z)}}},
                            {"passed", r.passed}});
}

inline json to_json(const CrossingRecord& r) {
  return {{"n", r.n},
          {"level", num(r.level)},
          {"x_first", num(r.x_first)},
          {"x_last", num(r.x_last_before_next)},
          {"crossings", r.crossings},
          {"dense", r.dense}};
}

inline json to_json(const BlowupReport& r) {
  json gaps = json::array();
  for (const auto& g : r.gaps) {
    gaps.push_back({{"n", g.n},
                    {"x_n", num(g.x_n)},
                    {"x_next", num(g.x_next)},
                    {"gap", num(g.gap)},
                    {"upper_bound", num(g.upper_bound)},
                    {"lower_bound", num(g.lower_bound)},
                    {"provable_upper", num(g.provable_upper)},
                    {"ok", g.ok},
                    {"stated_ok", g.stated_ok}});
  }
  json cr = json::array();
  for (const auto& c : r.crossings) cr.push_back(to_json(c));
  return wrap(r.mode == BlowupReport::Mode::BlowUp ? "blowup" : "collapse",
              {{"series", to_string(r.series)},
               {"termination", to_string(r.termination)},
               {"x_reach", num(r.x_reach)},
               {"tail_bound", num(r.tail_bound)},
               {"x_infinity_bracket", {num(r.bracket_lo), num(r.bracket_hi)}},
               {"finite", r.finite},
               {"gaps_ok", r.gaps_ok},
               {"stated_gaps_ok", r.stated_gaps_ok},
               {"budget_exceeded", r.budget_exceeded},
               {"cause", r.cause},
               {"gaps", gaps},
               {"crossings", cr}});
}

inline json to_json(const BoundReport& r) {
  json checks = json::array();
  for (const auto& c : r.checks) {
    checks.push_back({{"name", c.name},
                      {"worst", num(c.worst)},
                      {"tolerance", num(c.tolerance)},
                      {"witness_x", num(c.witness_x)},
                      {"passed", c.passed}});
  }
  return wrap("bound", {{"kind", to_string(r.kind)},
                        {"range", {num(r.x_lo), num(r.x_hi)}},
                        {"worst_margin", num(r.worst_margin)},
                        {"witness_x", num(r.witness_x)},
                        {"tolerance", num(r.tolerance)},
                        {"passed", r.passed},
                        {"cause", r.cause},
                        {"checks", checks}});
}

/// One-line human summary of a bound report.
inline std::string summary(const BoundReport& r) {
  std::ostringstream os;
  os << to_string(r.kind) << ": " << (r.passed ? "PASS" : "FAIL") << " worst_margin=" << fmt(r.worst_margin)
     << " at x=" << fmt(r.witness_x) << " on [" << fmt(r.x_lo) << ", " << fmt(r.x_hi) << "]";
  if (!r.cause.empty()) os << " (" << r.cause << ")";
  return os.str();
}

inline json to_json(const Trajectory& tr) {
  json nodes = json::array();
  for (std::size_t i = 0; i < tr.size(); ++i) {
    const Node n = tr.node(i);
    nodes.push_back({num(n.x), num(n.y), num(n.slope)});
  }
  json segs = json::array();
  for (const auto& s : tr.segments) {
    segs.push_back({num(s.x0), num(s.h), num(s.x_end), num(s.c[0]), num(s.c[1]), num(s.c[2]),
                    num(s.c[3]), num(s.c[4])});
  }
  return wrap("trajectory", {{"label", tr.label},
                             {"coords", tr.coords == Coordinates::Log ? "log" : "linear"},
                             {"time_sign", tr.time_sign},
                             {"termination", to_string(tr.termination)},
                             {"failure_reason", tr.failure_reason},
                             {"steps_accepted", tr.steps_accepted},
                             {"steps_rejected", tr.steps_rejected},
                             {"nodes", nodes},
                             {"segments", segs}});
}

inline Termination termination_from(const std::string& s) {
  if (s == "BlowUp") return Termination::BlowUp;
  if (s == "HitZero") return Termination::HitZero;
  if (s == "StepFailure") return Termination::StepFailure;
  return Termination::SpanEnd;
}

/// Rebuilds a trajectory saved by to_json, including its dense output.
inline Trajectory trajectory_from_json(const json& j) {
  if (j.value("type", "") != "trajectory") throw std::invalid_argument("not a trajectory document");
  Trajectory tr;
  tr.label = j.value("label", "");
  tr.coords = j.value("coords", "linear") == "log" ? Coordinates::Log : Coordinates::Linear;
  tr.time_sign = j.value("time_sign", 1);
  tr.termination = termination_from(j.value("termination", "SpanEnd"));
  tr.failure_reason = j.value("failure_reason", "");
  for (const auto& n : j.at("nodes")) {
    const double x = json_double(n.at(0));
    tr.nodes.push_back({tr.time_sign * x, json_double(n.at(1)), tr.time_sign * json_double(n.at(2))});
  }
  for (const auto& s : j.at("segments")) {
    DenseSegment d;
    d.x0 = json_double(s.at(0));
    d.h = json_double(s.at(1));
    d.x_end = json_double(s.at(2));
    for (std::size_t k = 0; k < 5; ++k) d.c[k] = json_double(s.at(3 + k));
    tr.segments.push_back(d);
  }
  if (tr.nodes.empty()) throw std::invalid_argument("trajectory has no nodes");
  if (tr.segments.size() + 1 != tr.nodes.size()) throw std::invalid_argument("trajectory segments do not match nodes");
  return tr;
}

/// Rebuilds a trajectory from its CSV nodes; dense output becomes cubic Hermite.
inline Trajectory trajectory_from_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw std::invalid_argument("empty trajectory CSV");
  Trajectory tr;
  if (line == "x,u,slope") tr.coords = Coordinates::Log;
  else if (line != "x,y,slope") throw std::invalid_argument("unexpected trajectory CSV header '" + line + "'");
  std::vector<Node> raw;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string a, b, c;
    if (!std::getline(ss, a, ',') || !std::getline(ss, b, ',') || !std::getline(ss, c)) {
      throw std::invalid_argument("malformed trajectory CSV row '" + line + "'");
    }
    raw.push_back({parse_double(a), parse_double(b), parse_double(c)});
  }
  if (raw.empty()) throw std::invalid_argument("trajectory CSV has no rows");
  tr.time_sign = raw.size() > 1 && raw.back().x < raw.front().x ? -1 : 1;
  for (const auto& n : raw) tr.nodes.push_back({tr.time_sign * n.x, n.y, tr.time_sign * n.slope});
  for (std::size_t i = 0; i + 1 < tr.nodes.size(); ++i) {
    const Node& a = tr.nodes[i];
    const Node& b = tr.nodes[i + 1];
    if (!(b.x > a.x)) throw std::invalid_argument("trajectory CSV abscissae are not strictly monotone");
    DenseSegment d;
    d.x0 = a.x;
    d.h = b.x - a.x;
    d.x_end = b.x;
    const double dy = b.y - a.y;
    const double c2 = d.h * a.slope - dy;
    d.c = {a.y, dy, c2, dy - d.h * b.slope - c2, 0.0};
    tr.segments.push_back(d);
  }
  return tr;
}

inline Trajectory read_trajectory(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open trajectory file '" + path + "'");
  if (path.size() >= 5 && path.substr(path.size() - 5) == ".json") {
    return trajectory_from_json(json::parse(in));
  }
  return trajectory_from_csv(in);
}

}  // namespace osgood::io
