#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <ctime>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "osgood/bounds.hpp"
#include "osgood/estimators.hpp"
#include "osgood/io.hpp"
#include "osgood/parse.hpp"

namespace osgood::cli {

enum Exit : int { kOk = 0, kCheckFailed = 1, kUsage = 2, kNumeric = 3 };

struct Options {
  std::string modulus;
  std::string field;
  std::string span;
  std::string levels;
  std::string trajectory;
  std::string grid = "decay";
  std::string prop = "all";
  std::string family;
  std::string values;
  std::string kind = "blowup";
  std::string out = ".";
  std::optional<double> y0;
  std::optional<double> rel_tol;
  std::optional<double> abs_tol;
  std::optional<double> ymax;
  std::optional<int> nmax;
  std::int64_t budget = std::int64_t{1} << 20;
  std::int64_t samples = 100000;
  int per_segment = 4;
  int jobs = 1;
  std::uint64_t seed = 0;
  bool logspace = false;
};

namespace detail {

using parse::UsageError;

inline IntegratorConfig config_from(const Options& o, IntegratorConfig cfg = {}) {
  if (o.rel_tol) cfg.rel_tol = *o.rel_tol;
  if (o.abs_tol) cfg.abs_tol = *o.abs_tol;
  if (o.ymax) cfg.y_max = *o.ymax;
  if (o.nmax) cfg.n_max = *o.nmax;
  cfg.logspace = o.logspace;
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  return cfg;
}

inline Modulus need_modulus(const Options& o) {
  if (o.modulus.empty()) throw UsageError("--modulus is required");
  return parse::modulus(o.modulus);
}

inline std::optional<Modulus> maybe_modulus(const Options& o) {
  if (o.modulus.empty()) return std::nullopt;
  return parse::modulus(o.modulus);
}

class Output {
 public:
  explicit Output(const std::string& dir) : dir_(dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec || !std::filesystem::is_directory(dir_)) {
      throw UsageError("output directory '" + dir + "' is not writable");
    }
  }

  std::filesystem::path path(const std::string& name) const { return dir_ / name; }

  template <class Writer>
  std::string write(const std::string& name, Writer&& w) const {
    const auto p = path(name);
    std::ofstream os(p, std::ios::binary);
    if (!os) throw UsageError("cannot write '" + p.string() + "'");
    w(os);
    if (!os) throw UsageError("failed writing '" + p.string() + "'");
    return p.string();
  }

  std::string json(const std::string& name, const io::json& j) const {
    return write(name, [&](std::ostream& os) { os << j.dump(2) << '\n'; });
  }

 private:
  std::filesystem::path dir_;
};

/// Wall-clock time and argv go to a separate file so reports stay reproducible.
inline void write_meta(const Output& out, const std::string& name, const std::vector<std::string>& args) {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream ts;
  ts << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  out.json(name + ".meta.json", {{"schema", io::kSchema}, {"argv", args}, {"started_at", ts.str()}});
}

inline int escape_exit(const BlowupReport& r) {
  if (r.budget_exceeded) return kNumeric;
  return r.gaps_ok ? kOk : kCheckFailed;
}

inline std::string escape_summary(const BlowupReport& r, const std::string& what) {
  std::ostringstream os;
  const bool up = r.mode == BlowupReport::Mode::BlowUp;
  os << what << ": series " << to_string(r.series) << "; run ended with " << to_string(r.termination)
     << " at x=" << io::fmt(r.x_reach) << " after " << r.crossings.size() << " level crossings";
  if (r.finite) {
    os << "; " << (up ? "blow-up" : "zero-hitting") << " time in [" << io::fmt(r.bracket_lo) << ", "
       << io::fmt(r.bracket_hi) << "]";
  } else if (!r.cause.empty()) {
    os << "; " << r.cause;
  }
  os << "; gaps " << (r.gaps_ok ? "within" : "OUTSIDE") << " provable bounds";
  if (r.gaps_ok && !r.stated_gaps_ok) os << " (some exceed the bound as stated)";
  os << ".";
  return os.str();
}

// ------------------------------------------------------------ subcommands

inline int cmd_classify(const Options& o, const Output& out, std::ostream& log) {
  const Modulus m = need_modulus(o);
  ClassifyOptions opt;
  opt.budget = o.budget;
  const SeriesEstimate e = classify_series(m, opt);
  const auto path = out.json("classify.json", io::to_json(e, m));
  log << "classify " << m.family() << " (" << to_string(m.tag()) << "): verdict " << to_string(e.verdict)
      << "; partial sum to N=" << e.N << " is " << io::fmt(e.partial) << ", tail in ["
      << io::fmt(e.tail_lower) << ", " << io::fmt(e.tail_upper) << "]"
      << (e.inconsistent ? "; numeric evidence CONTRADICTS the tag" : "") << ". Report: " << path << "\n";
  return e.inconsistent ? kCheckFailed : kOk;
}

inline int cmd_dump_field(const Options& o, const Output& out, std::ostream& log) {
  const Modulus m = need_modulus(o);
  const std::string kind = o.field.empty() ? "blowup" : o.field;
  if (kind != "blowup" && kind != "nonuniq") throw UsageError("dump-field needs --field blowup|nonuniq");
  const auto choice = parse::field(kind, m);
  const auto& f = *choice.piecewise;
  int k_lo = kind == "blowup" ? 0 : -10, k_hi = kind == "blowup" ? 10 : 0;
  if (!o.levels.empty()) {
    const auto [a, b] = parse::range(o.levels, "--levels");
    k_lo = static_cast<int>(a);
    k_hi = static_cast<int>(b);
  }
  if (o.per_segment < 1) throw UsageError("--per-segment must be >= 1");
  const auto csv = out.write("field.csv", [&](std::ostream& os) { io::write_field_csv(os, f, k_lo, k_hi, o.per_segment); });

  ConditionReport rep;
  std::string cond;
  double psi = 1.0;
  if (kind == "nonuniq") {
    DifferencePlan plan;
    plan.samples = o.samples;
    plan.seed = o.seed;
    rep = check_osgood_difference(choice.scalar, m, 1.0, plan);
    cond = "osgood-difference";
  } else {
    GrowthPlan plan;
    plan.samples = o.samples;
    plan.seed = o.seed;
    psi = growth_guard(m);
    rep = check_growth_bound(choice.scalar, m, psi, plan);
    cond = "growth";
  }
  const auto js = out.json("field_condition.json", io::to_json(rep, cond, psi));
  log << "dump-field " << choice.scalar.label << ": breakpoints e^" << k_lo << "..e^" << k_hi << " written to "
      << csv << "; " << cond << " condition " << (rep.passed ? "holds" : "FAILS") << " on "
      << rep.samples_checked  << " samples with psi=" << io::fmt(psi) << " (worst ratio " << io::fmt(rep.worst_ratio) << "). Report: " << js
      << "\n";
  return rep.passed ? kOk : kCheckFailed;
}

inline int cmd_integrate(const Options& o, const Output& out, std::ostream& log) {
  if (o.field.empty()) throw UsageError("--field is required");
  if (!o.y0) throw UsageError("--y0 is required");
  if (o.span.empty()) throw UsageError("--span is required");
  const auto choice = parse::field(o.field, maybe_modulus(o));
  const auto [a, b] = parse::range(o.span, "--span");
  if (a == b) throw UsageError("--span is empty");
  const IntegratorConfig cfg = config_from(o);
  Trajectory tr;
  try {
    if (o.logspace) {
      if (!(*o.y0 > 0.0)) throw UsageError("--logspace needs --y0 > 0");
      const double u0 = std::log(*o.y0);
      if (choice.piecewise) {
        if (!(b > a)) throw UsageError("piecewise log-space runs need a forward span");
        tr = integrate_logspace(*choice.piecewise, u0, {a, b}, cfg);
      } else {
        tr = integrate_logspace(to_log_slope(choice.scalar), u0, {a, b}, cfg);
      }
    } else {
      tr = integrate(choice.scalar, *o.y0, {a, b}, cfg);
    }
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const auto csv = out.write("trajectory.csv", [&](std::ostream& os) { io::write_trajectory_csv(os, tr); });
  out.json("trajectory.json", io::to_json(tr));
  log << "integrate " << tr.label << " from y0=" << io::fmt(*o.y0) << ": " << to_string(tr.termination)
      << " at x=" << io::fmt(tr.x_end()) << " (" << (tr.coords == Coordinates::Log ? "u" : "y") << "="
      << io::fmt(tr.y_end()) << ") after " << tr.steps_accepted << " accepted and " << tr.steps_rejected
      << " rejected steps" << (tr.failure_reason.empty() ? "" : "; " + tr.failure_reason)
      << ". Trajectory: " << csv << "\n";
  return tr.termination == Termination::StepFailure ? kNumeric : kOk;
}

inline int cmd_crossings(const Options& o, const Output& out, std::ostream& log) {
  if (o.trajectory.empty()) throw UsageError("crossings needs --trajectory <file> from a previous integrate run");
  Trajectory tr;
  try {
    tr = io::read_trajectory(o.trajectory);
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
  LevelGrid grid;
  if (o.grid == "decay") grid = LevelGrid::Decay;
  else if (o.grid == "growth") grid = LevelGrid::Growth;
  else throw UsageError("--grid must be decay or growth");
  int n_lo = 1, n_hi = 50;
  if (!o.levels.empty()) {
    const auto [a, b] = parse::range(o.levels, "--levels");
    n_lo = static_cast<int>(a);
    n_hi = static_cast<int>(b);
  }
  const auto recs = detect_level_crossings(tr, n_lo, n_hi, grid);
  const auto csv = out.write("crossings.csv", [&](std::ostream& os) { io::write_crossings_csv(os, recs); });
  const auto dense = std::count_if(recs.begin(), recs.end(), [](const CrossingRecord& r) { return r.dense; });
  log << "crossings: " << recs.size() << " of " << (n_hi - n_lo + 1) << " " << o.grid << " levels reached";
  if (!recs.empty()) log << ", first at x=" << io::fmt(recs.front().x_first) << ", last at x=" << io::fmt(recs.back().x_first);
  if (dense > 0) log << "; " << dense << " levels crossed densely";
  log << ". Records: " << csv << "\n";
  return kOk;
}

inline BlowupReport run_blowup(const Options& o, const std::optional<Modulus>& m, const IntegratorConfig& cfg) {
  const double y0 = o.y0.value_or(0.0);
  const std::string field = o.field.empty() ? "blowup" : o.field;
  if (field == "blowup") {
    if (!m) throw UsageError("blowup needs --modulus");
    return estimate_blowup(build_blowup_field(*m), y0, cfg);
  }
  const auto choice = parse::field(field, m);
  return estimate_blowup_direct(choice.scalar, y0, cfg);
}

inline int cmd_blowup(const Options& o, const Output& out, std::ostream& log, const std::string& prefix = "blowup") {
  const BlowupReport r = run_blowup(o, maybe_modulus(o), config_from(o));
  const auto path = out.json(prefix + ".json", io::to_json(r));
  out.write(prefix + "_crossings.csv", [&](std::ostream& os) { io::write_crossings_csv(os, r.crossings); });
  log << escape_summary(r, "blowup") << " Report: " << path << "\n";
  return escape_exit(r);
}

inline BlowupReport run_nonuniq(const Options& o, const Modulus& m, const IntegratorConfig& cfg) {
  try {
    return hitting_time_zero(build_nonuniqueness_field(m), o.y0.value_or(std::exp(-1.0)), cfg);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
}

inline int cmd_nonuniq(const Options& o, const Output& out, std::ostream& log) {
  const BlowupReport r = run_nonuniq(o, need_modulus(o), config_from(o));
  const auto path = out.json("nonuniq.json", io::to_json(r));
  out.write("nonuniq_crossings.csv", [&](std::ostream& os) { io::write_crossings_csv(os, r.crossings); });
  log << escape_summary(r, "nonuniq") << " Report: " << path << "\n";
  return escape_exit(r);
}

inline std::vector<BoundKind> props_from(const std::string& s) {
  if (s == "all") {
    return {BoundKind::lipschitz(2.0), BoundKind::separation_sqrt(), BoundKind::separation_log(),
            BoundKind::growth_sqrt(), BoundKind::growth_log()};
  }
  if (s == "lipschitz") return {BoundKind::lipschitz(2.0)};
  if (s.rfind("lipschitz:", 0) == 0) {
    try {
      return {BoundKind::lipschitz(parse::number(s.substr(10), "Lipschitz constant"))};
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  }
  if (s == "sep-sqrt") return {BoundKind::separation_sqrt()};
  if (s == "sep-log") return {BoundKind::separation_log()};
  if (s == "growth-sqrt") return {BoundKind::growth_sqrt()};
  if (s == "growth-log") return {BoundKind::growth_log()};
  throw UsageError("unknown --prop '" + s + "'");
}

inline std::string file_stem(const BoundKind& k) {
  std::string s = to_string(k);
  std::replace(s.begin(), s.end(), ':', '_');
  return s;
}

inline int cmd_verify(const Options& o, const Output& out, std::ostream& log) {
  const auto kinds = props_from(o.prop);
  const IntegratorConfig cfg = config_from(o, verification_config());
  int code = kOk;
  for (const auto& k : kinds) {
    const BoundReport r = verify_proposition(k, cfg);
    const auto path = out.json("verify_" + file_stem(k) + ".json", io::to_json(r));
    log << io::summary(r) << " -> " << path << "\n";
    if (!r.passed) {
      const bool numeric = r.cause.rfind("integration", 0) == 0;
      code = std::max(code, numeric ? int{kNumeric} : int{kCheckFailed});
    }
  }
  return code;
}

inline std::vector<double> sweep_values(const std::string& s) {
  const auto parts = parse::split(s, ':');
  if (parts.size() == 3) {
    const double a = parse::number(parts[0], "--values"), b = parse::number(parts[1], "--values");
    const double k = parse::number(parts[2], "--values");
    if (!(k >= 1.0) || k != std::floor(k) || k > 1e5) throw UsageError("--values a:b:k needs an integer count k >= 1");
    std::vector<double> v;
    const int count = static_cast<int>(k);
    for (int i = 0; i < count; ++i) v.push_back(count == 1 ? a : a + (b - a) * i / (count - 1));
    return v;
  }
  std::vector<double> v;
  for (const auto& p : parse::split(s, ',')) v.push_back(parse::number(p, "--values"));
  if (v.empty()) throw UsageError("--values is empty");
  return v;
}

inline int cmd_sweep(const Options& o, const Output& out, std::ostream& log) {
  if (o.family != "power" && o.family != "constant") throw UsageError("sweep needs --family power|constant");
  if (o.kind != "blowup" && o.kind != "nonuniq") throw UsageError("sweep --kind must be blowup or nonuniq");
  if (o.values.empty()) throw UsageError("sweep needs --values a:b:k or a comma list");
  if (o.jobs < 1) throw UsageError("--jobs must be >= 1");
  const auto values = sweep_values(o.values);
  const IntegratorConfig cfg = config_from(o);
  std::vector<Modulus> mods;
  for (double v : values) {
    try {
      mods.push_back(families::by_name(o.family, v));
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  }

  std::vector<io::SweepRow> rows(values.size());
  std::vector<int> codes(values.size(), kOk);
  std::vector<std::string> errors(values.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < values.size(); i = next++) {
      try {
        const Modulus& m = mods[i];
        const BlowupReport r = o.kind == "blowup" ? estimate_blowup(build_blowup_field(m), o.y0.value_or(0.0), cfg)
                                                  : run_nonuniq(o, m, cfg);
        io::json j = io::to_json(r);
        j["param"] = io::num(values[i]);
        j["modulus"] = m.family();
        std::ostringstream name;
        name << "sweep_" << std::setw(4) << std::setfill('0') << i << ".json";
        out.json(name.str(), j);
        double sum = std::numeric_limits<double>::infinity();
        if (r.series == Verdict::Converges) {
          constexpr std::int64_t kHead = 4096;
          const TailBounds tb = ::osgood::detail::tail_bounds_assuming(m, kHead, SeriesTag::KnownConvergent);
          sum = range_sum(m, 0, kHead) + 0.5 * (tb.lower + tb.upper);
        }
        rows[i] = {values[i], sum, r.bracket_lo, r.bracket_hi};
        codes[i] = escape_exit(r);
      } catch (const std::exception& e) {
        errors[i] = e.what();
        codes[i] = kNumeric;
      }
    }
  };
  const int threads = std::min<int>(o.jobs, static_cast<int>(values.size()));
  std::vector<std::thread> pool;
  for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  const auto csv = out.write("sweep.csv", [&](std::ostream& os) { io::write_sweep_csv(os, rows); });
  int code = kOk;
  std::size_t finite = 0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    code = std::max(code, codes[i]);
    if (std::isfinite(rows[i].x_infinity_upper)) ++finite;
    if (!errors[i].empty()) log << "sweep point " << io::fmt(values[i]) << " failed: " << errors[i] << "\n";
  }
  log << "sweep " << o.family << " (" << o.kind << ") over " << values.size() << " parameter values: " << finite
      << " with a finite escape bracket. Aggregate: " << csv << "\n";
  return code;
}

}  // namespace detail

/// Runs one command; `args` excludes the program name. Returns the exit code.
inline int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  using namespace detail;
  Options o;
  CLI::App app{"Osgood-condition experiments: series tests, constructed fields, escape times, bounds"};
  app.set_config("--config", "", "key=value file mirrored by the flags; flags win");
  app.fallthrough();
  app.require_subcommand(1, 1);

  app.add_option("--modulus", o.modulus, "family=<name>[,L=..|p=..][,tag=..] or table=<path>");
  app.add_option("--field", o.field, "blowup | nonuniq | sqrt | riccati | linear:<L>");
  app.add_option("--y0", o.y0, "initial value");
  app.add_option("--span", o.span, "integration span a:b");
  app.add_option("--rel-tol", o.rel_tol, "relative tolerance");
  app.add_option("--abs-tol", o.abs_tol, "absolute tolerance");
  app.add_option("--ymax", o.ymax, "blow-up threshold on |y|");
  app.add_option("--nmax", o.nmax, "log-space runs stop at u = -nmax");
  app.add_option("--out", o.out, "output directory");
  app.add_option("--jobs", o.jobs, "concurrent sweep points");
  app.add_option("--seed", o.seed, "seed for sampled checks");
  app.add_option("--levels", o.levels, "level range a:b (crossings, dump-field)");
  app.add_option("--trajectory", o.trajectory, "trajectory file (.json or .csv) from integrate");
  app.add_option("--grid", o.grid, "decay | growth");
  app.add_option("--prop", o.prop, "lipschitz[:L] | sep-sqrt | sep-log | growth-sqrt | growth-log | all");
  app.add_option("--family", o.family, "sweep family: power | constant");
  app.add_option("--values", o.values, "sweep parameters a:b:k or v1,v2,...");
  app.add_option("--kind", o.kind, "sweep experiment: blowup | nonuniq");
  app.add_option("--budget", o.budget, "classify: largest partial-sum index");
  app.add_option("--samples", o.samples, "dump-field: condition-check samples");
  app.add_option("--per-segment", o.per_segment, "dump-field: points per breakpoint interval");
  app.add_flag("--logspace", o.logspace, "integrate u = log y");

  using Handler = int (*)(const Options&, const Output&, std::ostream&);
  const std::vector<std::pair<std::string, std::pair<std::string, Handler>>> table = {
      {"classify", {"classify the series sum 1/phi(n)", cmd_classify}},
      {"dump-field", {"tabulate a constructed field and check its condition", cmd_dump_field}},
      {"integrate", {"integrate a field and save the trajectory", cmd_integrate}},
      {"crossings", {"level crossings of a saved trajectory", cmd_crossings}},
      {"blowup", {"finite-time blow-up with escape-time bracket", [](const Options& op, const Output& ou, std::ostream& l) { return cmd_blowup(op, ou, l); }}},
      {"nonuniq", {"decay to zero of the non-uniqueness field", cmd_nonuniq}},
      {"verify", {"check the explicit separation and growth bounds", cmd_verify}},
      {"sweep", {"blow-up race over a parametric modulus family", cmd_sweep}},
  };
  std::vector<std::pair<CLI::App*, Handler>> subs;
  for (const auto& [name, info] : table) subs.emplace_back(app.add_subcommand(name, info.first), info.second);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }

  try {
    const Output output(o.out);
    for (const auto& [sub, handler] : subs) {
      if (!sub->parsed()) continue;
      const int code = handler(o, output, out);
      write_meta(output, sub->get_name(), args);
      return code;
    }
    return kUsage;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    err << "numeric failure: " << e.what() << "\n";
    return kNumeric;
  }
}

}  // namespace osgood::cli
