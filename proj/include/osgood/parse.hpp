#pragma once

#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "osgood/field.hpp"
#include "osgood/io.hpp"
#include "osgood/modulus.hpp"

namespace osgood::parse {

/// Thrown for malformed user input; the CLI maps it to exit code 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::stringstream ss(s);
  while (std::getline(ss, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

inline double number(const std::string& s, const std::string& what) {
  try {
    return io::parse_double(s);
  } catch (const std::invalid_argument&) {
    throw UsageError("bad number for " + what + ": '" + s + "'");
  }
}

/// "a:b" -> (a, b).
inline std::pair<double, double> range(const std::string& s, const std::string& what) {
  const auto parts = split(s, ':');
  if (parts.size() != 2) throw UsageError(what + " must look like a:b, got '" + s + "'");
  return {number(parts[0], what), number(parts[1], what)};
}

/// Two-column table "t,phi" (or whitespace separated); '#' starts a comment.
inline std::vector<std::pair<double, double>> read_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open modulus table '" + path + "'");
  std::vector<std::pair<double, double>> pts;
  std::string line;
  while (std::getline(in, line)) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    for (char& c : line) {
      if (c == ',' || c == '\t') c = ' ';
    }
    std::stringstream ss(line);
    std::string a, b;
    if (!(ss >> a)) continue;
    if (!(ss >> b)) throw UsageError("modulus table row needs two columns: '" + line + "'");
    pts.emplace_back(number(a, "table t"), number(b, "table phi"));
  }
  return pts;
}

inline SeriesTag tag_from(const std::string& s) {
  if (s == "divergent" || s == "KnownDivergent") return SeriesTag::KnownDivergent;
  if (s == "convergent" || s == "KnownConvergent") return SeriesTag::KnownConvergent;
  if (s == "none" || s == "untagged" || s == "Untagged") return SeriesTag::Untagged;
  throw UsageError("unknown series tag '" + s + "'");
}

/// `family=<name>[,k=v...]` or `table=<path>[,tag=...]`.
///
/// Parameter keys: L (constant), p (power); `tag` overrides the series tag.
inline Modulus modulus(const std::string& spec) {
  std::map<std::string, std::string> kv;
  for (const auto& item : split(spec, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw UsageError("modulus spec item '" + item + "' is not key=value");
    kv[item.substr(0, eq)] = item.substr(eq + 1);
  }
  std::optional<Modulus> m;
  try {
    if (kv.count("family") && kv.count("table")) throw UsageError("modulus spec has both family and table");
    if (auto it = kv.find("family"); it != kv.end()) {
      const std::string& name = it->second;
      double param = 1.0;
      if (name == "constant") param = kv.count("L") ? number(kv["L"], "L") : 1.0;
      if (name == "power") {
        if (!kv.count("p")) throw UsageError("family=power needs p=<exponent>");
        param = number(kv["p"], "p");
      }
      m = families::by_name(name, param);
    } else if (auto t = kv.find("table"); t != kv.end()) {
      m = families::table(read_table(t->second));
    } else {
      throw UsageError("modulus spec needs family=<name> or table=<path>");
    }
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  for (const auto& [k, v] : kv) {
    if (k != "family" && k != "table" && k != "L" && k != "p" && k != "tag") {
      throw UsageError("unknown modulus parameter '" + k + "'");
    }
  }
  if (auto t = kv.find("tag"); t != kv.end()) m = m->with_tag(tag_from(t->second));
  return *m;
}

/// A field chosen on the command line: a piecewise construction or a plain field.
struct FieldChoice {
  std::optional<PiecewiseLogLinearField> piecewise;
  ScalarField scalar;
};

/// `blowup | nonuniq | sqrt | riccati | linear:<L>`; the first two need a modulus.
inline FieldChoice field(const std::string& spec, const std::optional<Modulus>& m) {
  FieldChoice c;
  if (spec == "blowup" || spec == "nonuniq") {
    if (!m) throw UsageError("--field " + spec + " needs --modulus");
    c.piecewise = spec == "blowup" ? build_blowup_field(*m) : build_nonuniqueness_field(*m);
    c.scalar = c.piecewise->as_scalar_field();
  } else if (spec == "sqrt") {
    c.scalar = demo::sqrt_field();
  } else if (spec == "riccati") {
    c.scalar = demo::riccati_field();
  } else if (spec.rfind("linear:", 0) == 0) {
    c.scalar = demo::linear_field(number(spec.substr(7), "linear field rate"));
  } else {
    throw UsageError("unknown field '" + spec + "'");
  }
  return c;
}

}  // namespace osgood::parse
