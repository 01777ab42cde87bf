#pragma once

#include <charconv>
#include <cstdlib>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "rothevi/csv.hpp"
#include "rothevi/errors.hpp"
#include "rothevi/problem.hpp"
#include "rothevi/stepping.hpp"

namespace rothevi {

enum class ExperimentKind { Wentzell, Signorini, MSweep, ThinLayer, Estimates, Poincare };
enum class ProblemKind { Wentzell, Signorini };

inline std::string to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::Wentzell: return "wentzell";
    case ExperimentKind::Signorini: return "signorini";
    case ExperimentKind::MSweep: return "msweep";
    case ExperimentKind::ThinLayer: return "thinlayer";
    case ExperimentKind::Estimates: return "estimates";
    case ExperimentKind::Poincare: return "poincare";
  }
  return "?";
}

// Validated run description; mirrors the line-oriented `key = value` file
// format with [section] headers.
struct RunConfig {
  // [domain]
  Geometry geometry = Geometry::Strip;
  long n = 8;              // inclusion resolution
  long nx1 = 4, nx2 = 4, ny = 4;  // strip resolution
  // [coefficients]
  double sigma1 = 1.0, sigma2 = 1.0, alpha = 1.0, beta = 0.0;
  // [j]
  JKind j_kind = JKind::Zero;
  double j_lambda = 1.0, j_c = 1.0, j_a = -1.0, j_b = 1.0;
  // [time]
  double T = 1.0;
  long m = 8;
  // [source]
  SourceKind f_kind = SourceKind::Zero;
  double f_amplitude = 1.0;
  SourceKind g_kind = SourceKind::Zero;
  double g_amplitude = 1.0;
  // [initial]
  InitKind S_kind = InitKind::Zero;
  double S_amplitude = 1.0;
  // [solver]
  double tol = 1e-10;
  long max_sweeps = -1;
  // [experiment]
  ExperimentKind kind = ExperimentKind::Wentzell;
  ProblemKind problem = ProblemKind::Wentzell;
  std::vector<long> m_list{8, 16, 32, 64};
  long m_ref = 0;  // 0: pick 8 * max(m_list)
  std::vector<double> eps_list{0.25, 0.125, 0.0625};
  double gamma = 0.5;
  std::vector<long> n_list{8, 16, 32};
  // [output]
  std::string out_dir = "out";
  bool dump_mesh = false;

  bool operator==(const RunConfig&) const = default;

  JSpec jspec() const {
    switch (j_kind) {
      case JKind::Zero: return JSpec::zero();
      case JKind::AbsVal: return JSpec::abs_val(j_lambda);
      case JKind::PositivePart: return JSpec::positive_part(j_lambda);
      case JKind::Quadratic: return JSpec::quadratic(j_c);
      case JKind::IntervalIndicator: return JSpec::interval(j_a, j_b);
    }
    return JSpec::zero();
  }

  DataSpec data_spec() const {
    DataSpec d;
    d.sigma1 = sigma1;
    d.sigma2 = sigma2;
    d.alpha = alpha;
    d.beta = beta;
    d.j = jspec();
    d.f_kind = f_kind;
    d.f_amplitude = f_amplitude;
    d.g_kind = g_kind;
    d.g_amplitude = g_amplitude;
    d.S_kind = S_kind;
    d.S_amplitude = S_amplitude;
    d.T = T;
    d.m = static_cast<int>(m);
    d.tol = tol;
    d.max_sweeps = max_sweeps;
    return d;
  }

  BidomainMesh build_mesh() const {
    return geometry == Geometry::Strip
               ? build_strip_mesh(static_cast<int>(nx1), static_cast<int>(nx2),
                                  static_cast<int>(ny))
               : build_inclusion_mesh(static_cast<int>(n));
  }
};

namespace detail {

struct ConfigParser {
  std::vector<ConfigIssue> issues;
  std::map<std::string, int> key_line;  // "section.key" -> line

  void fail(int line, const std::string& msg) { issues.push_back({line, msg}); }
  int line_of(const std::string& key) const {
    auto it = key_line.find(key);
    return it == key_line.end() ? 0 : it->second;
  }

  static std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
  }

  bool parse_double(int line, const std::string& key, const std::string& v, double& out) {
    const char* b = v.c_str();
    char* e = nullptr;
    double x = std::strtod(b, &e);
    if (e == b || *e != '\0') {
      fail(line, key + ": expected a number, got '" + v + "'");
      return false;
    }
    out = x;
    return true;
  }

  bool parse_long(int line, const std::string& key, const std::string& v, long& out) {
    long x = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
    if (ec != std::errc() || p != v.data() + v.size()) {
      fail(line, key + ": expected an integer, got '" + v + "'");
      return false;
    }
    out = x;
    return true;
  }

  bool parse_bool(int line, const std::string& key, const std::string& v, bool& out) {
    if (v == "true" || v == "1") { out = true; return true; }
    if (v == "false" || v == "0") { out = false; return true; }
    fail(line, key + ": expected true/false, got '" + v + "'");
    return false;
  }

  template <typename T, typename Parse>
  void parse_list(int line, const std::string& key, const std::string& v, std::vector<T>& out,
                  Parse parse_one) {
    std::vector<T> result;
    std::stringstream ss(v);
    std::string item;
    bool ok = true;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      T x{};
      if (!parse_one(line, key, item, x)) { ok = false; break; }
      result.push_back(x);
    }
    if (ok && result.empty()) fail(line, key + ": empty list");
    if (ok && !result.empty()) out = result;
  }
};

}  // namespace detail

inline RunConfig parse_config(const std::string& text) {
  RunConfig cfg;
  detail::ConfigParser p;
  std::string section;
  bool have_kind = false;

  std::stringstream ss(text);
  std::string raw;
  int line = 0;
  while (std::getline(ss, raw)) {
    ++line;
    std::string s = detail::ConfigParser::trim(raw);
    if (s.empty() || s[0] == '#') continue;
    if (s.front() == '[') {
      if (s.back() != ']') {
        p.fail(line, "malformed section header '" + s + "'");
        continue;
      }
      section = s.substr(1, s.size() - 2);
      static const char* known[] = {"domain", "coefficients", "j", "time", "source",
                                    "initial", "solver", "experiment", "output"};
      bool ok = false;
      for (const char* k : known) ok = ok || section == k;
      if (!ok) p.fail(line, "unknown section [" + section + "]");
      continue;
    }
    std::size_t eq = s.find('=');
    if (eq == std::string::npos) {
      p.fail(line, "expected 'key = value', got '" + s + "'");
      continue;
    }
    std::string key = detail::ConfigParser::trim(s.substr(0, eq));
    std::string val = detail::ConfigParser::trim(s.substr(eq + 1));
    if (key.empty() || val.empty()) {
      p.fail(line, "expected 'key = value', got '" + s + "'");
      continue;
    }
    p.key_line[section + "." + key] = line;

    auto unknown = [&] { p.fail(line, "unknown key '" + key + "' in [" + section + "]"); };

    if (section == "domain") {
      if (key == "geometry") {
        if (val == "strip") cfg.geometry = Geometry::Strip;
        else if (val == "inclusion") cfg.geometry = Geometry::Inclusion;
        else p.fail(line, "geometry: expected strip|inclusion, got '" + val + "'");
      } else if (key == "n") p.parse_long(line, key, val, cfg.n);
      else if (key == "nx1") p.parse_long(line, key, val, cfg.nx1);
      else if (key == "nx2") p.parse_long(line, key, val, cfg.nx2);
      else if (key == "ny") p.parse_long(line, key, val, cfg.ny);
      else unknown();
    } else if (section == "coefficients") {
      if (key == "sigma1") p.parse_double(line, key, val, cfg.sigma1);
      else if (key == "sigma2") p.parse_double(line, key, val, cfg.sigma2);
      else if (key == "alpha") p.parse_double(line, key, val, cfg.alpha);
      else if (key == "beta") p.parse_double(line, key, val, cfg.beta);
      else unknown();
    } else if (section == "j") {
      if (key == "kind") {
        if (val == "zero") cfg.j_kind = JKind::Zero;
        else if (val == "absval") cfg.j_kind = JKind::AbsVal;
        else if (val == "positive_part") cfg.j_kind = JKind::PositivePart;
        else if (val == "quadratic") cfg.j_kind = JKind::Quadratic;
        else if (val == "interval") cfg.j_kind = JKind::IntervalIndicator;
        else p.fail(line, "j kind: expected zero|absval|positive_part|quadratic|interval");
      } else if (key == "lambda") p.parse_double(line, key, val, cfg.j_lambda);
      else if (key == "c") p.parse_double(line, key, val, cfg.j_c);
      else if (key == "a") p.parse_double(line, key, val, cfg.j_a);
      else if (key == "b") p.parse_double(line, key, val, cfg.j_b);
      else unknown();
    } else if (section == "time") {
      if (key == "T") p.parse_double(line, key, val, cfg.T);
      else if (key == "m") p.parse_long(line, key, val, cfg.m);
      else unknown();
    } else if (section == "source") {
      auto parse_kind = [&](SourceKind& out, bool allow_sinxy) {
        if (val == "zero") out = SourceKind::Zero;
        else if (val == "constant") out = SourceKind::Constant;
        else if (val == "linear_t") out = SourceKind::LinearT;
        else if (val == "sinxy" && allow_sinxy) out = SourceKind::SinXY;
        else
          p.fail(line, key + ": expected zero|constant|linear_t" +
                           (allow_sinxy ? "|sinxy" : "") + ", got '" + val + "'");
      };
      if (key == "f_kind") parse_kind(cfg.f_kind, true);
      else if (key == "f_amplitude") p.parse_double(line, key, val, cfg.f_amplitude);
      else if (key == "g_kind") parse_kind(cfg.g_kind, false);
      else if (key == "g_amplitude") p.parse_double(line, key, val, cfg.g_amplitude);
      else unknown();
    } else if (section == "initial") {
      if (key == "S_kind") {
        if (val == "zero") cfg.S_kind = InitKind::Zero;
        else if (val == "constant") cfg.S_kind = InitKind::Constant;
        else if (val == "sin_profile") cfg.S_kind = InitKind::SinProfile;
        else p.fail(line, "S_kind: expected zero|constant|sin_profile, got '" + val + "'");
      } else if (key == "S_amplitude") p.parse_double(line, key, val, cfg.S_amplitude);
      else unknown();
    } else if (section == "solver") {
      if (key == "tol") p.parse_double(line, key, val, cfg.tol);
      else if (key == "max_sweeps") p.parse_long(line, key, val, cfg.max_sweeps);
      else unknown();
    } else if (section == "experiment") {
      if (key == "kind") {
        have_kind = true;
        if (val == "wentzell") cfg.kind = ExperimentKind::Wentzell;
        else if (val == "signorini") cfg.kind = ExperimentKind::Signorini;
        else if (val == "msweep") cfg.kind = ExperimentKind::MSweep;
        else if (val == "thinlayer") cfg.kind = ExperimentKind::ThinLayer;
        else if (val == "estimates") cfg.kind = ExperimentKind::Estimates;
        else if (val == "poincare") cfg.kind = ExperimentKind::Poincare;
        else {
          have_kind = false;
          p.fail(line,
                 "kind: expected wentzell|signorini|msweep|thinlayer|estimates|poincare");
        }
      } else if (key == "problem") {
        if (val == "wentzell") cfg.problem = ProblemKind::Wentzell;
        else if (val == "signorini") cfg.problem = ProblemKind::Signorini;
        else p.fail(line, "problem: expected wentzell|signorini, got '" + val + "'");
      } else if (key == "m_list")
        p.parse_list<long>(line, key, val, cfg.m_list,
                           [&](int l, const std::string& k, const std::string& v, long& o) {
                             return p.parse_long(l, k, v, o);
                           });
      else if (key == "m_ref") p.parse_long(line, key, val, cfg.m_ref);
      else if (key == "eps_list")
        p.parse_list<double>(line, key, val, cfg.eps_list,
                             [&](int l, const std::string& k, const std::string& v, double& o) {
                               return p.parse_double(l, k, v, o);
                             });
      else if (key == "gamma") p.parse_double(line, key, val, cfg.gamma);
      else if (key == "n_list")
        p.parse_list<long>(line, key, val, cfg.n_list,
                           [&](int l, const std::string& k, const std::string& v, long& o) {
                             return p.parse_long(l, k, v, o);
                           });
      else unknown();
    } else if (section == "output") {
      if (key == "dir") cfg.out_dir = val;
      else if (key == "dump_mesh") p.parse_bool(line, key, val, cfg.dump_mesh);
      else unknown();
    } else {
      p.fail(line, "key '" + key + "' outside of any known section");
    }
  }

  // Constraint validation, attributed to the offending line where possible.
  auto check = [&](bool ok, const std::string& key, const std::string& msg) {
    if (!ok) p.fail(p.line_of(key), msg);
  };

  if (!have_kind) p.fail(0, "missing required key 'kind' in [experiment]");
  check(cfg.sigma1 > 0, "coefficients.sigma1", "sigma1 must be > 0 (uniform ellipticity bound)");
  check(cfg.sigma2 > 0, "coefficients.sigma2", "sigma2 must be > 0 (uniform ellipticity bound)");
  check(cfg.alpha > 0, "coefficients.alpha", "alpha must be > 0 (interface capacity bound)");
  check(cfg.beta >= 0, "coefficients.beta", "beta must be >= 0");
  check(cfg.T > 0, "time.T", "T must be > 0");
  check(cfg.m >= 1, "time.m", "m must be >= 1");
  check(cfg.tol > 0, "solver.tol", "tol must be > 0");
  if (cfg.j_kind == JKind::AbsVal || cfg.j_kind == JKind::PositivePart)
    check(cfg.j_lambda > 0, "j.lambda", "lambda must be > 0");
  if (cfg.j_kind == JKind::Quadratic) check(cfg.j_c > 0, "j.c", "c must be > 0");
  if (cfg.j_kind == JKind::IntervalIndicator)
    check(cfg.j_a <= 0 && 0 <= cfg.j_b, "j.a", "interval must satisfy a <= 0 <= b");

  if (cfg.geometry == Geometry::Inclusion)
    check(cfg.n >= 4 && cfg.n % 4 == 0, "domain.n", "n must be a positive multiple of 4");
  else {
    check(cfg.nx1 >= 1, "domain.nx1", "nx1 must be >= 1");
    check(cfg.nx2 >= 1, "domain.nx2", "nx2 must be >= 1");
    check(cfg.ny >= 1, "domain.ny", "ny must be >= 1");
  }

  const bool signorini_run =
      cfg.kind == ExperimentKind::Signorini ||
      ((cfg.kind == ExperimentKind::MSweep || cfg.kind == ExperimentKind::Estimates) &&
       cfg.problem == ProblemKind::Signorini);
  if (signorini_run && cfg.sigma1 > 0 && cfg.sigma2 > 0 && cfg.alpha > 0 && cfg.T > 0) {
    long min_m = signorini_min_steps(std::min(cfg.sigma1, cfg.sigma2), cfg.alpha, cfg.T);
    if (cfg.kind == ExperimentKind::Signorini)
      check(cfg.m >= min_m, "time.m",
            "bilateral scheme loses coercivity: need m >= " + std::to_string(min_m));
    else
      for (long mm : cfg.m_list)
        check(mm >= min_m, "experiment.m_list",
              "bilateral scheme loses coercivity: every m must be >= " + std::to_string(min_m));
    check(cfg.beta == 0, "coefficients.beta", "the bilateral problem has no beta term");
  }
  if (cfg.kind == ExperimentKind::ThinLayer) {
    check(cfg.beta == 0, "coefficients.beta", "the thin-layer study requires beta = 0");
    check(cfg.j_kind != JKind::IntervalIndicator, "j.kind",
          "interval indicator is ineligible for the thin-layer study");
    check(cfg.gamma > 0, "experiment.gamma", "gamma must be > 0");
    check(cfg.geometry == Geometry::Inclusion, "domain.geometry",
          "the thin-layer study runs on the inclusion geometry");
    for (std::size_t i = 1; i < cfg.eps_list.size(); ++i)
      check(cfg.eps_list[i] < cfg.eps_list[i - 1], "experiment.eps_list",
            "eps_list must be strictly decreasing");
    for (double e : cfg.eps_list)
      check(e > 0, "experiment.eps_list", "eps values must be > 0");
  }
  if (cfg.kind == ExperimentKind::MSweep || cfg.kind == ExperimentKind::Estimates) {
    for (long mm : cfg.m_list)
      check(mm >= 1, "experiment.m_list", "m_list entries must be >= 1");
    check(cfg.m_ref >= 0, "experiment.m_ref", "m_ref must be >= 0 (0 = automatic)");
  }
  if (cfg.kind == ExperimentKind::Poincare) {
    for (long nn : cfg.n_list)
      check(nn >= 4 && nn % 4 == 0, "experiment.n_list",
            "n_list entries must be positive multiples of 4");
  }

  if (!p.issues.empty()) throw ConfigError(std::move(p.issues));
  return cfg;
}

inline std::string print_config(const RunConfig& c) {
  std::ostringstream o;
  auto d = [](double x) { return format_double(x); };
  o << "[domain]\n";
  o << "geometry = " << (c.geometry == Geometry::Strip ? "strip" : "inclusion") << "\n";
  o << "n = " << c.n << "\nnx1 = " << c.nx1 << "\nnx2 = " << c.nx2 << "\nny = " << c.ny << "\n";
  o << "\n[coefficients]\n";
  o << "sigma1 = " << d(c.sigma1) << "\nsigma2 = " << d(c.sigma2) << "\nalpha = " << d(c.alpha)
    << "\nbeta = " << d(c.beta) << "\n";
  o << "\n[j]\n";
  o << "kind = " << to_string(c.j_kind) << "\nlambda = " << d(c.j_lambda) << "\nc = " << d(c.j_c)
    << "\na = " << d(c.j_a) << "\nb = " << d(c.j_b) << "\n";
  o << "\n[time]\nT = " << d(c.T) << "\nm = " << c.m << "\n";
  auto src = [](SourceKind k) {
    switch (k) {
      case SourceKind::Zero: return "zero";
      case SourceKind::Constant: return "constant";
      case SourceKind::LinearT: return "linear_t";
      case SourceKind::SinXY: return "sinxy";
    }
    return "?";
  };
  o << "\n[source]\n";
  o << "f_kind = " << src(c.f_kind) << "\nf_amplitude = " << d(c.f_amplitude) << "\n";
  o << "g_kind = " << src(c.g_kind) << "\ng_amplitude = " << d(c.g_amplitude) << "\n";
  o << "\n[initial]\n";
  o << "S_kind = "
    << (c.S_kind == InitKind::Zero ? "zero"
                                   : c.S_kind == InitKind::Constant ? "constant" : "sin_profile")
    << "\nS_amplitude = " << d(c.S_amplitude) << "\n";
  o << "\n[solver]\ntol = " << d(c.tol) << "\nmax_sweeps = " << c.max_sweeps << "\n";
  o << "\n[experiment]\n";
  o << "kind = " << to_string(c.kind) << "\n";
  o << "problem = " << (c.problem == ProblemKind::Wentzell ? "wentzell" : "signorini") << "\n";
  o << "m_list = ";
  for (std::size_t i = 0; i < c.m_list.size(); ++i) o << (i ? "," : "") << c.m_list[i];
  o << "\nm_ref = " << c.m_ref << "\neps_list = ";
  for (std::size_t i = 0; i < c.eps_list.size(); ++i) o << (i ? "," : "") << d(c.eps_list[i]);
  o << "\ngamma = " << d(c.gamma) << "\nn_list = ";
  for (std::size_t i = 0; i < c.n_list.size(); ++i) o << (i ? "," : "") << c.n_list[i];
  o << "\n\n[output]\ndir = " << c.out_dir << "\ndump_mesh = " << (c.dump_mesh ? "true" : "false")
    << "\n";
  return o.str();
}

}  // namespace rothevi
