#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace rothevi {

// Bad domain geometry or an unresolvable mesh request.
class GeometryError : public std::runtime_error {
public:
  explicit GeometryError(const std::string& msg) : std::runtime_error(msg) {}
};

// Per-step bilinear form lost coercivity (step size too large).
class CoercivityError : public std::runtime_error {
public:
  CoercivityError(const std::string& msg, long minimal_m)
      : std::runtime_error(msg), minimal_m(minimal_m) {}
  long minimal_m;
};

// Iterative solve did not converge; carries the energy trace for post-mortem.
class SolveError : public std::runtime_error {
public:
  SolveError(const std::string& msg, std::vector<double> trace)
      : std::runtime_error(msg), energy_trace(std::move(trace)) {}
  std::vector<double> energy_trace;
};

// Numerical failure outside of plain non-convergence (bad pivot, divergent
// eigen iteration, ...).
class NumericError : public std::runtime_error {
public:
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
  NumericError(const std::string& msg, std::vector<double> trace)
      : std::runtime_error(msg), iteration_trace(std::move(trace)) {}
  std::vector<double> iteration_trace;
};

struct ConfigIssue {
  int line = 0;  // 0 = no specific line
  std::string message;
};

// Aggregates every problem found in a config file, not just the first.
class ConfigError : public std::runtime_error {
public:
  explicit ConfigError(std::vector<ConfigIssue> issues)
      : std::runtime_error(join(issues)), issues(std::move(issues)) {}
  std::vector<ConfigIssue> issues;

private:
  static std::string join(const std::vector<ConfigIssue>& v) {
    std::string s;
    for (const auto& i : v) {
      if (!s.empty()) s += "\n";
      if (i.line > 0) s += "line " + std::to_string(i.line) + ": ";
      s += i.message;
    }
    return s.empty() ? std::string("invalid configuration") : s;
  }
};

}  // namespace rothevi
