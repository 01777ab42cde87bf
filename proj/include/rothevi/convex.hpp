#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <array>
#include <cassert>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "rothevi/errors.hpp"
#include "rothevi/selector.hpp"

namespace rothevi {

constexpr double kInf = std::numeric_limits<double>::infinity();

enum class JKind { Zero, AbsVal, PositivePart, Quadratic, IntervalIndicator };

inline std::string to_string(JKind k) {
  switch (k) {
    case JKind::Zero: return "zero";
    case JKind::AbsVal: return "absval";
    case JKind::PositivePart: return "positive_part";
    case JKind::Quadratic: return "quadratic";
    case JKind::IntervalIndicator: return "interval";
  }
  return "?";
}

// Catalog of admissible convex interface functionals: nonnegative, lower
// semicontinuous, j(0) = 0. The interval indicator has no quadratic growth
// bound and is excluded from the thin-layer study.
struct JSpec {
  JKind kind = JKind::Zero;
  double lambda = 1.0;  // AbsVal, PositivePart
  double c = 1.0;       // Quadratic
  double a = -1.0, b = 1.0;  // IntervalIndicator, a <= 0 <= b

  static JSpec zero() { return {}; }
  static JSpec abs_val(double lambda) {
    if (!(lambda > 0)) throw std::invalid_argument("abs_val: lambda must be > 0");
    JSpec j; j.kind = JKind::AbsVal; j.lambda = lambda; return j;
  }
  static JSpec positive_part(double lambda) {
    if (!(lambda > 0)) throw std::invalid_argument("positive_part: lambda must be > 0");
    JSpec j; j.kind = JKind::PositivePart; j.lambda = lambda; return j;
  }
  static JSpec quadratic(double c) {
    if (!(c > 0)) throw std::invalid_argument("quadratic: c must be > 0");
    JSpec j; j.kind = JKind::Quadratic; j.c = c; return j;
  }
  static JSpec interval(double a, double b) {
    if (!(a <= 0 && 0 <= b)) throw std::invalid_argument("interval: need a <= 0 <= b");
    JSpec j; j.kind = JKind::IntervalIndicator; j.a = a; j.b = b; return j;
  }

  double value(double x) const {
    switch (kind) {
      case JKind::Zero: return 0.0;
      case JKind::AbsVal: return lambda * std::abs(x);
      case JKind::PositivePart: return lambda * std::max(x, 0.0);
      case JKind::Quadratic: return c * x * x;
      case JKind::IntervalIndicator: return (x >= a && x <= b) ? 0.0 : kInf;
    }
    return 0.0;
  }

  // Unique minimizer of (1/2)(v - x)^2 + w j(v), w > 0.
  double prox(double x, double w) const {
    if (!(w > 0)) throw std::invalid_argument("prox: weight must be > 0");
    switch (kind) {
      case JKind::Zero:
        return x;
      case JKind::AbsVal: {
        double t = w * lambda;
        if (x > t) return x - t;
        if (x < -t) return x + t;
        return 0.0;
      }
      case JKind::PositivePart: {
        double t = w * lambda;
        if (x > t) return x - t;
        if (x < 0) return x;
        return 0.0;
      }
      case JKind::Quadratic:
        return x / (1.0 + 2.0 * w * c);
      case JKind::IntervalIndicator:
        return std::min(std::max(x, a), b);
    }
    return x;
  }

  // Subdifferential interval [lo, hi] at x; +-inf at the endpoints of the
  // interval indicator, (inf, -inf) marks the empty set outside [a, b].
  std::pair<double, double> subdifferential(double x) const {
    switch (kind) {
      case JKind::Zero:
        return {0.0, 0.0};
      case JKind::AbsVal:
        if (x > 0) return {lambda, lambda};
        if (x < 0) return {-lambda, -lambda};
        return {-lambda, lambda};
      case JKind::PositivePart:
        if (x > 0) return {lambda, lambda};
        if (x < 0) return {0.0, 0.0};
        return {0.0, lambda};
      case JKind::Quadratic:
        return {2 * c * x, 2 * c * x};
      case JKind::IntervalIndicator: {
        if (x < a || x > b) return {kInf, -kInf};
        double lo = (x == a) ? -kInf : 0.0;
        double hi = (x == b) ? kInf : 0.0;
        return {lo, hi};
      }
    }
    return {0.0, 0.0};
  }

  // Whether j(d) <= C(d^2 + 1) holds; required by the thin-layer study.
  bool growth_bounded() const { return kind != JKind::IntervalIndicator; }
};

inline double j_value(const JSpec& j, double x) { return j.value(x); }
inline double j_prox(const JSpec& j, double x, double w) { return j.prox(x, w); }

// E(x) = (1/2) x'Ax - b'x + sum_k w_k j(sel(x)_k)
template <typename Matrix>
double vi_energy(const Matrix& A, const Vec& b, const std::vector<double>& w,
                 const InterfaceSelector& sel, const JSpec& j, const Vec& x) {
  double e = 0.5 * x.dot(A * x) - b.dot(x);
  for (int k = 0; k < sel.size(); ++k) {
    double jv = j.value(sel.value(x, k));
    if (jv == kInf) return kInf;
    e += w[k] * jv;
  }
  return e;
}

struct SolveOptions {
  double tol = 1e-10;    // relative energy stagnation over a full sweep
  long max_sweeps = -1;  // -1: 50 * n_dofs
  const Vec* start = nullptr;
};

struct SolveInfo {
  long sweeps = 0;
  double energy = 0;
  std::vector<double> energy_trace;  // one entry per sweep
};

// Proximal nonlinear Gauss-Seidel for min E(x) with A symmetric positive
// definite and the nonsmooth part separable per interface node. Volume DOFs
// get exact 1D quadratic updates and trace-coupled DOFs an exact shifted
// prox. A jump couples two DOFs through one j term, and per-coordinate
// updates can stall where j has a kink (the two sides settle on different
// subgradients); those pairs are therefore minimized jointly by an exact
// 2x2 block solve, eliminating the smooth direction and taking a prox in
// the jump variable with the Schur-complement curvature. Units sweep in
// ascending DOF order; convergence is declared when a full sweep changes
// the energy by less than tol*(1+|E|), when a sweep is bitwise stationary,
// or when the energy sits at the floating-point noise floor for several
// consecutive sweeps.
inline Vec solve_vi(const SpMat& A, const Vec& b, const std::vector<double>& w,
                    const InterfaceSelector& sel, const JSpec& j,
                    const SolveOptions& opt = {}, SolveInfo* info = nullptr) {
  const int n = static_cast<int>(A.rows());
  if (A.cols() != n || b.size() != n)
    throw std::invalid_argument("solve_vi: dimension mismatch");
  if (static_cast<int>(w.size()) != sel.size())
    throw std::invalid_argument("solve_vi: weights/selector mismatch");
  if (!(opt.tol > 0)) throw std::invalid_argument("solve_vi: tol must be > 0");

  SpMat Ac = A;
  Ac.makeCompressed();

  Vec x = opt.start ? *opt.start : Vec::Zero(n);
  if (x.size() != n) throw std::invalid_argument("solve_vi: start size mismatch");

  struct Unit {
    int dof = -1;      // single coordinate, or the first DOF of a block
    int partner = -1;  // second block DOF (jump pairs)
    int entry = -1;    // selector entry, -1 for plain coordinates
  };
  // each DOF may enter at most one selector row, otherwise the nonsmooth
  // part is not separable per unit and the sweep would be wrong
  {
    std::vector<char> seen(n, 0);
    for (const auto& e : sel.entries) {
      for (int d : {e.dof_pos, e.dof_neg}) {
        if (d < 0) continue;
        if (d >= n || seen[d])
          throw std::invalid_argument("solve_vi: selector is not separable per DOF");
        seen[d] = 1;
      }
    }
  }

  std::vector<Unit> units;
  {
    const auto coupling = sel.dof_coupling(n);
    std::vector<char> absorbed(n, 0);
    for (int d = 0; d < n; ++d) {
      if (absorbed[d]) continue;
      const auto [k, sign] = coupling[d];
      if (k < 0) {
        units.push_back({d, -1, -1});
        continue;
      }
      const auto& e = sel.entries[k];
      if (e.dof_neg < 0) {
        units.push_back({d, -1, k});
      } else {
        int other = d == e.dof_pos ? e.dof_neg : e.dof_pos;
        absorbed[other] = 1;
        units.push_back({d, other, k});
      }
      (void)sign;
    }
  }

  const long max_sweeps = opt.max_sweeps > 0 ? opt.max_sweeps : 50L * std::max(n, 1);
  const double eps = std::numeric_limits<double>::epsilon();

  // q: diagonal entry, r: b minus the off-unit residual contribution
  auto gather = [&](int d, int skip, double& q, double& r) {
    q = 0;
    double off = 0;
    for (SpMat::InnerIterator it(Ac, d); it; ++it) {
      const int row = static_cast<int>(it.row());
      if (row == d)
        q = it.value();
      else if (row != skip)
        off += it.value() * x[row];
    }
    if (!(q > 0))
      throw NumericError("solve_vi: nonpositive diagonal pivot at DOF " + std::to_string(d));
    r = b[d] - off;
  };

  auto block_coupling = [&](int d, int partner) {
    for (SpMat::InnerIterator it(Ac, d); it; ++it)
      if (static_cast<int>(it.row()) == partner) return it.value();
    return 0.0;
  };

  std::vector<double> trace;
  double energy = vi_energy(Ac, b, w, sel, j, x);
  long sweep = 0;
  bool converged = (n == 0);
  int floor_sweeps = 0;

  for (; sweep < max_sweeps && !converged; ++sweep) {
    bool any_change = false;
    double max_move = 0.0;
    auto assign = [&](int d, double y) {
      if (y != x[d]) {
        max_move = std::max(max_move, std::abs(y - x[d]) / (1.0 + std::abs(y)));
        x[d] = y;
        any_change = true;
      }
    };
    for (const Unit& u : units) {
      if (u.entry < 0) {  // plain quadratic coordinate
        double q, r;
        gather(u.dof, -1, q, r);
#ifndef NDEBUG
        {  // unit-local energy must not increase
          auto local = [&](double y) { return 0.5 * q * y * y - r * y; };
          assert(local(r / q) <= local(x[u.dof]) + 1e-12 * (1.0 + std::abs(local(x[u.dof]))));
        }
#endif
        assign(u.dof, r / q);
      } else if (u.partner < 0) {  // trace-coupled coordinate: shifted prox
        double q, r;
        gather(u.dof, -1, q, r);
        double y_new = j.prox(r / q, w[u.entry] / q);
#ifndef NDEBUG
        {
          auto local = [&](double y) {
            return 0.5 * q * y * y - r * y + w[u.entry] * j.value(y);
          };
          double before = local(x[u.dof]);
          assert(!(std::isfinite(before) &&
                   local(y_new) > before + 1e-12 * (1.0 + std::abs(before))));
        }
#endif
        assign(u.dof, y_new);
      } else {
        // jump block: unknowns (u1, u2) with s = u2 - u1; minimize
        // (1/2)[u1 u2] Q [u1 u2]' - [r1 r2][u1 u2]' + w j(s) exactly by
        // eliminating t = u1 + u2 and taking a prox in s.
        const auto& e = sel.entries[u.entry];
        const int d1 = e.dof_neg, d2 = e.dof_pos;
        double q1, r1, q2, r2;
        gather(d1, d2, q1, r1);
        gather(d2, d1, q2, r2);
        const double c = block_coupling(d1, d2);
        const double p = 0.25 * (q1 + q2 + 2.0 * c);        // curvature in t
        const double qc = 0.25 * (q2 - q1);                 // t-s cross term
        const double rr = 0.25 * (q1 + q2 - 2.0 * c);       // curvature in s
        const double beta = 0.5 * (r1 + r2);
        const double gamma = 0.5 * (r2 - r1);
        if (!(p > 0))
          throw NumericError("solve_vi: jump block lost positive definiteness");
        const double q_eff = rr - qc * qc / p;  // Schur complement, > 0 for SPD A
        if (!(q_eff > 0))
          throw NumericError("solve_vi: jump block lost positive definiteness");
        const double r_eff = gamma - qc * beta / p;
        const double s = j.prox(r_eff / q_eff, w[u.entry] / q_eff);
        const double t = (beta - qc * s) / p;
#ifndef NDEBUG
        {
          auto local = [&](double v1, double v2) {
            return 0.5 * (q1 * v1 * v1 + 2.0 * c * v1 * v2 + q2 * v2 * v2) - r1 * v1 -
                   r2 * v2 + w[u.entry] * j.value(v2 - v1);
          };
          double before = local(x[d1], x[d2]);
          assert(!(std::isfinite(before) && local(0.5 * (t - s), 0.5 * (t + s)) >
                                                before + 1e-12 * (1.0 + std::abs(before))));
        }
#endif
        assign(d1, 0.5 * (t - s));
        assign(d2, 0.5 * (t + s));
      }
    }

    double e_new = vi_energy(Ac, b, w, sel, j, x);
    trace.push_back(e_new);
#ifndef NDEBUG
    assert(!(std::isfinite(energy) && std::isfinite(e_new) &&
             e_new > energy + 1e-10 * (1.0 + std::abs(energy))));
#endif
    if (!any_change) {
      converged = true;  // bitwise stationary sweep
    } else if (opt.tol > 1e-16 && std::isfinite(energy) && std::isfinite(e_new) &&
               std::abs(energy - e_new) < opt.tol * (1.0 + std::abs(e_new))) {
      converged = true;
    } else {
      // tolerances below double resolution request the exact fixed point;
      // treat sweeps whose largest relative move sits at machine epsilon as
      // stationary up to last-bit dither
      floor_sweeps = max_move <= 8.0 * eps ? floor_sweeps + 1 : 0;
      if (floor_sweeps >= 3) converged = true;
    }
    energy = e_new;
  }

  if (!converged)
    throw SolveError("solve_vi: no convergence within " + std::to_string(max_sweeps) + " sweeps",
                     std::move(trace));
  if (info) {
    info->sweeps = sweep;
    info->energy = energy;
    info->energy_trace = std::move(trace);
  }
  return x;
}

// Independent oracle: coarse-to-fine grid search of the same energy, usable
// for systems with at most 3 DOFs. The final pass resolves grid_step.
inline Vec brute_force_vi(const Eigen::MatrixXd& A, const Vec& b,
                          const std::vector<double>& w, const InterfaceSelector& sel,
                          const JSpec& j, double grid_range, double grid_step) {
  const int n = static_cast<int>(A.rows());
  if (n > 3)
    throw std::invalid_argument("brute_force_vi: unsupported size (> 3 DOFs)");
  if (!(grid_range > 0) || !(grid_step > 0) || grid_step > grid_range)
    throw std::invalid_argument("brute_force_vi: bad grid parameters");

  const int half = 16;  // 33 points per dimension per stage
  Vec center = Vec::Zero(n);
  double step = grid_range / half;

  auto scan = [&](double s) {
    Vec best = center;
    double best_e = kInf;
    std::array<int, 3> idx{};
    Vec p(n);
    auto eval = [&]() {
      for (int d = 0; d < n; ++d) p[d] = center[d] + idx[d] * s;
      double e = vi_energy(A, b, w, sel, j, p);
      if (e < best_e) { best_e = e; best = p; }
    };
    for (idx[0] = -half; idx[0] <= half; ++idx[0]) {
      if (n == 1) { eval(); continue; }
      for (idx[1] = -half; idx[1] <= half; ++idx[1]) {
        if (n == 2) { eval(); continue; }
        for (idx[2] = -half; idx[2] <= half; ++idx[2]) eval();
      }
    }
    if (best_e == kInf)
      throw NumericError("brute_force_vi: no finite energy on the grid");
    return best;
  };

  while (true) {
    center = scan(step);
    if (step <= grid_step * (1.0 + 1e-12)) break;
    step = std::max(step / 4.0, grid_step);
  }
  return center;
}

}  // namespace rothevi
