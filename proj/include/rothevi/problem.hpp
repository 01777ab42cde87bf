#pragma once

#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <vector>

#include "rothevi/convex.hpp"
#include "rothevi/fem.hpp"

namespace rothevi {

// Piecewise-linear-in-time samples of a space-dependent field. Linear
// interpolation between samples; evaluation outside [t_first, t_last] is a
// range error. Lipschitz constants of the data are max difference quotients
// of the samples.
struct TimeSamples {
  std::vector<double> times;
  std::vector<Vec> values;

  static TimeSamples zero(Eigen::Index dim, double T) {
    TimeSamples s;
    s.times = {0.0, T};
    s.values = {Vec::Zero(dim), Vec::Zero(dim)};
    return s;
  }

  bool empty() const { return times.empty(); }

  void check() const {
    if (times.size() < 2 || times.size() != values.size())
      throw std::invalid_argument("TimeSamples: need >= 2 aligned samples");
    for (std::size_t i = 1; i < times.size(); ++i) {
      if (!(times[i] > times[i - 1]))
        throw std::invalid_argument("TimeSamples: times must be strictly increasing");
      if (values[i].size() != values[0].size())
        throw std::invalid_argument("TimeSamples: inconsistent sample dimensions");
    }
  }

  Vec at(double t) const {
    const double t0 = times.front(), t1 = times.back();
    const double slack = 1e-12 * (1.0 + std::abs(t1));
    if (t < t0 - slack || t > t1 + slack)
      throw std::out_of_range("TimeSamples: t outside the sampled interval");
    t = std::min(std::max(t, t0), t1);
    std::size_t hi = std::lower_bound(times.begin(), times.end(), t) - times.begin();
    if (hi == 0) hi = 1;
    if (hi >= times.size()) hi = times.size() - 1;
    const std::size_t lo = hi - 1;
    const double w = (t - times[lo]) / (times[hi] - times[lo]);
    return (1.0 - w) * values[lo] + w * values[hi];
  }

  bool is_zero() const {
    for (const auto& v : values)
      if (v.size() > 0 && v.cwiseAbs().maxCoeff() > 0) return false;
    return true;
  }
};

// Full data set of one evolution problem on a fixed mesh/DOF map.
struct ProblemData {
  double sigma1 = 1.0, sigma2 = 1.0;  // conductivities, > 0
  double alpha = 1.0;                 // interface capacity, > 0
  double beta = 0.0;                  // surface diffusion, >= 0, continuous mode only
  JSpec j = JSpec::zero();
  TimeSamples f;  // per-node volumetric source samples
  TimeSamples g;  // per-interface-node flux samples (bilateral problems)
  Vec S;          // initial trace/jump per interface node
  Vec u0;         // initial DOF vector; trace/jump on the interface equals S
  double T = 1.0;
  int m = 8;
  double tol = 1e-10;
  long max_sweeps = -1;

  double sigma_min() const { return std::min(sigma1, sigma2); }
  double sigma_max() const { return std::max(sigma1, sigma2); }
  double h() const { return T / m; }

  void validate(const BidomainMesh& mesh, const DofMap& dm) const {
    if (!(sigma1 > 0) || !(sigma2 > 0)) throw std::invalid_argument("sigma must be > 0");
    if (!(alpha > 0)) throw std::invalid_argument("alpha must be > 0");
    if (beta < 0) throw std::invalid_argument("beta must be >= 0");
    if (beta > 0 && dm.mode != DofMode::Continuous)
      throw std::invalid_argument("beta > 0 requires the continuous (Wentzell) problem");
    if (!(T > 0)) throw std::invalid_argument("T must be > 0");
    if (m < 1) throw std::invalid_argument("m must be >= 1");
    f.check();
    if (f.values[0].size() != mesh.n_nodes())
      throw std::invalid_argument("f samples must be per mesh node");
    const Eigen::Index n_iface = static_cast<Eigen::Index>(dm.interface_dofs.size());
    if (dm.mode == DofMode::Bilateral) {
      g.check();
      if (g.values[0].size() != n_iface)
        throw std::invalid_argument("g samples must be per interface node");
    }
    if (S.size() != n_iface) throw std::invalid_argument("S must be per interface node");
    if (u0.size() != dm.n_dofs) throw std::invalid_argument("u0 must be a DOF vector");
    if (j.kind == JKind::IntervalIndicator)
      for (Eigen::Index k = 0; k < S.size(); ++k)
        if (S[k] < j.a || S[k] > j.b)
          throw std::invalid_argument("initial interface datum violates the indicator interval");
    // the initial trace/jump must reproduce S
    InterfaceMass im = assemble_interface_mass(mesh, dm, alpha);
    for (int k = 0; k < im.selector.size(); ++k)
      if (std::abs(im.selector.value(u0, k) - S[k]) > 1e-12 * (1.0 + std::abs(S[k])))
        throw std::invalid_argument("trace/jump of u0 does not match S on the interface");
  }
};

// Solve K u = 0 with a set of pinned DOFs (value constraints); the free
// block of K must be symmetric positive definite.
inline Vec solve_with_pinned(const SpMat& K,
                             const std::vector<std::pair<int, double>>& pinned) {
  const int n = static_cast<int>(K.rows());
  std::vector<double> pin_val(n, 0.0);
  std::vector<char> is_pinned(n, 0);
  for (const auto& [d, v] : pinned) {
    is_pinned[d] = 1;
    pin_val[d] = v;
  }
  std::vector<int> to_free(n, -1);
  int nf = 0;
  for (int d = 0; d < n; ++d)
    if (!is_pinned[d]) to_free[d] = nf++;

  std::vector<Eigen::Triplet<double>> trip;
  Vec rhs = Vec::Zero(nf);
  for (int col = 0; col < K.outerSize(); ++col)
    for (SpMat::InnerIterator it(K, col); it; ++it) {
      int r = static_cast<int>(it.row()), c = col;
      if (!is_pinned[r] && !is_pinned[c])
        trip.emplace_back(to_free[r], to_free[c], it.value());
      else if (!is_pinned[r] && is_pinned[c])
        rhs[to_free[r]] -= it.value() * pin_val[c];
    }
  SpMat Kff(nf, nf);
  Kff.setFromTriplets(trip.begin(), trip.end());
  Eigen::SimplicialLDLT<SpMat> ldlt(Kff);
  if (ldlt.info() != Eigen::Success)
    throw NumericError("solve_with_pinned: factorization failed");
  Vec uf = ldlt.solve(rhs);

  Vec u(n);
  for (int d = 0; d < n; ++d) u[d] = is_pinned[d] ? pin_val[d] : uf[to_free[d]];
  return u;
}

// Discrete harmonic lift of interface data: trace pinned to S in Continuous
// mode, side-1 pinned to zero and side-2 to S in Bilateral mode (the jump is
// then exactly S), Laplace-harmonic away from the interface.
inline Vec lift_interface_datum(const BidomainMesh& mesh, const DofMap& dm, const Vec& S) {
  if (S.size() != static_cast<Eigen::Index>(dm.interface_dofs.size()))
    throw std::invalid_argument("lift_interface_datum: S size mismatch");
  SpMat K = assemble_stiffness(mesh, dm, 1.0, 1.0);
  std::vector<std::pair<int, double>> pinned;
  for (std::size_t k = 0; k < dm.interface_dofs.size(); ++k) {
    const auto& r = dm.interface_dofs[k];
    if (dm.mode == DofMode::Bilateral) {
      pinned.emplace_back(r.dof1, 0.0);
      pinned.emplace_back(r.dof2, S[k]);
    } else {
      pinned.emplace_back(r.dof1, S[k]);
    }
  }
  return solve_with_pinned(K, pinned);
}

// ---- mesh-independent data catalog ------------------------------------

enum class SourceKind { Zero, Constant, LinearT, SinXY };
enum class InitKind { Zero, Constant, SinProfile };

// Mesh-independent description of an experiment's data; instantiate() turns
// it into concrete nodal samples on a given mesh.
struct DataSpec {
  double sigma1 = 1.0, sigma2 = 1.0, alpha = 1.0, beta = 0.0;
  JSpec j = JSpec::zero();
  SourceKind f_kind = SourceKind::Zero;
  double f_amplitude = 1.0;
  SourceKind g_kind = SourceKind::Zero;
  double g_amplitude = 1.0;
  InitKind S_kind = InitKind::Zero;
  double S_amplitude = 1.0;
  double T = 1.0;
  int m = 8;
  double tol = 1e-10;
  long max_sweeps = -1;

  Vec interface_profile(const BidomainMesh& mesh) const {
    std::vector<double> s = mesh.interface_arclengths();
    const double L = mesh.interface_length();
    Vec S(s.size());
    for (std::size_t k = 0; k < s.size(); ++k) {
      switch (S_kind) {
        case InitKind::Zero: S[k] = 0.0; break;
        case InitKind::Constant: S[k] = S_amplitude; break;
        case InitKind::SinProfile:
          // open chain: one arch; closed loop: one full period
          S[k] = mesh.geometry == Geometry::Inclusion
                     ? S_amplitude * std::sin(2.0 * std::numbers::pi * s[k] / L)
                     : S_amplitude * std::sin(std::numbers::pi * s[k] / L);
          break;
      }
    }
    return S;
  }

  TimeSamples volumetric_source(const BidomainMesh& mesh) const {
    const Eigen::Index n = mesh.n_nodes();
    Vec profile(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const Vec2& p = mesh.nodes[i];
      switch (f_kind) {
        case SourceKind::Zero: profile[i] = 0.0; break;
        case SourceKind::Constant:
        case SourceKind::LinearT: profile[i] = f_amplitude; break;
        case SourceKind::SinXY:
          profile[i] = f_amplitude * std::sin(std::numbers::pi * p.x) * std::sin(std::numbers::pi * p.y);
          break;
      }
    }
    TimeSamples ts;
    ts.times = {0.0, T};
    if (f_kind == SourceKind::LinearT)
      ts.values = {Vec::Zero(n), T * profile};
    else
      ts.values = {profile, profile};
    return ts;
  }

  TimeSamples interface_flux(const BidomainMesh& mesh) const {
    const Eigen::Index n = static_cast<Eigen::Index>(mesh.interface_nodes().size());
    if (g_kind == SourceKind::SinXY)
      throw std::invalid_argument("interface flux catalog has no sinxy variant");
    Vec profile = Vec::Constant(n, g_kind == SourceKind::Zero ? 0.0 : g_amplitude);
    TimeSamples ts;
    ts.times = {0.0, T};
    if (g_kind == SourceKind::LinearT)
      ts.values = {Vec::Zero(n), T * profile};
    else
      ts.values = {profile, profile};
    return ts;
  }

  ProblemData instantiate(const BidomainMesh& mesh, const DofMap& dm) const {
    ProblemData d;
    d.sigma1 = sigma1;
    d.sigma2 = sigma2;
    d.alpha = alpha;
    d.beta = beta;
    d.j = j;
    d.T = T;
    d.m = m;
    d.tol = tol;
    d.max_sweeps = max_sweeps;
    d.f = volumetric_source(mesh);
    if (dm.mode == DofMode::Bilateral) d.g = interface_flux(mesh);
    d.S = interface_profile(mesh);
    d.u0 = lift_interface_datum(mesh, dm, d.S);
    return d;
  }
};

}  // namespace rothevi
