#pragma once

#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "rothevi/problem.hpp"

namespace rothevi {

// Smallest admissible number of time steps of the bilateral scheme: the
// per-step form is coercive for h <= alpha/sigma_min, i.e. m >= sigma_min*T/alpha.
inline long signorini_min_steps(double sigma_min, double alpha, double T) {
  double v = sigma_min * T / alpha;
  return static_cast<long>(std::ceil(v - 1e-9 * std::max(1.0, std::abs(v))));
}

// One implicit step of either scheme: A u + d(sum_k w_k j(sel u)_k) ∋ rhs(u_prev, t).
// The matrix is time independent, so a driver assembles once and steps m times.
class StepOperator {
public:
  enum class Problem { Wentzell, Signorini, Perturbed };

  static StepOperator wentzell(const BidomainMesh& mesh, const DofMap& dm,
                               const ProblemData& data) {
    if (dm.mode != DofMode::Continuous)
      throw std::invalid_argument("wentzell step: continuous DOF map required");
    data.validate(mesh, dm);
    StepOperator op(mesh, dm, data, Problem::Wentzell);
    op.mass_ = assemble_interface_mass(mesh, dm, data.alpha);
    op.A_ = assemble_stiffness(mesh, dm, data.sigma1, data.sigma2);
    if (data.beta > 0) op.A_ += assemble_tangential_stiffness(mesh, dm, data.beta);
    op.A_ += (1.0 / data.h()) * op.mass_.selector.weighted_gram(dm.n_dofs, op.mass_.weights);
    op.A_.makeCompressed();
    return op;
  }

  static StepOperator signorini(const BidomainMesh& mesh, const DofMap& dm,
                                const ProblemData& data) {
    if (dm.mode != DofMode::Bilateral)
      throw std::invalid_argument("signorini step: bilateral DOF map required");
    data.validate(mesh, dm);
    const long min_m = signorini_min_steps(data.sigma_min(), data.alpha, data.T);
    if (data.m < min_m)
      throw CoercivityError(
          "signorini scheme: step size too large for coercivity; need m >= " +
              std::to_string(min_m) + " (got m = " + std::to_string(data.m) + ")",
          min_m);
    StepOperator op(mesh, dm, data, Problem::Signorini);
    op.mass_ = assemble_interface_mass(mesh, dm, data.alpha);
    op.A_ = assemble_stiffness(mesh, dm, data.sigma1, data.sigma2);
    op.A_ += (1.0 / data.h()) * op.mass_.selector.weighted_gram(dm.n_dofs, op.mass_.weights);
    op.A_.makeCompressed();
    return op;
  }

  // Perturbed (thin layer) variant: built by the layer module, which owns
  // the band bookkeeping; it passes the volume-lumped weights directly.
  static StepOperator perturbed(const BidomainMesh& mesh, const DofMap& dm,
                                const ProblemData& data, InterfaceMass layer_mass) {
    StepOperator op(mesh, dm, data, Problem::Perturbed);
    op.mass_ = std::move(layer_mass);
    op.A_ = assemble_stiffness(mesh, dm, data.sigma1, data.sigma2);
    op.A_ += (data.alpha / data.h()) *
             op.mass_.selector.weighted_gram(dm.n_dofs, op.mass_.weights);
    op.A_.makeCompressed();
    return op;
  }

  // Right-hand side of the step ending at t_next, given the previous step.
  Vec rhs(const Vec& u_prev, double t_next) const {
    Vec b = assemble_load(*mesh_, *dm_, data_->f.at(t_next),
                          problem_ == Problem::Perturbed ? LoadRegion::SkipLayer
                                                         : LoadRegion::All);
    if (problem_ == Problem::Signorini)
      b -= assemble_interface_load(*mesh_, *dm_, data_->g.at(t_next));
    const double scale =
        problem_ == Problem::Perturbed ? data_->alpha / data_->h() : 1.0 / data_->h();
    for (int k = 0; k < mass_.selector.size(); ++k)
      mass_.selector.add_transpose(b, k,
                                   scale * mass_.weights[k] * mass_.selector.value(u_prev, k));
    return b;
  }

  Vec step(const Vec& u_prev, double t_next, SolveInfo* info = nullptr) const {
    SolveOptions opt;
    opt.tol = data_->tol;
    opt.max_sweeps = data_->max_sweeps;
    opt.start = &u_prev;
    return solve_vi(A_, rhs(u_prev, t_next), mass_.weights, mass_.selector, data_->j, opt,
                    info);
  }

  const SpMat& matrix() const { return A_; }
  const InterfaceMass& interface_mass() const { return mass_; }
  const ProblemData& data() const { return *data_; }

private:
  StepOperator(const BidomainMesh& mesh, const DofMap& dm, const ProblemData& data,
               Problem p)
      : mesh_(&mesh), dm_(&dm), data_(&data), problem_(p) {}

  const BidomainMesh* mesh_;
  const DofMap* dm_;
  const ProblemData* data_;
  Problem problem_;
  SpMat A_;
  InterfaceMass mass_;
};

// Convenience single-step entry points.
inline Vec wentzell_step(const BidomainMesh& mesh, const DofMap& dm, const ProblemData& data,
                         const Vec& u_prev, double t_next) {
  return StepOperator::wentzell(mesh, dm, data).step(u_prev, t_next);
}
inline Vec signorini_step(const BidomainMesh& mesh, const DofMap& dm, const ProblemData& data,
                          const Vec& u_prev, double t_next) {
  return StepOperator::signorini(mesh, dm, data).step(u_prev, t_next);
}

// Steps u^0..u^m of one run together with the interface series (trace or
// jump per interface node) and the discrete time derivatives Z^i / U^i.
struct RotheTrajectory {
  DofMode mode = DofMode::Continuous;
  double T = 1.0;
  double h = 0.125;
  int m = 8;
  std::vector<Vec> steps;              // m+1 DOF vectors
  std::vector<Vec> interface_series;   // m+1 per-interface-node values
  std::vector<Vec> derivative_series;  // m entries: (iface^i - iface^{i-1})/h

  double time_of(int i) const { return h * i; }

  // Piecewise-linear Rothe interpolant; exact at the time nodes.
  Vec at_time(double t) const {
    if (t < -1e-12 || t > T * (1.0 + 1e-12))
      throw std::out_of_range("RotheTrajectory: t outside [0,T]");
    double s = std::min(std::max(t / h, 0.0), double(m));
    int i = std::min(static_cast<int>(s), m - 1);
    double w = s - i;
    return (1.0 - w) * steps[i] + w * steps[i + 1];
  }
};

namespace detail {

inline RotheTrajectory run_driver(const StepOperator& op, DofMode mode,
                                  const ProblemData& data) {
  RotheTrajectory tr;
  tr.mode = mode;
  tr.T = data.T;
  tr.m = data.m;
  tr.h = data.h();
  tr.steps.reserve(data.m + 1);
  tr.steps.push_back(data.u0);
  for (int i = 1; i <= data.m; ++i)
    tr.steps.push_back(op.step(tr.steps.back(), tr.h * i));
  const InterfaceSelector& sel = op.interface_mass().selector;
  tr.interface_series.reserve(tr.steps.size());
  for (const Vec& u : tr.steps) tr.interface_series.push_back(sel.apply(u));
  tr.derivative_series.reserve(data.m);
  for (int i = 1; i <= data.m; ++i)
    tr.derivative_series.push_back(
        (tr.interface_series[i] - tr.interface_series[i - 1]) / tr.h);
  return tr;
}

}  // namespace detail

inline RotheTrajectory run_wentzell(const BidomainMesh& mesh, const DofMap& dm,
                                    const ProblemData& data) {
  return detail::run_driver(StepOperator::wentzell(mesh, dm, data), dm.mode, data);
}

inline RotheTrajectory run_signorini(const BidomainMesh& mesh, const DofMap& dm,
                                     const ProblemData& data) {
  return detail::run_driver(StepOperator::signorini(mesh, dm, data), dm.mode, data);
}

// Violation of the stationary inequality at t = 0 over a probe set: zero
// (within solver accuracy) certifies that the initial datum solves the
// stationary problem, which is what the time-regularity diagnostics assume.
inline double compatibility_residual(const BidomainMesh& mesh, const DofMap& dm,
                                     const ProblemData& data, int n_random_probes = 200) {
  data.validate(mesh, dm);
  SpMat A0 = assemble_stiffness(mesh, dm, data.sigma1, data.sigma2);
  if (data.beta > 0) A0 += assemble_tangential_stiffness(mesh, dm, data.beta);
  Vec b0 = assemble_load(mesh, dm, data.f.at(0.0));
  if (dm.mode == DofMode::Bilateral && !data.g.empty())
    b0 -= assemble_interface_load(mesh, dm, data.g.at(0.0));
  InterfaceMass im = assemble_interface_mass(mesh, dm, data.alpha);

  const Vec residual = b0 - A0 * data.u0;
  Vec ju0(im.selector.size());
  for (int k = 0; k < im.selector.size(); ++k)
    ju0[k] = data.j.value(im.selector.value(data.u0, k));

  auto violation = [&](const Vec& delta) {
    double v = residual.dot(delta);
    for (int k = 0; k < im.selector.size(); ++k) {
      double jv = data.j.value(im.selector.value(data.u0, k) + im.selector.value(delta, k));
      if (jv == kInf) return -kInf;  // inadmissible probe, never a violation
      v -= im.weights[k] * (jv - ju0[k]);
    }
    return v;
  };

  double worst = 0.0;
  Vec delta = Vec::Zero(dm.n_dofs);
  for (int d = 0; d < dm.n_dofs; ++d) {
    delta[d] = 1.0;
    worst = std::max(worst, violation(delta));
    delta[d] = -1.0;
    worst = std::max(worst, violation(delta));
    delta[d] = 0.0;
  }
  std::mt19937 rng(20240901);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int p = 0; p < n_random_probes; ++p) {
    Vec r(dm.n_dofs);
    for (int d = 0; d < dm.n_dofs; ++d) r[d] = gauss(rng);
    r.normalize();
    worst = std::max(worst, violation(r));
  }
  return worst;
}

// Per-step sizes of the discrete time derivative, in the lumped interface
// norm and in the energy (gradient) norm.
struct RegularityReport {
  bool guaranteed = false;  // compatibility residual <= 1e-9
  double compatibility = 0.0;
  std::vector<double> deriv_norm_gamma;   // ||Z^i|| or ||U^i||, lumped L2(Gamma)
  std::vector<double> deriv_norm_energy;  // energy norm of (u^i - u^{i-1})/h
  double sup_gamma = 0.0;
  double sup_energy = 0.0;
};

inline RegularityReport regularity_diagnostics(const RotheTrajectory& traj,
                                               const BidomainMesh& mesh, const DofMap& dm,
                                               const ProblemData& data) {
  RegularityReport rep;
  rep.compatibility = compatibility_residual(mesh, dm, data);
  rep.guaranteed = rep.compatibility <= 1e-9;
  std::vector<double> lengths = mesh.interface_lumped_lengths();
  SpMat G = assemble_stiffness(mesh, dm, 1.0, 1.0);
  if (dm.mode == DofMode::Continuous) {
    if (data.beta > 0) G += assemble_tangential_stiffness(mesh, dm, data.beta);
  } else {
    InterfaceMass im = assemble_interface_mass(mesh, dm, 1.0);
    G += im.selector.weighted_gram(dm.n_dofs, im.weights);
  }
  for (int i = 1; i <= traj.m; ++i) {
    const Vec& dz = traj.derivative_series[i - 1];
    double s = 0;
    for (Eigen::Index k = 0; k < dz.size(); ++k) s += lengths[k] * dz[k] * dz[k];
    rep.deriv_norm_gamma.push_back(std::sqrt(s));
    Vec zdof = (traj.steps[i] - traj.steps[i - 1]) / traj.h;
    rep.deriv_norm_energy.push_back(std::sqrt(std::max(0.0, zdof.dot(G * zdof))));
  }
  for (double v : rep.deriv_norm_gamma) rep.sup_gamma = std::max(rep.sup_gamma, v);
  for (double v : rep.deriv_norm_energy) rep.sup_energy = std::max(rep.sup_energy, v);
  return rep;
}

struct TrajectoryDistance {
  double l2_sigma = 0.0;   // interface values, L2(0,T;L2(Gamma)) lumped/trapezoid
  double l2_energy = 0.0;  // DOF vectors, L2(0,T;energy) (same mesh required)
};

// Distance between two trajectories on nested time grids (the finer one is
// restricted to the nodes of the coarser). Composite trapezoid in time,
// lumped interface weights in space.
inline TrajectoryDistance trajectory_norms(const RotheTrajectory& a, const RotheTrajectory& b,
                                           const BidomainMesh& mesh,
                                           const SpMat* energy_gram = nullptr) {
  const RotheTrajectory& coarse = a.m <= b.m ? a : b;
  const RotheTrajectory& fine = a.m <= b.m ? b : a;
  if (std::abs(coarse.T - fine.T) > 1e-12 * (1.0 + coarse.T))
    throw std::invalid_argument("trajectory_norms: different final times");
  if (fine.m % coarse.m != 0)
    throw std::invalid_argument("trajectory_norms: time grids are not nested");
  if (coarse.interface_series[0].size() != fine.interface_series[0].size())
    throw std::invalid_argument("trajectory_norms: interface grids differ");
  const int r = fine.m / coarse.m;
  std::vector<double> lengths = mesh.interface_lumped_lengths();

  TrajectoryDistance d;
  double acc_sigma = 0.0, acc_energy = 0.0;
  for (int i = 0; i <= coarse.m; ++i) {
    const double theta = (i == 0 || i == coarse.m) ? 0.5 : 1.0;
    Vec diff = coarse.interface_series[i] - fine.interface_series[i * r];
    double s = 0;
    for (Eigen::Index k = 0; k < diff.size(); ++k) s += lengths[k] * diff[k] * diff[k];
    acc_sigma += theta * coarse.h * s;
    if (energy_gram) {
      Vec dd = coarse.steps[i] - fine.steps[i * r];
      acc_energy += theta * coarse.h * dd.dot(*energy_gram * dd);
    }
  }
  d.l2_sigma = std::sqrt(acc_sigma);
  d.l2_energy = std::sqrt(std::max(0.0, acc_energy));
  return d;
}

}  // namespace rothevi
