#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <cmath>
#include <optional>
#include <random>
#include <stdexcept>
#include <vector>

#include "rothevi/dofmap.hpp"
#include "rothevi/errors.hpp"
#include "rothevi/mesh.hpp"
#include "rothevi/selector.hpp"

namespace rothevi {

namespace detail {

// P1 element stiffness on the triangle (p0,p1,p2), scaled by sigma.
inline void p1_stiffness(const Vec2& p0, const Vec2& p1, const Vec2& p2,
                         double sigma, double K[3][3]) {
  const double bvec[3] = {p1.y - p2.y, p2.y - p0.y, p0.y - p1.y};
  const double cvec[3] = {p2.x - p1.x, p0.x - p2.x, p1.x - p0.x};
  const double area2 = (p1.x - p0.x) * (p2.y - p0.y) - (p2.x - p0.x) * (p1.y - p0.y);
  const double f = sigma / (2.0 * area2);
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 3; ++k) K[i][k] = f * (bvec[i] * bvec[k] + cvec[i] * cvec[k]);
}

}  // namespace detail

// Piecewise-constant-conductivity P1 stiffness. Layer elements carry unit
// conductivity (the perturbed problem prescribes sigma = 1 in the band).
inline SpMat assemble_stiffness(const BidomainMesh& mesh, const DofMap& dm,
                                double sigma1, double sigma2) {
  if (!(sigma1 > 0) || !(sigma2 > 0))
    throw std::invalid_argument("assemble_stiffness: conductivities must be > 0");
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(mesh.n_elements() * 9);
  for (int e = 0; e < mesh.n_elements(); ++e) {
    double sigma = sigma1;
    if (mesh.subdomain[e] == Subdomain::Omega2) sigma = sigma2;
    if (mesh.subdomain[e] == Subdomain::Layer) sigma = 1.0;
    double K[3][3];
    detail::p1_stiffness(mesh.nodes[mesh.elements[e][0]], mesh.nodes[mesh.elements[e][1]],
                         mesh.nodes[mesh.elements[e][2]], sigma, K);
    int d[3];
    for (int i = 0; i < 3; ++i) d[i] = dm.element_dof(mesh, e, i);
    for (int i = 0; i < 3; ++i)
      for (int k = 0; k < 3; ++k)
        if (d[i] >= 0 && d[k] >= 0) trip.emplace_back(d[i], d[k], K[i][k]);
  }
  SpMat A(dm.n_dofs, dm.n_dofs);
  A.setFromTriplets(trip.begin(), trip.end());
  return A;
}

// 1D P1 stiffness along the interface polyline scaled by beta: the surface
// gradient on a 2D interface is the arclength derivative. Continuous mode
// only (the bilateral problem carries no surface diffusion).
inline SpMat assemble_tangential_stiffness(const BidomainMesh& mesh, const DofMap& dm,
                                           double beta) {
  if (dm.mode != DofMode::Continuous)
    throw std::invalid_argument("assemble_tangential_stiffness: continuous mode only");
  if (beta < 0) throw std::invalid_argument("assemble_tangential_stiffness: beta must be >= 0");
  SpMat A(dm.n_dofs, dm.n_dofs);
  if (beta == 0) return A;
  std::vector<Eigen::Triplet<double>> trip;
  for (const auto& e : mesh.interface_edges) {
    double len = mesh.edge_length(e.a, e.b);
    double k = beta / len;
    int da = dm.dof1[e.a], db = dm.dof1[e.b];
    if (da >= 0) trip.emplace_back(da, da, k);
    if (db >= 0) trip.emplace_back(db, db, k);
    if (da >= 0 && db >= 0) {
      trip.emplace_back(da, db, -k);
      trip.emplace_back(db, da, -k);
    }
  }
  A.setFromTriplets(trip.begin(), trip.end());
  return A;
}

struct InterfaceMass {
  std::vector<double> weights;  // per interface node, alpha-weighted lumped length
  InterfaceSelector selector;   // trace or jump, per DOF-map mode
};

// Lumped interface mass: w_k = alpha * (half-sum of the adjacent interface
// edge lengths), plus the selector extracting the trace (Continuous) or the
// jump u2 - u1 (Bilateral) at each interface node.
inline InterfaceMass assemble_interface_mass(const BidomainMesh& mesh, const DofMap& dm,
                                             double alpha) {
  if (!(alpha > 0)) throw std::invalid_argument("assemble_interface_mass: alpha must be > 0");
  InterfaceMass im;
  std::vector<double> lengths = mesh.interface_lumped_lengths();
  im.weights.reserve(lengths.size());
  for (double l : lengths) im.weights.push_back(alpha * l);
  im.selector.kind = dm.mode == DofMode::Bilateral ? InterfaceSelector::Kind::Jump
                                                   : InterfaceSelector::Kind::Trace;
  for (const auto& r : dm.interface_dofs) {
    if (dm.mode == DofMode::Bilateral)
      im.selector.entries.push_back({r.node, r.dof2, r.dof1});
    else
      im.selector.entries.push_back({r.node, r.dof1, -1});
  }
  return im;
}

enum class LoadRegion { All, SkipLayer };

// Consistent P1 load vector for nodal values of f. The layer band can be
// excluded (the perturbed problem has no source there).
inline Vec assemble_load(const BidomainMesh& mesh, const DofMap& dm, const Vec& f_nodal,
                         LoadRegion region = LoadRegion::All) {
  if (f_nodal.size() != mesh.n_nodes())
    throw std::invalid_argument("assemble_load: nodal value size mismatch");
  Vec b = Vec::Zero(dm.n_dofs);
  for (int e = 0; e < mesh.n_elements(); ++e) {
    if (region == LoadRegion::SkipLayer && mesh.subdomain[e] == Subdomain::Layer) continue;
    double area = mesh.element_area(e);
    double fv[3];
    int d[3];
    for (int i = 0; i < 3; ++i) {
      fv[i] = f_nodal[mesh.elements[e][i]];
      d[i] = dm.element_dof(mesh, e, i);
    }
    for (int i = 0; i < 3; ++i)
      if (d[i] >= 0)
        b[d[i]] += area / 12.0 * (2.0 * fv[i] + fv[(i + 1) % 3] + fv[(i + 2) % 3]);
  }
  return b;
}

// Lumped interface load sum_k l_k g_k acting on the side-1 trace DOFs.
// Bilateral mode only.
inline Vec assemble_interface_load(const BidomainMesh& mesh, const DofMap& dm,
                                   const Vec& g_iface) {
  if (dm.mode != DofMode::Bilateral)
    throw std::invalid_argument("assemble_interface_load: bilateral mode only");
  if (g_iface.size() != static_cast<Eigen::Index>(dm.interface_dofs.size()))
    throw std::invalid_argument("assemble_interface_load: interface value size mismatch");
  std::vector<double> lengths = mesh.interface_lumped_lengths();
  Vec b = Vec::Zero(dm.n_dofs);
  for (std::size_t k = 0; k < dm.interface_dofs.size(); ++k)
    b[dm.interface_dofs[k].dof1] += lengths[k] * g_iface[k];
  return b;
}

// Consistent P1 mass matrix, optionally restricted to one subdomain.
inline SpMat assemble_mass(const BidomainMesh& mesh, const DofMap& dm,
                           std::optional<Subdomain> only = std::nullopt) {
  std::vector<Eigen::Triplet<double>> trip;
  for (int e = 0; e < mesh.n_elements(); ++e) {
    if (only && mesh.subdomain[e] != *only) continue;
    double area = mesh.element_area(e);
    int d[3];
    for (int i = 0; i < 3; ++i) d[i] = dm.element_dof(mesh, e, i);
    for (int i = 0; i < 3; ++i)
      for (int k = 0; k < 3; ++k)
        if (d[i] >= 0 && d[k] >= 0)
          trip.emplace_back(d[i], d[k], area / 12.0 * (i == k ? 2.0 : 1.0));
  }
  SpMat M(dm.n_dofs, dm.n_dofs);
  M.setFromTriplets(trip.begin(), trip.end());
  return M;
}

// Discrete constant of the generalized Poincare inequality on the bilateral
// space: the largest C with ||v1||^2_{Omega1} <= C (||grad v||^2 + ||[v]||^2_Gamma),
// i.e. the top eigenvalue of B^{-1} M1 with B = stiffness(sigma=1) + lumped
// jump mass. Inverse power iteration through a Cholesky factorization of B.
inline double poincare_constant(const BidomainMesh& mesh, const DofMap& dm,
                                double rel_tol = 1e-8, int max_iter = 20000) {
  if (dm.mode != DofMode::Bilateral)
    throw std::invalid_argument("poincare_constant: bilateral mode only");
  SpMat B = assemble_stiffness(mesh, dm, 1.0, 1.0);
  InterfaceMass im = assemble_interface_mass(mesh, dm, 1.0);
  B += im.selector.weighted_gram(dm.n_dofs, im.weights);
  SpMat M1 = assemble_mass(mesh, dm, Subdomain::Omega1);

  Eigen::SimplicialLDLT<SpMat> ldlt(B);
  if (ldlt.info() != Eigen::Success)
    throw NumericError("poincare_constant: factorization of the jump form failed");

  std::mt19937 rng(42);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vec v(dm.n_dofs);
  for (int i = 0; i < dm.n_dofs; ++i) v[i] = gauss(rng);
  v.normalize();

  double mu = 0;
  std::vector<double> trace;
  for (int it = 0; it < max_iter; ++it) {
    Vec Mv = M1 * v;
    Vec z = ldlt.solve(Mv);
    double nz = z.norm();
    if (!(nz > 0)) throw NumericError("poincare_constant: iteration collapsed", trace);
    z /= nz;
    double num = z.dot(M1 * z);
    double den = z.dot(B * z);
    double mu_new = num / den;
    trace.push_back(mu_new);
    if (it > 0 && std::abs(mu_new - mu) <= rel_tol * std::abs(mu_new)) return mu_new;
    mu = mu_new;
    v = z;
  }
  throw NumericError("poincare_constant: no convergence in " + std::to_string(max_iter) +
                         " iterations",
                     trace);
}

}  // namespace rothevi
