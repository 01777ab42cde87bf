#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <map>
#include <stdexcept>
#include <vector>

#include "rothevi/estimates.hpp"
#include "rothevi/stepping.hpp"

namespace rothevi {

// Side indices of the square interface, by outward normal direction.
enum LayerSide { kLeft = 0, kRight = 1, kBottom = 2, kTop = 3 };

// Inclusion mesh with a band of Layer-tagged cells of width epsilon*gamma
// attached to the outside of the interface, plus the bookkeeping needed by
// the perturbed problem: lumped band volumes, the band width applicable at
// each node, and the transverse node chains used for layer averages.
struct LayerMesh {
  BidomainMesh mesh;
  int n = 0;
  double epsilon = 0.0;
  std::array<double, 4> gamma{};       // per side thickness profile
  std::array<int, 4> band_cells{};     // snapped width in grid cells
  std::array<double, 4> band_width{};  // snapped epsilon*gamma
  std::vector<double> node_volume;     // lumped layer volume per mesh node
  std::vector<double> node_width;      // applicable band width per node (0 outside)
  std::vector<int> node_iface;         // projected interface node (chain index), -1 outside
  std::vector<std::vector<int>> chains;  // per interface node: node path from
                                         // the interface to the outer band edge

  double total_layer_volume() const {
    double v = 0;
    for (int e = 0; e < mesh.n_elements(); ++e)
      if (mesh.subdomain[e] == Subdomain::Layer) v += mesh.element_area(e);
    return v;
  }
};

// The band is grid-aligned: each side width epsilon*gamma is snapped to a
// whole number of cells (>= 1, i.e. two triangle layers) and must keep the
// closure of the band strictly inside the domain.
inline LayerMesh build_layer_mesh(int n, double epsilon, std::array<double, 4> gamma) {
  if (!(epsilon > 0)) throw std::invalid_argument("build_layer_mesh: epsilon must be > 0");
  for (double g : gamma)
    if (!(g > 0)) throw std::invalid_argument("build_layer_mesh: gamma must be > 0");

  LayerMesh lm;
  lm.mesh = build_inclusion_mesh(n);
  lm.n = n;
  lm.epsilon = epsilon;
  lm.gamma = gamma;

  const int lo = n / 4, hi = 3 * n / 4;
  for (int s = 0; s < 4; ++s) {
    int cells = static_cast<int>(std::lround(epsilon * gamma[s] * n));
    if (cells < 1)
      throw GeometryError("band width epsilon*gamma is below one cell ring at this resolution");
    if (cells > lo - 1)
      throw GeometryError("band of width epsilon*gamma does not stay inside the domain");
    lm.band_cells[s] = cells;
    lm.band_width[s] = static_cast<double>(cells) / n;
  }
  const int cL = lm.band_cells[kLeft], cR = lm.band_cells[kRight];
  const int cB = lm.band_cells[kBottom], cT = lm.band_cells[kTop];

  // Retag band cells. Cell (i,j) covers [i,i+1]x[j,j+1] in grid units.
  for (int e = 0; e < lm.mesh.n_elements(); ++e) {
    if (lm.mesh.subdomain[e] == Subdomain::Omega1) continue;
    // cell indices from the element's lower-left vertex
    int vmin_i = n + 1, vmin_j = n + 1;
    for (int k = 0; k < 3; ++k) {
      int node = lm.mesh.elements[e][k];
      vmin_i = std::min(vmin_i, node % (n + 1));
      vmin_j = std::min(vmin_j, node / (n + 1));
    }
    bool in_rect = vmin_i >= lo - cL && vmin_i < hi + cR && vmin_j >= lo - cB &&
                   vmin_j < hi + cT;
    bool in_inner = vmin_i >= lo && vmin_i < hi && vmin_j >= lo && vmin_j < hi;
    if (in_rect && !in_inner) lm.mesh.subdomain[e] = Subdomain::Layer;
  }

  // Lumped band volume per node.
  lm.node_volume.assign(lm.mesh.nodes.size(), 0.0);
  for (int e = 0; e < lm.mesh.n_elements(); ++e) {
    if (lm.mesh.subdomain[e] != Subdomain::Layer) continue;
    double third = lm.mesh.element_area(e) / 3.0;
    for (int k = 0; k < 3; ++k) lm.node_volume[lm.mesh.elements[e][k]] += third;
  }

  // Applicable band width and projected interface node, for band nodes.
  std::vector<int> iface = lm.mesh.interface_nodes();
  std::map<int, int> iface_index;
  for (std::size_t k = 0; k < iface.size(); ++k) iface_index[iface[k]] = static_cast<int>(k);

  lm.node_width.assign(lm.mesh.nodes.size(), 0.0);
  lm.node_iface.assign(lm.mesh.nodes.size(), -1);
  for (int node = 0; node < lm.mesh.n_nodes(); ++node) {
    if (lm.node_volume[node] <= 0) continue;
    int i = node % (n + 1), j = node / (n + 1);
    int side;
    if (i < lo)
      side = kLeft;  // corner regions resolve to the x-side
    else if (i > hi)
      side = kRight;
    else if (j <= lo)
      side = kBottom;
    else if (j >= hi)
      side = kTop;
    else
      side = (i == lo) ? kLeft : kRight;  // nodes on the vertical interface sides
    lm.node_width[node] = lm.band_width[side];
    int pi = std::min(std::max(i, lo), hi), pj = std::min(std::max(j, lo), hi);
    lm.node_iface[node] = iface_index.at(pj * (n + 1) + pi);
  }

  // Transverse chains: straight outward march for side nodes, diagonal for
  // the four corners (their offset region is completed by corner cells).
  lm.chains.resize(iface.size());
  for (std::size_t k = 0; k < iface.size(); ++k) {
    int node = iface[k];
    int i = node % (n + 1), j = node / (n + 1);
    int di = 0, dj = 0;
    if (i == lo) di = -1;
    if (i == hi) di = +1;
    if (j == lo) dj = -1;
    if (j == hi) dj = +1;
    int rings;
    if (di != 0 && dj != 0)
      rings = std::min(lm.band_cells[di < 0 ? kLeft : kRight],
                       lm.band_cells[dj < 0 ? kBottom : kTop]);
    else if (di != 0)
      rings = lm.band_cells[di < 0 ? kLeft : kRight];
    else
      rings = lm.band_cells[dj < 0 ? kBottom : kTop];
    for (int t = 0; t <= rings; ++t)
      lm.chains[k].push_back((j + t * dj) * (n + 1) + (i + t * di));
  }
  return lm;
}

inline LayerMesh build_layer_mesh(int n, double epsilon, double gamma_uniform) {
  return build_layer_mesh(n, epsilon, {gamma_uniform, gamma_uniform, gamma_uniform, gamma_uniform});
}

// Per-interface-node transverse average (1/(eps*gamma)) integral of u across
// the band, by the trapezoid rule along the node chain. Exact for fields
// constant in the transverse direction.
inline Vec layer_average(const LayerMesh& lm, const DofMap& dm, const Vec& u) {
  Vec avg(static_cast<Eigen::Index>(lm.chains.size()));
  for (std::size_t k = 0; k < lm.chains.size(); ++k) {
    const auto& chain = lm.chains[k];
    const int r = static_cast<int>(chain.size()) - 1;
    double s = 0.5 * (u[dm.dof1[chain.front()]] + u[dm.dof1[chain.back()]]);
    for (int t = 1; t < r; ++t) s += u[dm.dof1[chain[t]]];
    avg[k] = s / r;
  }
  return avg;
}

// Band-constant extension of the interface datum (the initial condition of
// the perturbed problem prescribes u0 throughout the band), harmonic lift
// elsewhere.
inline Vec lift_layer_datum(const LayerMesh& lm, const DofMap& dm, const Vec& S) {
  SpMat K = assemble_stiffness(lm.mesh, dm, 1.0, 1.0);
  std::vector<std::pair<int, double>> pinned;
  for (int node = 0; node < lm.mesh.n_nodes(); ++node)
    if (lm.node_iface[node] >= 0 && dm.dof1[node] >= 0)
      pinned.emplace_back(dm.dof1[node], S[lm.node_iface[node]]);
  return solve_with_pinned(K, pinned);
}

// Volume-lumped weights of the band functionals: w_k = V_k / (eps*gamma),
// with the trace selector over every node of the band closure.
inline InterfaceMass layer_mass(const LayerMesh& lm, const DofMap& dm) {
  InterfaceMass im;
  im.selector.kind = InterfaceSelector::Kind::Trace;
  for (int node = 0; node < lm.mesh.n_nodes(); ++node) {
    if (lm.node_volume[node] <= 0) continue;
    if (dm.dof1[node] < 0)
      throw GeometryError("layer band touches the Dirichlet boundary");
    im.selector.entries.push_back({node, dm.dof1[node], -1});
    im.weights.push_back(lm.node_volume[node] / lm.node_width[node]);
  }
  return im;
}

inline RotheTrajectory run_perturbed(const LayerMesh& lm, const DofMap& dm,
                                     const ProblemData& data) {
  if (dm.mode != DofMode::Continuous)
    throw std::invalid_argument("run_perturbed: continuous DOF map required");
  if (data.beta != 0)
    throw std::invalid_argument("run_perturbed: the perturbed problem requires beta = 0");
  if (!data.j.growth_bounded())
    throw std::invalid_argument(
        "run_perturbed: ineligible interface functional (needs the quadratic growth bound)");
  data.validate(lm.mesh, dm);

  StepOperator op = StepOperator::perturbed(lm.mesh, dm, data, layer_mass(lm, dm));
  RotheTrajectory tr;
  tr.mode = dm.mode;
  tr.T = data.T;
  tr.m = data.m;
  tr.h = data.h();
  tr.steps.push_back(data.u0);
  for (int i = 1; i <= data.m; ++i)
    tr.steps.push_back(op.step(tr.steps.back(), tr.h * i));

  // The reported interface series is the trace on the inner interface; the
  // band values are recovered through layer_average.
  InterfaceSelector trace = assemble_interface_mass(lm.mesh, dm, data.alpha).selector;
  for (const Vec& u : tr.steps) tr.interface_series.push_back(trace.apply(u));
  for (int i = 1; i <= data.m; ++i)
    tr.derivative_series.push_back((tr.interface_series[i] - tr.interface_series[i - 1]) /
                                   tr.h);
  return tr;
}

// Lumped band quadrature of a scalar field: sum_k (V_k / (eps*gamma)) w(node).
inline double layer_quadrature(const LayerMesh& lm,
                               const std::function<double(double, double)>& w) {
  double s = 0;
  for (int node = 0; node < lm.mesh.n_nodes(); ++node)
    if (lm.node_volume[node] > 0)
      s += lm.node_volume[node] / lm.node_width[node] *
           w(lm.mesh.nodes[node].x, lm.mesh.nodes[node].y);
  return s;
}

// Lumped interface quadrature of the same field, for comparison.
inline double interface_quadrature(const BidomainMesh& mesh,
                                   const std::function<double(double, double)>& w) {
  std::vector<int> order = mesh.interface_nodes();
  std::vector<double> lengths = mesh.interface_lumped_lengths();
  double s = 0;
  for (std::size_t k = 0; k < order.size(); ++k)
    s += lengths[k] * w(mesh.nodes[order[k]].x, mesh.nodes[order[k]].y);
  return s;
}

struct ThinLayerRow {
  double epsilon = 0.0;
  int band_width_cells = 0;
  double distance = 0.0;          // L2(0,T;L2(Gamma)) of layer average vs trace
  double layer_norm_bound = 0.0;  // max over steps of the (1/(eps*gamma))-weighted
                                  // band L2 norm squared
};

// The vanishing-thickness study: solve the perturbed problem for each
// epsilon and measure the distance of the transverse averages to the trace
// of the beta = 0 solution on the matching inclusion mesh.
inline std::vector<ThinLayerRow> convergence_study(const DataSpec& base, double gamma,
                                                   const std::vector<double>& eps_list,
                                                   int n) {
  if (base.beta != 0)
    throw std::invalid_argument("convergence_study: requires beta = 0");
  if (!base.j.growth_bounded())
    throw std::invalid_argument("convergence_study: ineligible interface functional");
  for (std::size_t i = 1; i < eps_list.size(); ++i)
    if (!(eps_list[i] < eps_list[i - 1]))
      throw std::invalid_argument("convergence_study: eps_list must be strictly decreasing");

  BidomainMesh ref_mesh = build_inclusion_mesh(n);
  DofMap ref_dm = build_dof_map(ref_mesh, DofMode::Continuous);
  ProblemData ref_data = base.instantiate(ref_mesh, ref_dm);
  RotheTrajectory ref = run_wentzell(ref_mesh, ref_dm, ref_data);
  std::vector<double> lengths = ref_mesh.interface_lumped_lengths();

  std::vector<ThinLayerRow> rows;
  for (double eps : eps_list) {
    LayerMesh lm = build_layer_mesh(n, eps, gamma);
    DofMap dm = build_dof_map(lm.mesh, DofMode::Continuous);
    ProblemData data = base.instantiate(lm.mesh, dm);
    data.u0 = lift_layer_datum(lm, dm, data.S);
    RotheTrajectory traj = run_perturbed(lm, dm, data);

    double acc = 0.0, norm_bound = 0.0;
    InterfaceMass band = layer_mass(lm, dm);
    for (int i = 0; i <= data.m; ++i) {
      const double theta = (i == 0 || i == data.m) ? 0.5 : 1.0;
      Vec diff = layer_average(lm, dm, traj.steps[i]) - ref.interface_series[i];
      double s = 0;
      for (Eigen::Index k = 0; k < diff.size(); ++k) s += lengths[k] * diff[k] * diff[k];
      acc += theta * data.h() * s;
      double band_sq = 0;
      for (int k = 0; k < band.selector.size(); ++k) {
        double v = band.selector.value(traj.steps[i], k);
        band_sq += band.weights[k] * v * v;
      }
      norm_bound = std::max(norm_bound, band_sq);
    }
    rows.push_back({eps, lm.band_cells[kLeft], std::sqrt(acc), norm_bound});
  }
  return rows;
}

}  // namespace rothevi
