#pragma once

#include <stdexcept>
#include <utility>
#include <vector>

#include "rothevi/mesh.hpp"

namespace rothevi {

enum class DofMode { Continuous, Bilateral };

// One record per interface node. In Continuous mode the two sides share a
// single DOF (dof1 == dof2); in Bilateral mode dof1 carries the Omega1 trace
// and dof2 the Omega2 trace, so the jump is x[dof2] - x[dof1].
struct InterfaceDofRecord {
  int node = -1;
  int dof1 = -1;
  int dof2 = -1;
};

struct DofMap {
  DofMode mode = DofMode::Continuous;
  int n_dofs = 0;
  bool keep_dirichlet = false;
  std::vector<int> dof1;  // per node; -1 for eliminated Dirichlet nodes
  std::vector<int> dof2;  // per node; == dof1 except bilateral interface nodes
  std::vector<InterfaceDofRecord> interface_dofs;  // in interface chain order
  std::vector<std::pair<int, int>> owner;          // dof -> (node, side 1|2)

  // DOF of a local element vertex; Omega2 elements see the side-2 trace.
  int element_dof(const BidomainMesh& m, int e, int local) const {
    int node = m.elements[e][local];
    return m.subdomain[e] == Subdomain::Omega2 ? dof2[node] : dof1[node];
  }
};

// keep_dirichlet = true keeps one DOF per Dirichlet node as well; used only
// for pre-elimination assemblies in tests.
inline DofMap build_dof_map(const BidomainMesh& mesh, DofMode mode,
                            bool keep_dirichlet = false) {
  DofMap dm;
  dm.mode = mode;
  dm.keep_dirichlet = keep_dirichlet;
  dm.dof1.assign(mesh.nodes.size(), -1);
  dm.dof2.assign(mesh.nodes.size(), -1);

  if (mode == DofMode::Bilateral)
    for (Subdomain s : mesh.subdomain)
      if (s == Subdomain::Layer)
        throw std::invalid_argument("bilateral DOF map is not defined on layer meshes");

  std::vector<char> dirichlet = mesh.dirichlet_node_mask();
  std::vector<int> iface = mesh.interface_nodes();
  std::vector<char> on_iface(mesh.nodes.size(), 0);
  for (int n : iface) {
    if (dirichlet[n])
      throw GeometryError("interface node lies on the Dirichlet boundary");
    on_iface[n] = 1;
  }

  int next = 0;
  for (int n = 0; n < mesh.n_nodes(); ++n) {
    if (dirichlet[n] && !keep_dirichlet) continue;
    dm.dof1[n] = next;
    dm.dof2[n] = next;
    dm.owner.emplace_back(n, 1);
    ++next;
  }
  if (mode == DofMode::Bilateral) {
    for (int n : iface) {
      dm.dof2[n] = next;
      dm.owner.emplace_back(n, 2);
      ++next;
    }
  }
  dm.n_dofs = next;

  dm.interface_dofs.reserve(iface.size());
  for (int n : iface) dm.interface_dofs.push_back({n, dm.dof1[n], dm.dof2[n]});
  return dm;
}

// Renumber the DOFs through a bijection (new index = perm[old index]).
// Used to check that trajectories are invariant under DOF ordering.
inline DofMap permute_dofs(const DofMap& dm, const std::vector<int>& perm) {
  if (static_cast<int>(perm.size()) != dm.n_dofs)
    throw std::invalid_argument("permute_dofs: permutation size mismatch");
  std::vector<char> hit(perm.size(), 0);
  for (int p : perm) {
    if (p < 0 || p >= dm.n_dofs || hit[p])
      throw std::invalid_argument("permute_dofs: not a permutation");
    hit[p] = 1;
  }
  DofMap out = dm;
  for (auto& d : out.dof1)
    if (d >= 0) d = perm[d];
  for (auto& d : out.dof2)
    if (d >= 0) d = perm[d];
  for (auto& r : out.interface_dofs) {
    r.dof1 = perm[r.dof1];
    r.dof2 = perm[r.dof2];
  }
  for (int d = 0; d < dm.n_dofs; ++d) out.owner[perm[d]] = dm.owner[d];
  return out;
}

}  // namespace rothevi
