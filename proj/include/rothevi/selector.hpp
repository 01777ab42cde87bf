#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <vector>

namespace rothevi {

using Vec = Eigen::VectorXd;
using SpMat = Eigen::SparseMatrix<double>;

// Linear map from a DOF vector to one scalar per interface (or layer) node:
// the trace value in Continuous mode, the jump x[dof_pos] - x[dof_neg] in
// Bilateral mode. Each DOF appears in at most one entry.
struct InterfaceSelector {
  enum class Kind { Trace, Jump };

  struct Entry {
    int node = -1;     // mesh node this scalar lives on
    int dof_pos = -1;  // trace DOF, or the side-2 DOF of a jump
    int dof_neg = -1;  // side-1 DOF of a jump; -1 for traces
  };

  Kind kind = Kind::Trace;
  std::vector<Entry> entries;

  int size() const { return static_cast<int>(entries.size()); }

  double value(const Vec& x, int k) const {
    const Entry& e = entries[k];
    double v = x[e.dof_pos];
    if (e.dof_neg >= 0) v -= x[e.dof_neg];
    return v;
  }

  Vec apply(const Vec& x) const {
    Vec v(size());
    for (int k = 0; k < size(); ++k) v[k] = value(x, k);
    return v;
  }

  // y += c * (row k)^T
  void add_transpose(Vec& y, int k, double c) const {
    const Entry& e = entries[k];
    y[e.dof_pos] += c;
    if (e.dof_neg >= 0) y[e.dof_neg] -= c;
  }

  Vec apply_transpose(const Vec& s, int n_dofs) const {
    Vec y = Vec::Zero(n_dofs);
    for (int k = 0; k < size(); ++k) add_transpose(y, k, s[k]);
    return y;
  }

  // S^T diag(w) S as a sparse matrix on the DOF space.
  SpMat weighted_gram(int n_dofs, const std::vector<double>& w) const {
    std::vector<Eigen::Triplet<double>> trip;
    for (int k = 0; k < size(); ++k) {
      const Entry& e = entries[k];
      trip.emplace_back(e.dof_pos, e.dof_pos, w[k]);
      if (e.dof_neg >= 0) {
        trip.emplace_back(e.dof_neg, e.dof_neg, w[k]);
        trip.emplace_back(e.dof_pos, e.dof_neg, -w[k]);
        trip.emplace_back(e.dof_neg, e.dof_pos, -w[k]);
      }
    }
    SpMat m(n_dofs, n_dofs);
    m.setFromTriplets(trip.begin(), trip.end());
    return m;
  }

  // For the coordinate solver: per-DOF (entry index, sign), sign +1 when the
  // DOF enters the entry positively. (-1, 0) for uncoupled DOFs.
  std::vector<std::pair<int, int>> dof_coupling(int n_dofs) const {
    std::vector<std::pair<int, int>> c(n_dofs, {-1, 0});
    for (int k = 0; k < size(); ++k) {
      const Entry& e = entries[k];
      c[e.dof_pos] = {k, +1};
      if (e.dof_neg >= 0) c[e.dof_neg] = {k, -1};
    }
    return c;
  }
};

}  // namespace rothevi
