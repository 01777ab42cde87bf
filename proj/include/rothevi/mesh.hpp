#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "rothevi/csv.hpp"
#include "rothevi/errors.hpp"

namespace rothevi {

enum class Subdomain : int { Omega1 = 1, Omega2 = 2, Layer = 3 };
enum class Geometry { Strip, Inclusion };

inline std::string to_string(Subdomain s) {
  switch (s) {
    case Subdomain::Omega1: return "Omega1";
    case Subdomain::Omega2: return "Omega2";
    case Subdomain::Layer: return "Layer";
  }
  return "?";
}

struct Vec2 {
  double x = 0, y = 0;
};

// Oriented interface edge; the normal points from Omega1 into Omega2
// (into the layer, for layer meshes).
struct InterfaceEdge {
  int a = -1, b = -1;
  Vec2 normal;
};

struct BoundaryEdge {
  int a = -1, b = -1;
};

// Conforming triangulation of the bidomain with tagged interface and
// boundary entities. Immutable after construction.
struct BidomainMesh {
  std::vector<Vec2> nodes;
  std::vector<std::array<int, 3>> elements;  // ccw node triples
  std::vector<Subdomain> subdomain;          // per element
  std::vector<InterfaceEdge> interface_edges;  // chained along the interface
  std::vector<BoundaryEdge> dirichlet_edges;
  std::vector<BoundaryEdge> neumann_edges;
  Geometry geometry = Geometry::Strip;

  int n_nodes() const { return static_cast<int>(nodes.size()); }
  int n_elements() const { return static_cast<int>(elements.size()); }

  double element_area(int e) const {
    const Vec2& p0 = nodes[elements[e][0]];
    const Vec2& p1 = nodes[elements[e][1]];
    const Vec2& p2 = nodes[elements[e][2]];
    return 0.5 * ((p1.x - p0.x) * (p2.y - p0.y) - (p2.x - p0.x) * (p1.y - p0.y));
  }

  double total_area() const {
    double a = 0;
    for (int e = 0; e < n_elements(); ++e) a += element_area(e);
    return a;
  }

  double edge_length(int a, int b) const {
    return std::hypot(nodes[b].x - nodes[a].x, nodes[b].y - nodes[a].y);
  }

  double interface_length() const {
    double s = 0;
    for (const auto& e : interface_edges) s += edge_length(e.a, e.b);
    return s;
  }

  std::vector<char> dirichlet_node_mask() const {
    std::vector<char> m(nodes.size(), 0);
    for (const auto& e : dirichlet_edges) m[e.a] = m[e.b] = 1;
    return m;
  }

  // Interface nodes in chain order (loop order for the inclusion geometry).
  std::vector<int> interface_nodes() const {
    std::vector<int> order;
    std::vector<char> seen(nodes.size(), 0);
    for (const auto& e : interface_edges) {
      if (!seen[e.a]) { seen[e.a] = 1; order.push_back(e.a); }
      if (!seen[e.b]) { seen[e.b] = 1; order.push_back(e.b); }
    }
    return order;
  }

  // Arclength coordinate per interface node, aligned with interface_nodes().
  std::vector<double> interface_arclengths() const {
    std::vector<double> s;
    std::vector<int> order = interface_nodes();
    std::map<int, double> at;
    double acc = 0;
    if (!interface_edges.empty()) {
      at[interface_edges.front().a] = 0;
      for (const auto& e : interface_edges) {
        acc = at.at(e.a) + edge_length(e.a, e.b);
        if (!at.count(e.b)) at[e.b] = acc;
      }
    }
    s.reserve(order.size());
    for (int n : order) s.push_back(at.at(n));
    return s;
  }

  // Lumped interface lengths (half-sum of the adjacent edge lengths),
  // aligned with interface_nodes().
  std::vector<double> interface_lumped_lengths() const {
    std::vector<int> order = interface_nodes();
    std::map<int, double> acc;
    for (int n : order) acc[n] = 0;
    for (const auto& e : interface_edges) {
      double half = 0.5 * edge_length(e.a, e.b);
      acc[e.a] += half;
      acc[e.b] += half;
    }
    std::vector<double> w;
    w.reserve(order.size());
    for (int n : order) w.push_back(acc[n]);
    return w;
  }

  void audit() const;

  void dump_csv(const std::string& nodes_path, const std::string& elements_path) const {
    CsvWriter nw(nodes_path, {"id", "x", "y"});
    for (int i = 0; i < n_nodes(); ++i)
      nw.row({CsvWriter::cell(i), CsvWriter::cell(nodes[i].x), CsvWriter::cell(nodes[i].y)});
    CsvWriter ew(elements_path, {"id", "n0", "n1", "n2", "subdomain"});
    for (int e = 0; e < n_elements(); ++e)
      ew.row({CsvWriter::cell(e), CsvWriter::cell(elements[e][0]),
              CsvWriter::cell(elements[e][1]), CsvWriter::cell(elements[e][2]),
              to_string(subdomain[e])});
  }
};

namespace detail {

inline std::pair<int, int> sorted_pair(int a, int b) {
  return a < b ? std::pair{a, b} : std::pair{b, a};
}

}  // namespace detail

// Full adjacency audit: interior edges shared by exactly two elements,
// tagged interface edges by one element per side, tagged boundary edges by
// exactly one element, positive areas, nonempty Dirichlet part.
inline void BidomainMesh::audit() const {
  for (int e = 0; e < n_elements(); ++e)
    if (!(element_area(e) > 0))
      throw GeometryError("element " + std::to_string(e) + " has nonpositive area");

  std::map<std::pair<int, int>, std::vector<int>> edge_elems;
  for (int e = 0; e < n_elements(); ++e)
    for (int k = 0; k < 3; ++k)
      edge_elems[detail::sorted_pair(elements[e][k], elements[e][(k + 1) % 3])].push_back(e);

  std::map<std::pair<int, int>, char> tagged;  // 'i' interface, 'b' boundary
  for (const auto& e : interface_edges) tagged[detail::sorted_pair(e.a, e.b)] = 'i';
  for (const auto& e : dirichlet_edges) tagged[detail::sorted_pair(e.a, e.b)] = 'b';
  for (const auto& e : neumann_edges) tagged[detail::sorted_pair(e.a, e.b)] = 'b';

  for (const auto& [edge, elems] : edge_elems) {
    auto it = tagged.find(edge);
    char tag = it == tagged.end() ? '-' : it->second;
    if (tag == 'b') {
      if (elems.size() != 1)
        throw GeometryError("tagged boundary edge not on exactly one element");
    } else if (tag == 'i') {
      if (elems.size() != 2)
        throw GeometryError("interface edge not shared by exactly two elements");
      Subdomain s0 = subdomain[elems[0]], s1 = subdomain[elems[1]];
      bool omega1 = (s0 == Subdomain::Omega1) != (s1 == Subdomain::Omega1);
      bool other_ok = (s0 != s1);
      if (!omega1 || !other_ok)
        throw GeometryError("interface edge must separate Omega1 from the other side");
    } else {
      if (elems.size() == 1)
        throw GeometryError("untagged edge lies on the boundary");
      if (elems.size() != 2)
        throw GeometryError("non-conforming edge shared by " + std::to_string(elems.size()) + " elements");
    }
  }

  double dlen = 0;
  for (const auto& e : dirichlet_edges) dlen += edge_length(e.a, e.b);
  if (!(dlen > 0)) throw GeometryError("Dirichlet boundary has zero measure");

  if (geometry == Geometry::Inclusion) {
    // Closed loop: every interface node on exactly two interface edges,
    // and the interface must not touch the outer boundary.
    std::map<int, int> deg;
    for (const auto& e : interface_edges) { deg[e.a]++; deg[e.b]++; }
    for (const auto& [n, d] : deg)
      if (d != 2) throw GeometryError("inclusion interface is not a closed loop");
    std::vector<char> dmask = dirichlet_node_mask();
    for (const auto& [n, d] : deg)
      if (dmask[n]) throw GeometryError("inclusion interface touches the outer boundary");
  }
}

// Strip geometry: Omega = [0,2]x[0,1], Omega1 = [0,1]x[0,1], interface at
// x = 1 with normal (+1,0); Dirichlet on x = 0 and x = 2, Neumann on top
// and bottom. Structured right triangles, nx1 (nx2) cells across Omega1
// (Omega2), ny cells vertically.
inline BidomainMesh build_strip_mesh(int nx1, int nx2, int ny) {
  if (nx1 < 1 || nx2 < 1 || ny < 1)
    throw std::invalid_argument("build_strip_mesh: element counts must be >= 1");

  BidomainMesh m;
  m.geometry = Geometry::Strip;
  const int nx = nx1 + nx2;
  auto id = [nx](int i, int j) { return j * (nx + 1) + i; };

  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i <= nx; ++i) {
      double x = i <= nx1 ? double(i) / nx1 : 1.0 + double(i - nx1) / nx2;
      m.nodes.push_back({x, double(j) / ny});
    }

  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      int v00 = id(i, j), v10 = id(i + 1, j), v01 = id(i, j + 1), v11 = id(i + 1, j + 1);
      Subdomain s = i < nx1 ? Subdomain::Omega1 : Subdomain::Omega2;
      m.elements.push_back({v00, v10, v11});
      m.subdomain.push_back(s);
      m.elements.push_back({v00, v11, v01});
      m.subdomain.push_back(s);
    }

  for (int j = 0; j < ny; ++j)
    m.interface_edges.push_back({id(nx1, j), id(nx1, j + 1), {1.0, 0.0}});
  for (int j = 0; j < ny; ++j) {
    m.dirichlet_edges.push_back({id(0, j), id(0, j + 1)});
    m.dirichlet_edges.push_back({id(nx, j), id(nx, j + 1)});
  }
  for (int i = 0; i < nx; ++i) {
    m.neumann_edges.push_back({id(i, 0), id(i + 1, 0)});
    m.neumann_edges.push_back({id(i, ny), id(i + 1, ny)});
  }
  return m;
}

// Inclusion geometry: Omega = [0,1]^2, Omega1 = [0.25,0.75]^2, the interface
// is the closed square loop around Omega1 with outward normals, Dirichlet on
// the whole outer boundary. n cells per unit length, multiple of 4 so the
// inner square is grid aligned.
inline BidomainMesh build_inclusion_mesh(int n) {
  if (n < 4 || n % 4 != 0)
    throw std::invalid_argument("build_inclusion_mesh: n must be a positive multiple of 4");

  BidomainMesh m;
  m.geometry = Geometry::Inclusion;
  auto id = [n](int i, int j) { return j * (n + 1) + i; };

  for (int j = 0; j <= n; ++j)
    for (int i = 0; i <= n; ++i)
      m.nodes.push_back({double(i) / n, double(j) / n});

  const int lo = n / 4, hi = 3 * n / 4;
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      int v00 = id(i, j), v10 = id(i + 1, j), v01 = id(i, j + 1), v11 = id(i + 1, j + 1);
      bool inner = i >= lo && i < hi && j >= lo && j < hi;
      Subdomain s = inner ? Subdomain::Omega1 : Subdomain::Omega2;
      m.elements.push_back({v00, v10, v11});
      m.subdomain.push_back(s);
      m.elements.push_back({v00, v11, v01});
      m.subdomain.push_back(s);
    }

  // Loop order: bottom left-to-right, right upwards, top right-to-left,
  // left downwards.
  for (int i = lo; i < hi; ++i) m.interface_edges.push_back({id(i, lo), id(i + 1, lo), {0.0, -1.0}});
  for (int j = lo; j < hi; ++j) m.interface_edges.push_back({id(hi, j), id(hi, j + 1), {1.0, 0.0}});
  for (int i = hi; i > lo; --i) m.interface_edges.push_back({id(i, hi), id(i - 1, hi), {0.0, 1.0}});
  for (int j = hi; j > lo; --j) m.interface_edges.push_back({id(lo, j), id(lo, j - 1), {-1.0, 0.0}});

  for (int i = 0; i < n; ++i) {
    m.dirichlet_edges.push_back({id(i, 0), id(i + 1, 0)});
    m.dirichlet_edges.push_back({id(i, n), id(i + 1, n)});
  }
  for (int j = 0; j < n; ++j) {
    m.dirichlet_edges.push_back({id(0, j), id(0, j + 1)});
    m.dirichlet_edges.push_back({id(n, j), id(n, j + 1)});
  }
  return m;
}

}  // namespace rothevi
