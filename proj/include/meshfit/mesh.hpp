// Mesh container and per-element shape queries: edge frames, skewness,
// quality reports, averaged boundary normals.
#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "meshfit/geometry.hpp"

namespace meshfit {

using Hex8 = std::array<int, 8>;
using Facet = std::array<int, 4>;

/// Node coordinates, hex8 connectivity, boundary quad facets (outward
/// oriented), and named node sets. Connectivity is immutable during refitting;
/// only `nodes` moves.
struct Mesh {
  std::vector<Vec3> nodes;
  std::vector<Hex8> elements;
  std::vector<Facet> boundary_facets;
  std::map<std::string, std::vector<int>> node_sets;

  int n_nodes() const { return static_cast<int>(nodes.size()); }
  int n_elements() const { return static_cast<int>(elements.size()); }
};

/// The 12 edge vectors of one element grouped by direction, plus the four-edge
/// averages v_bar per direction.
struct ElementEdgeFrame {
  std::array<std::array<Vec3, 4>, 3> v;
  std::array<Vec3, 3> v_bar;
};

inline ElementEdgeFrame element_edge_frame(const Mesh& mesh, int elem) {
  const Hex8& c = mesh.elements[elem];
  ElementEdgeFrame f;
  for (int i = 0; i < 3; ++i) {
    Vec3 sum = Vec3::Zero();
    for (int j = 0; j < 4; ++j) {
      f.v[i][j] = mesh.nodes[c[kHexEdge[i][j][1]]] - mesh.nodes[c[kHexEdge[i][j][0]]];
      sum += f.v[i][j];
    }
    f.v_bar[i] = 0.25 * sum;
  }
  return f;
}

inline Vec3 element_centroid(const Mesh& mesh, int elem) {
  Vec3 c = Vec3::Zero();
  for (int k = 0; k < 8; ++k) c += mesh.nodes[mesh.elements[elem][k]];
  return c / 8.0;
}

/// Length of the bounding-box diagonal; the global scale used by degeneracy
/// guards.
inline double mesh_diameter(const Mesh& mesh) {
  if (mesh.nodes.empty()) return 0.0;
  Vec3 lo = mesh.nodes.front(), hi = mesh.nodes.front();
  for (const Vec3& x : mesh.nodes) {
    lo = lo.cwiseMin(x);
    hi = hi.cwiseMax(x);
  }
  return (hi - lo).norm();
}

namespace detail {

/// Included angles at the 8 corners: for each node the three pairwise angles
/// between its emanating edge vectors. Returns false (and no angles) if any
/// participating edge is shorter than `tiny`.
inline bool corner_angles(const ElementEdgeFrame& f, double tiny,
                          std::array<double, 24>* angles) {
  int idx = 0;
  for (int n = 0; n < 8; ++n) {
    std::array<Vec3, 3> e;
    for (int i = 0; i < 3; ++i) {
      const NodeEdgeRef r = kNodeEdge[n][i];
      e[i] = r.sign * f.v[i][r.edge];
      if (e[i].norm() <= tiny) return false;
    }
    for (const auto& p : kDirPair) {
      double c = e[p[0]].dot(e[p[1]]) / (e[p[0]].norm() * e[p[1]].norm());
      c = std::clamp(c, -1.0, 1.0);
      (*angles)[idx++] = std::acos(c);
    }
  }
  return true;
}

}  // namespace detail

/// Worst deviation of the 24 corner angles from 90 degrees, normalized to
/// [0,1]: max((theta_max-90)/90, (90-theta_min)/90) with theta in degrees.
/// 0 for any cuboid; approaches 1 for collapsing elements; exactly 1 (with the
/// degenerate flag set by quality_report) when an edge has zero length.
inline double element_skewness(const Mesh& mesh, int elem, double tiny = 0.0) {
  const ElementEdgeFrame f = element_edge_frame(mesh, elem);
  std::array<double, 24> ang;
  if (!detail::corner_angles(f, tiny, &ang)) return 1.0;
  const auto [mn, mx] = std::minmax_element(ang.begin(), ang.end());
  const double deg_min = *mn * 180.0 / M_PI;
  const double deg_max = *mx * 180.0 / M_PI;
  return std::max((deg_max - 90.0) / 90.0, (90.0 - deg_min) / 90.0);
}

struct QualityReport {
  std::vector<int> element_ids;                       // rows (subset if region given)
  std::vector<double> skewness;                       // per row
  std::vector<std::array<double, 3>> mean_edge;       // per row, per direction
  std::vector<uint8_t> degenerate;                    // per row
  std::vector<uint8_t> inverted;                      // per row
  bool empty_region = false;
  double skew_min = 0, skew_max = 0, skew_mean = 0;
  double edge_min = 0, edge_max = 0, edge_mean = 0;
  int n_degenerate = 0, n_inverted = 0;
};

/// Per-element skewness and mean edge length per direction, with aggregate
/// statistics. `region` (optional) keeps only elements whose centroid
/// satisfies the predicate; an empty selection is reported, not an error.
template <typename RegionPred = std::nullptr_t>
inline QualityReport quality_report(const Mesh& mesh, RegionPred&& region = nullptr) {
  QualityReport q;
  const double tiny = 1e-14 * mesh_diameter(mesh);
  for (int e = 0; e < mesh.n_elements(); ++e) {
    if constexpr (!std::is_same_v<std::decay_t<RegionPred>, std::nullptr_t>) {
      if (!region(element_centroid(mesh, e))) continue;
    }
    const ElementEdgeFrame f = element_edge_frame(mesh, e);
    bool degen = false;
    std::array<double, 3> me{};
    for (int i = 0; i < 3; ++i) {
      double s = 0;
      for (int j = 0; j < 4; ++j) {
        const double n = f.v[i][j].norm();
        if (n <= tiny) degen = true;
        s += n;
      }
      me[i] = 0.25 * s;
    }
    const double vol6 = f.v_bar[0].dot(f.v_bar[1].cross(f.v_bar[2]));
    const bool inv = vol6 <= 0.0;
    q.element_ids.push_back(e);
    q.skewness.push_back(degen ? 1.0 : element_skewness(mesh, e, tiny));
    q.mean_edge.push_back(me);
    q.degenerate.push_back(degen);
    q.inverted.push_back(inv);
  }
  q.empty_region = q.element_ids.empty();
  if (!q.empty_region) {
    q.skew_min = *std::min_element(q.skewness.begin(), q.skewness.end());
    q.skew_max = *std::max_element(q.skewness.begin(), q.skewness.end());
    q.skew_mean = std::accumulate(q.skewness.begin(), q.skewness.end(), 0.0) / q.skewness.size();
    q.edge_min = std::numeric_limits<double>::max();
    q.edge_max = 0;
    double s = 0;
    for (const auto& me : q.mean_edge) {
      for (double v : me) {
        q.edge_min = std::min(q.edge_min, v);
        q.edge_max = std::max(q.edge_max, v);
        s += v;
      }
    }
    q.edge_mean = s / (3.0 * q.mean_edge.size());
    q.n_degenerate = std::accumulate(q.degenerate.begin(), q.degenerate.end(), 0);
    q.n_inverted = std::accumulate(q.inverted.begin(), q.inverted.end(), 0);
  }
  return q;
}

/// Area-weighted averaged unit normals at the nodes of a facet subset.
/// Throws when a node's facet normals cancel (averaged normal vanishes),
/// naming the node.
inline std::unordered_map<int, Vec3> extract_boundary_frame(const Mesh& mesh,
                                                            const std::vector<Facet>& facets) {
  std::unordered_map<int, Vec3> acc;
  for (const Facet& f : facets) {
    const Vec3 n = quad_midpoint_normal(mesh.nodes[f[0]], mesh.nodes[f[1]],
                                        mesh.nodes[f[2]], mesh.nodes[f[3]]);
    for (int k = 0; k < 4; ++k) acc[f[k]] += n;
  }
  const double tiny = 1e-12;
  for (auto& [node, n] : acc) {
    const double len = n.norm();
    if (len <= tiny) {
      throw InvariantError("extract_boundary_frame: averaged normal vanishes at node " +
                           std::to_string(node));
    }
    n /= len;
  }
  return acc;
}

/// Recover outward boundary facets from connectivity: element faces that occur
/// exactly once. Used for generated meshes and VTK import (which carries no
/// facet list).
inline std::vector<Facet> boundary_facets_from_elements(const Mesh& mesh) {
  std::map<std::array<int, 4>, std::pair<int, Facet>> count;  // sorted key -> (count, oriented)
  for (const Hex8& c : mesh.elements) {
    for (const auto& face : kHexFace) {
      Facet f = {c[face[0]], c[face[1]], c[face[2]], c[face[3]]};
      std::array<int, 4> key = f;
      std::sort(key.begin(), key.end());
      auto [it, inserted] = count.try_emplace(key, std::pair<int, Facet>{0, f});
      it->second.first++;
    }
  }
  std::vector<Facet> out;
  for (const auto& [key, cf] : count) {
    if (cf.first == 1) out.push_back(cf.second);
  }
  return out;
}

/// Structural invariants every loaded/constructed mesh must satisfy. Throws
/// InvariantError naming the offending entity. Degenerate or inverted element
/// GEOMETRY is allowed here (flagged by quality_report instead).
inline void validate_mesh(const Mesh& mesh) {
  const int nn = mesh.n_nodes();
  std::vector<uint8_t> used(nn, 0);
  for (int e = 0; e < mesh.n_elements(); ++e) {
    const Hex8& c = mesh.elements[e];
    for (int k = 0; k < 8; ++k) {
      if (c[k] < 0 || c[k] >= nn) {
        throw InvariantError("element " + std::to_string(e) + " references node " +
                             std::to_string(c[k]) + " out of range [0," +
                             std::to_string(nn) + ")");
      }
      used[c[k]] = 1;
      for (int l = 0; l < k; ++l) {
        if (c[l] == c[k]) {
          throw InvariantError("element " + std::to_string(e) + " repeats node " +
                               std::to_string(c[k]));
        }
      }
    }
  }
  for (size_t i = 0; i < mesh.boundary_facets.size(); ++i) {
    for (int k = 0; k < 4; ++k) {
      const int n = mesh.boundary_facets[i][k];
      if (n < 0 || n >= nn) {
        throw InvariantError("facet " + std::to_string(i) + " references node " +
                             std::to_string(n) + " out of range");
      }
      if (!used[n]) {
        throw InvariantError("facet " + std::to_string(i) + " references node " +
                             std::to_string(n) + " not used by any element");
      }
    }
  }
  for (const auto& [name, set] : mesh.node_sets) {
    for (int n : set) {
      if (n < 0 || n >= nn) {
        throw InvariantError("node set '" + name + "' references node " + std::to_string(n) +
                             " out of range");
      }
    }
  }
}

/// Facets of the mesh boundary whose four nodes all belong to the named node
/// set; how sliding surfaces are selected from mesh files.
inline std::vector<Facet> facets_from_node_set(const Mesh& mesh, const std::string& set_name) {
  auto it = mesh.node_sets.find(set_name);
  if (it == mesh.node_sets.end()) {
    throw ConfigError("unknown node set '" + set_name + "'");
  }
  std::vector<uint8_t> in(mesh.n_nodes(), 0);
  for (int n : it->second) in[n] = 1;
  std::vector<Facet> out;
  for (const Facet& f : mesh.boundary_facets) {
    if (in[f[0]] && in[f[1]] && in[f[2]] && in[f[3]]) out.push_back(f);
  }
  return out;
}

}  // namespace meshfit
