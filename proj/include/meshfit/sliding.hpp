// Mesh sliding on boundary surfaces: slave facets carry weighted nodal gaps
// against a frozen auxiliary replica of the surface, enforced by a quadratic
// penalty. Gaps are measured along a normal ray per quadrature point; the ray
// directions and the mortar integration weights are frozen at the
// configuration the interface was built from, so the penalty potential is a
// smooth function of the slave positions with exact first and second
// derivatives.
#pragma once

#include <unordered_map>

#include <Eigen/Sparse>

#include "meshfit/mesh.hpp"

namespace meshfit {

struct SlidingInterface {
  std::vector<Facet> slave_facets;
  std::vector<int> pinned;                      // slave nodes excluded from gap equations
  std::vector<int> gap_nodes;                   // unpinned slave nodes, sorted
  std::unordered_map<int, int> gap_index;       // node -> row in gap vector
  std::unordered_map<int, Vec3> node_normal;    // averaged unit normals at slave nodes
  std::vector<std::array<Vec3, 4>> aux_facets;  // frozen replica, one per slave facet
  std::vector<std::array<Vec3, 4>> gp_ray;      // frozen unit ray direction per facet x gp
  std::vector<std::array<double, 4>> gp_weight; // frozen w * dA per facet x gp
  std::vector<double> facet_diameter;           // projection search tolerance scale
  double eps_m = 2e8;
  double search_tol_scale = 0.5;
};

namespace detail {

inline Vec3 bilinear_point(const std::array<Vec3, 4>& q, double u, double v) {
  const auto n = quad_shape(u, v);
  return n[0] * q[0] + n[1] * q[1] + n[2] * q[2] + n[3] * q[3];
}

inline Vec3 bilinear_du(const std::array<Vec3, 4>& q, double u, double v) {
  const auto n = quad_shape_du(u, v);
  return n[0] * q[0] + n[1] * q[1] + n[2] * q[2] + n[3] * q[3];
}

inline Vec3 bilinear_dv(const std::array<Vec3, 4>& q, double u, double v) {
  const auto n = quad_shape_dv(u, v);
  return n[0] * q[0] + n[1] * q[1] + n[2] * q[2] + n[3] * q[3];
}

/// d2A/dudv of the bilinear patch (constant twist vector).
inline Vec3 bilinear_twist(const std::array<Vec3, 4>& q) {
  return 0.25 * (q[0] - q[1] + q[2] - q[3]);
}

struct RayHit {
  bool ok = false;
  double t = 0, u = 0, v = 0;
};

/// Intersection of the ray p + t*dir with a bilinear patch by Newton on
/// (t,u,v). `scale` sets the convergence tolerance.
inline RayHit intersect_bilinear(const std::array<Vec3, 4>& q, const Vec3& p, const Vec3& dir,
                                 double u0, double v0, double scale) {
  RayHit hit;
  double t = 0, u = u0, v = v0;
  const double tol = 1e-13 * std::max(scale, 1e-300);
  for (int it = 0; it < 30; ++it) {
    const Vec3 F = p + t * dir - bilinear_point(q, u, v);
    if (F.norm() <= tol) {
      hit.ok = true;
      break;
    }
    Mat3 J;
    J.col(0) = dir;
    J.col(1) = -bilinear_du(q, u, v);
    J.col(2) = -bilinear_dv(q, u, v);
    const Vec3 d = J.fullPivLu().solve(-F);
    if (!d.allFinite()) return hit;
    t += d[0];
    u += d[1];
    v += d[2];
    if (std::abs(u) > 10 || std::abs(v) > 10) return hit;  // diverging
  }
  hit.t = t;
  hit.u = u;
  hit.v = v;
  return hit;
}

/// First and second derivatives of the ray parameter t with respect to the
/// ray origin, at a converged intersection.
struct RaySensitivity {
  Vec3 dt;
  Mat3 d2t;
};

inline RaySensitivity ray_sensitivity(const std::array<Vec3, 4>& q, const Vec3& dir, double u,
                                      double v) {
  const Vec3 Au = bilinear_du(q, u, v);
  const Vec3 Av = bilinear_dv(q, u, v);
  const Vec3 tw = bilinear_twist(q);
  const Vec3 m = Au.cross(Av);
  const double denom = m.dot(dir);
  if (std::abs(denom) < 1e-14 * m.norm()) {
    throw ProjectionError("sliding projection: ray is tangent to the auxiliary surface");
  }
  Mat3 J;
  J.col(0) = dir;
  J.col(1) = -Au;
  J.col(2) = -Av;
  const Mat3 G = -J.inverse();  // rows: dt/dp, du/dp, dv/dp
  RaySensitivity s;
  s.dt = G.row(0).transpose();
  const Vec3 mu = Au.cross(tw);  // dm/du
  const Vec3 mv = tw.cross(Av);  // dm/dv
  const auto dq = [&](const Vec3& mw) -> Vec3 {
    return -mw / denom + m * (mw.dot(dir) / (denom * denom));
  };
  const Mat3 H = dq(mu) * G.row(1) + dq(mv) * G.row(2);
  s.d2t = 0.5 * (H + H.transpose());
  return s;
}

}  // namespace detail

/// Assemble a sliding interface from a consistently oriented facet subset of
/// the mesh boundary, at the current (reference) node positions. `pinned`
/// lists slave nodes excluded from gap equations (corners, Dirichlet nodes).
/// Errors: an unpinned node with vanishing averaged normal, or an unpinned
/// node at a sharp crease (adjacent facet normals spanning more than
/// `corner_angle_deg`), both of which demand pinning.
inline SlidingInterface build_interface(const Mesh& mesh, const std::vector<Facet>& facets,
                                        const std::vector<int>& pinned, double eps_m,
                                        double corner_angle_deg = 45.0) {
  if (facets.empty()) throw ConfigError("sliding interface has no facets");
  if (eps_m <= 0) throw ConfigError("sliding penalty eps_m must be positive");
  SlidingInterface si;
  si.slave_facets = facets;
  si.pinned = pinned;
  si.eps_m = eps_m;
  std::vector<uint8_t> is_pinned(mesh.n_nodes(), 0);
  for (int n : pinned) is_pinned[n] = 1;

  // Averaged normals and the crease check from the facet midpoint normals.
  std::unordered_map<int, Vec3> acc;
  std::unordered_map<int, std::vector<Vec3>> adjacent;
  for (const Facet& f : facets) {
    const Vec3 n = quad_midpoint_normal(mesh.nodes[f[0]], mesh.nodes[f[1]], mesh.nodes[f[2]],
                                        mesh.nodes[f[3]]);
    for (int k = 0; k < 4; ++k) {
      acc.try_emplace(f[k], Vec3::Zero()).first->second += n;
      adjacent[f[k]].push_back(n.normalized());
    }
  }
  const double cos_corner = std::cos(corner_angle_deg * M_PI / 180.0);
  for (auto& [node, n] : acc) {
    const double len = n.norm();
    if (!is_pinned[node]) {
      if (len <= 1e-12) {
        throw InvariantError("sliding interface: averaged normal vanishes at unpinned node " +
                             std::to_string(node) + "; pin it");
      }
      const auto& adj = adjacent[node];
      for (size_t a = 0; a < adj.size(); ++a) {
        for (size_t b = a + 1; b < adj.size(); ++b) {
          if (adj[a].dot(adj[b]) < cos_corner) {
            throw InvariantError("sliding interface: node " + std::to_string(node) +
                                 " sits on a crease sharper than " +
                                 std::to_string(corner_angle_deg) +
                                 " degrees and must be pinned");
          }
        }
      }
    }
    si.node_normal[node] = len > 1e-12 ? Vec3(n / len) : Vec3::Zero();
  }

  for (const auto& [node, n] : si.node_normal) {
    if (!is_pinned[node]) si.gap_nodes.push_back(node);
  }
  std::sort(si.gap_nodes.begin(), si.gap_nodes.end());
  for (size_t i = 0; i < si.gap_nodes.size(); ++i) {
    si.gap_index[si.gap_nodes[i]] = static_cast<int>(i);
  }

  // Frozen auxiliary replica and quadrature data.
  si.aux_facets.reserve(facets.size());
  si.gp_ray.resize(facets.size());
  si.gp_weight.resize(facets.size());
  si.facet_diameter.reserve(facets.size());
  const auto& gauss = quad_gauss_2x2();
  for (size_t fi = 0; fi < facets.size(); ++fi) {
    const Facet& f = facets[fi];
    const std::array<Vec3, 4> q = {mesh.nodes[f[0]], mesh.nodes[f[1]], mesh.nodes[f[2]],
                                   mesh.nodes[f[3]]};
    si.aux_facets.push_back(q);
    si.facet_diameter.push_back(std::max((q[2] - q[0]).norm(), (q[3] - q[1]).norm()));
    for (int g = 0; g < 4; ++g) {
      const double u = gauss[g][0], v = gauss[g][1];
      const auto n = quad_shape(u, v);
      Vec3 ray = Vec3::Zero();
      for (int k = 0; k < 4; ++k) ray += n[k] * si.node_normal.at(f[k]);
      const double len = ray.norm();
      if (len <= 1e-12) {
        throw InvariantError("sliding interface: normal field vanishes inside facet " +
                             std::to_string(fi));
      }
      si.gp_ray[fi][g] = ray / len;
      si.gp_weight[fi][g] = detail::bilinear_du(q, u, v).cross(detail::bilinear_dv(q, u, v)).norm();
    }
  }
  return si;
}

/// Raw projection data of one slave quadrature point.
struct GapPointData {
  double t = 0;    // signed ray parameter = pointwise gap g_n
  Vec3 dt = Vec3::Zero();
  Mat3 d2t = Mat3::Zero();
};

struct WeightedGaps {
  Eigen::VectorXd values;                          // one per gap node
  std::vector<std::array<GapPointData, 4>> points; // per facet x gp, for assembly reuse
};

namespace detail {

inline GapPointData project_point(const SlidingInterface& si, size_t facet_idx, int gp,
                                  const Vec3& p) {
  const Vec3& dir = si.gp_ray[facet_idx][gp];
  const double tol_t = si.search_tol_scale * si.facet_diameter[facet_idx];
  const auto& gauss = quad_gauss_2x2();
  const double scale = si.facet_diameter[facet_idx];

  auto accept = [&](const RayHit& h) {
    return h.ok && std::abs(h.u) <= 1.0 + 1e-9 && std::abs(h.v) <= 1.0 + 1e-9 &&
           std::abs(h.t) <= tol_t;
  };

  RayHit best;
  size_t best_facet = facet_idx;
  {
    const RayHit h = intersect_bilinear(si.aux_facets[facet_idx], p, dir, gauss[gp][0],
                                        gauss[gp][1], scale);
    if (accept(h)) {
      best = h;
    }
  }
  if (!best.ok) {
    // The point slid off its paired patch: search every candidate within reach.
    for (size_t fi = 0; fi < si.aux_facets.size(); ++fi) {
      if (fi == facet_idx) continue;
      const auto& q = si.aux_facets[fi];
      const Vec3 center = 0.25 * (q[0] + q[1] + q[2] + q[3]);
      const double reach = si.facet_diameter[fi] + tol_t;
      if ((p - center).norm() > reach) continue;
      const RayHit h = intersect_bilinear(q, p, dir, 0, 0, si.facet_diameter[fi]);
      if (accept(h) && (!best.ok || std::abs(h.t) < std::abs(best.t))) {
        best = h;
        best_facet = fi;
      }
    }
  }
  if (!best.ok) {
    throw ProjectionError("sliding projection failed for quadrature point " +
                          std::to_string(gp) + " of slave facet " + std::to_string(facet_idx) +
                          " (no auxiliary facet within half a facet diameter)");
  }
  GapPointData d;
  d.t = best.t;
  const RaySensitivity s = ray_sensitivity(si.aux_facets[best_facet], dir, best.u, best.v);
  d.dt = s.dt;
  d.d2t = s.d2t;
  return d;
}

}  // namespace detail

/// Weighted nodal gaps at the given slave positions:
///   gtilde_j = sum over adjacent facets of sum_gp w*dA0 * N_j(gp) * g_n(gp),
/// with g_n the signed ray gap (negative when the surface moved outward along
/// the frozen normal).
inline WeightedGaps weighted_gaps(const SlidingInterface& si, const std::vector<Vec3>& positions) {
  WeightedGaps wg;
  wg.values = Eigen::VectorXd::Zero(si.gap_nodes.size());
  wg.points.resize(si.slave_facets.size());
  const auto& gauss = quad_gauss_2x2();
  for (size_t fi = 0; fi < si.slave_facets.size(); ++fi) {
    const Facet& f = si.slave_facets[fi];
    for (int g = 0; g < 4; ++g) {
      const auto n = quad_shape(gauss[g][0], gauss[g][1]);
      Vec3 p = Vec3::Zero();
      for (int k = 0; k < 4; ++k) p += n[k] * positions[f[k]];
      const GapPointData d = detail::project_point(si, fi, g, p);
      wg.points[fi][g] = d;
      const double wda = si.gp_weight[fi][g];
      for (int k = 0; k < 4; ++k) {
        const auto it = si.gap_index.find(f[k]);
        if (it != si.gap_index.end()) wg.values[it->second] += wda * n[k] * d.t;
      }
    }
  }
  return wg;
}

/// Penalty potential pi_m = 1/2 eps_m sum_j gtilde_j^2 with exact residual and
/// tangent contributions scattered into the global system. With exact_hessian
/// off, the gap-curvature term is dropped, leaving the positive-semidefinite
/// Gauss-Newton tangent.
inline double assemble_sliding(const SlidingInterface& si, const std::vector<Vec3>& positions,
                               Eigen::VectorXd& f, std::vector<Eigen::Triplet<double>>& K,
                               bool exact_hessian = true) {
  const WeightedGaps wg = weighted_gaps(si, positions);
  const double eps = si.eps_m;
  const auto& gauss = quad_gauss_2x2();

  // Gradients of each weighted gap, supported on the nodes of its facets.
  std::vector<std::vector<std::pair<int, Vec3>>> dg(si.gap_nodes.size());
  auto add_grad = [&](int row, int node, const Vec3& v) {
    for (auto& [n, acc] : dg[row]) {
      if (n == node) {
        acc += v;
        return;
      }
    }
    dg[row].emplace_back(node, v);
  };

  for (size_t fi = 0; fi < si.slave_facets.size(); ++fi) {
    const Facet& fc = si.slave_facets[fi];
    for (int g = 0; g < 4; ++g) {
      const auto n = quad_shape(gauss[g][0], gauss[g][1]);
      const GapPointData& d = wg.points[fi][g];
      const double wda = si.gp_weight[fi][g];
      // sum_j gtilde_j * w * N_j over this facet's gap nodes, for the
      // curvature term of the tangent.
      double s_gap = 0;
      for (int j = 0; j < 4; ++j) {
        const auto it = si.gap_index.find(fc[j]);
        if (it == si.gap_index.end()) continue;
        const double cj = wda * n[j];
        s_gap += wg.values[it->second] * cj;
        for (int k = 0; k < 4; ++k) add_grad(it->second, fc[k], cj * n[k] * d.dt);
      }
      if (exact_hessian && s_gap != 0) {
        for (int k = 0; k < 4; ++k) {
          for (int l = 0; l < 4; ++l) {
            const Mat3 blk = eps * s_gap * n[k] * n[l] * d.d2t;
            for (int a = 0; a < 3; ++a) {
              for (int b = 0; b < 3; ++b) {
                if (blk(a, b) != 0) K.emplace_back(3 * fc[k] + a, 3 * fc[l] + b, blk(a, b));
              }
            }
          }
        }
      }
    }
  }

  for (size_t row = 0; row < dg.size(); ++row) {
    const double gj = wg.values[row];
    for (const auto& [node, v] : dg[row]) {
      f.segment<3>(3 * node) += eps * gj * v;
    }
    for (const auto& [nk, vk] : dg[row]) {
      for (const auto& [nl, vl] : dg[row]) {
        const Mat3 blk = eps * vk * vl.transpose();
        for (int a = 0; a < 3; ++a) {
          for (int b = 0; b < 3; ++b) {
            if (blk(a, b) != 0) K.emplace_back(3 * nk + a, 3 * nl + b, blk(a, b));
          }
        }
      }
    }
  }
  return 0.5 * eps * wg.values.squaredNorm();
}

/// Potential only.
inline double sliding_potential(const SlidingInterface& si, const std::vector<Vec3>& positions) {
  return 0.5 * si.eps_m * weighted_gaps(si, positions).values.squaredNorm();
}

/// Geometric distance of each unpinned slave node to the frozen auxiliary
/// surface (closest point over nearby patches); the diagnostic behind the
/// boundary-preservation checks.
struct BoundaryDistanceReport {
  std::vector<int> nodes;
  std::vector<double> distance;
  double max_distance = 0;
};

inline BoundaryDistanceReport boundary_distance_report(const SlidingInterface& si,
                                                       const std::vector<Vec3>& positions) {
  BoundaryDistanceReport rep;
  for (int node : si.gap_nodes) {
    const Vec3 p = positions[node];
    double best = std::numeric_limits<double>::max();
    for (size_t fi = 0; fi < si.aux_facets.size(); ++fi) {
      const auto& q = si.aux_facets[fi];
      const Vec3 center = 0.25 * (q[0] + q[1] + q[2] + q[3]);
      if ((p - center).norm() > si.facet_diameter[fi] + best) continue;
      // Projected Newton for the closest point on the bilinear patch.
      double u = 0, v = 0;
      for (int it = 0; it < 25; ++it) {
        const Vec3 d = detail::bilinear_point(q, u, v) - p;
        const Vec3 Au = detail::bilinear_du(q, u, v);
        const Vec3 Av = detail::bilinear_dv(q, u, v);
        const Vec3 tw = detail::bilinear_twist(q);
        Eigen::Vector2d grad(Au.dot(d), Av.dot(d));
        Eigen::Matrix2d H;
        H << Au.dot(Au), Au.dot(Av) + d.dot(tw), Au.dot(Av) + d.dot(tw), Av.dot(Av);
        Eigen::Vector2d step = H.fullPivLu().solve(-grad);
        if (!step.allFinite()) break;
        u = std::clamp(u + step[0], -1.0, 1.0);
        v = std::clamp(v + step[1], -1.0, 1.0);
        if (step.norm() < 1e-14) break;
      }
      best = std::min(best, (detail::bilinear_point(q, u, v) - p).norm());
    }
    rep.nodes.push_back(node);
    rep.distance.push_back(best);
    rep.max_distance = std::max(rep.max_distance, best);
  }
  return rep;
}

}  // namespace meshfit
