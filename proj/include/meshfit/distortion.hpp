// Element distortion potential: constraints on averaged edge lengths, edge
// equality within a direction, and corner angles, each with analytic first and
// second derivatives with respect to the 24 element dofs. Assembly into global
// residual/tangent, plus target construction (measured averages, localization
// fields, incremental blending).
#pragma once

#include <functional>
#include <vector>

#include <Eigen/Sparse>

#include "meshfit/mesh.hpp"

namespace meshfit {

using Vector24 = Eigen::Matrix<double, 24, 1>;
using Matrix24 = Eigen::Matrix<double, 24, 24>;
using Mat3x24 = Eigen::Matrix<double, 3, 24>;
using ElemPositions = Eigen::Matrix<double, 3, 8>;  // column k = node k position

/// Value, gradient and hessian of one scalar constraint over the element dofs
/// (dof ordering: 3*node+axis, matching the column-major flattening of
/// ElemPositions).
struct ConstraintEval {
  double value = 0;
  Vector24 grad = Vector24::Zero();
  Matrix24 hess = Matrix24::Zero();
};

/// Per-element target shape: edge length per direction and corner angle per
/// direction pair (order of kDirPair).
struct TargetShape {
  std::array<double, 3> edge_length{};
  std::array<double, 3> angle{};
};

/// Penalty factors for the three constraint families. `spatial_scale`, when
/// set, multiplies all three; it is evaluated once per element at the centroid
/// of the configuration the assembly was started from.
struct PenaltyParams {
  double eps_edge_avg = 1e-2;
  double eps_edge_each = 1e-2;
  double eps_angle = 1e-2;
  std::function<double(const Vec3&)> spatial_scale;

  void validate() const {
    if (eps_edge_avg < 0 || eps_edge_each < 0 || eps_angle < 0) {
      throw ConfigError("penalty factors must be nonnegative");
    }
    if (eps_edge_avg == 0 && eps_edge_each == 0 && eps_angle == 0) {
      throw ConfigError("at least one penalty factor must be positive");
    }
  }
};

namespace detail {

/// Selection matrix of an edge: v = B * x with x the flattened element dofs.
inline const Mat3x24& edge_B(int dir, int j) {
  static const std::array<std::array<Mat3x24, 4>, 3> tbl = [] {
    std::array<std::array<Mat3x24, 4>, 3> t{};
    for (int i = 0; i < 3; ++i) {
      for (int jj = 0; jj < 4; ++jj) {
        Mat3x24 b = Mat3x24::Zero();
        b.block<3, 3>(0, 3 * kHexEdge[i][jj][0]) = -Mat3::Identity();
        b.block<3, 3>(0, 3 * kHexEdge[i][jj][1]) = Mat3::Identity();
        t[i][jj] = b;
      }
    }
    return t;
  }();
  return tbl[dir][j];
}

/// Selection matrix of the averaged edge vector of a direction.
inline const Mat3x24& vbar_B(int dir) {
  static const std::array<Mat3x24, 3> tbl = [] {
    std::array<Mat3x24, 3> t{};
    for (int i = 0; i < 3; ++i) {
      Mat3x24 b = Mat3x24::Zero();
      for (int jj = 0; jj < 4; ++jj) {
        b.block<3, 3>(0, 3 * kHexEdge[i][jj][0]) -= 0.25 * Mat3::Identity();
        b.block<3, 3>(0, 3 * kHexEdge[i][jj][1]) += 0.25 * Mat3::Identity();
      }
      t[i] = b;
    }
    return t;
  }();
  return tbl[dir];
}

inline Vec3 edge_vector(const ElemPositions& X, int dir, int j) {
  return X.col(kHexEdge[dir][j][1]) - X.col(kHexEdge[dir][j][0]);
}

inline Vec3 vbar_vector(const ElemPositions& X, int dir) {
  Vec3 s = Vec3::Zero();
  for (int j = 0; j < 4; ++j) s += edge_vector(X, dir, j);
  return 0.25 * s;
}

}  // namespace detail

/// Averaged-edge-length constraint of one direction:
///   G = |v_bar| / l_r - 1.
inline ConstraintEval constraint_avg_edge(const ElemPositions& X, int dir, double l_r) {
  const Mat3x24& B = detail::vbar_B(dir);
  const Vec3 vb = detail::vbar_vector(X, dir);
  const double q = vb.squaredNorm();
  const double s = std::sqrt(q);
  ConstraintEval ce;
  ce.value = s / l_r - 1.0;
  const Vector24 Btv = B.transpose() * vb;
  ce.grad = Btv / (l_r * s);
  ce.hess = (B.transpose() * B) / (l_r * s) - Btv * Btv.transpose() / (l_r * s * q);
  return ce;
}

/// Edge-equality constraint of edge j within direction dir:
///   G = (v_j . v_j) / (v_bar . v_bar) - 1.
inline ConstraintEval constraint_equal_edges(const ElemPositions& X, int dir, int j) {
  const Mat3x24& Bj = detail::edge_B(dir, j);
  const Mat3x24& Bb = detail::vbar_B(dir);
  const Vec3 v = detail::edge_vector(X, dir, j);
  const Vec3 vb = detail::vbar_vector(X, dir);
  const double r = v.squaredNorm();
  const double q = vb.squaredNorm();
  ConstraintEval ce;
  ce.value = r / q - 1.0;
  const Vector24 rp = 2.0 * (Bj.transpose() * v);
  const Vector24 qp = 2.0 * (Bb.transpose() * vb);
  ce.grad = rp / q - (r / (q * q)) * qp;
  ce.hess = (2.0 / q) * (Bj.transpose() * Bj);
  ce.hess -= (rp * qp.transpose() + qp * rp.transpose()) / (q * q);
  ce.hess -= (2.0 * r / (q * q)) * (Bb.transpose() * Bb);
  ce.hess += (2.0 * r / (q * q * q)) * (qp * qp.transpose());
  return ce;
}

/// Corner-angle constraint at a node for a direction pair:
///   G = cos(angle between the two emanating edges) - cos(theta_r).
/// `pair` indexes kDirPair.
inline ConstraintEval constraint_angle(const ElemPositions& X, int node, int pair,
                                       double theta_r) {
  const int m = kDirPair[pair][0];
  const int n = kDirPair[pair][1];
  const NodeEdgeRef rm = kNodeEdge[node][m];
  const NodeEdgeRef rn = kNodeEdge[node][n];
  // Emanating versions: sign flips when the node is the edge head, so the
  // constraint measures the included angle at the corner.
  const Mat3x24 Bu = rm.sign * detail::edge_B(m, rm.edge);
  const Mat3x24 Bw = rn.sign * detail::edge_B(n, rn.edge);
  const Vec3 u = rm.sign * detail::edge_vector(X, m, rm.edge);
  const Vec3 w = rn.sign * detail::edge_vector(X, n, rn.edge);

  const double s = u.dot(w);
  const double a = u.squaredNorm();
  const double b = w.squaredNorm();
  const double ia = 1.0 / std::sqrt(a);
  const double ib = 1.0 / std::sqrt(b);

  ConstraintEval ce;
  ce.value = s * ia * ib - std::cos(theta_r);

  const Vector24 sp = Bu.transpose() * w + Bw.transpose() * u;
  const Vector24 ap = 2.0 * (Bu.transpose() * u);
  const Vector24 bp = 2.0 * (Bw.transpose() * w);

  ce.grad = ia * ib * sp - 0.5 * s * ia * ia * ia * ib * ap - 0.5 * s * ia * ib * ib * ib * bp;

  const double ia3 = ia * ia * ia;
  const double ib3 = ib * ib * ib;
  ce.hess = ia * ib * (Bu.transpose() * Bw + Bw.transpose() * Bu);
  ce.hess -= 0.5 * ia3 * ib * (sp * ap.transpose() + ap * sp.transpose());
  ce.hess -= 0.5 * ia * ib3 * (sp * bp.transpose() + bp * sp.transpose());
  ce.hess -= s * ia3 * ib * (Bu.transpose() * Bu);
  ce.hess -= s * ia * ib3 * (Bw.transpose() * Bw);
  ce.hess += 0.75 * s * ia3 * ia * ia * ib * (ap * ap.transpose());
  ce.hess += 0.75 * s * ia * ib3 * ib * ib * (bp * bp.transpose());
  ce.hess += 0.25 * s * ia3 * ib3 * (ap * bp.transpose() + bp * ap.transpose());
  return ce;
}

namespace detail {

inline void check_element_frame(const ElemPositions& X, double tiny, int elem_id) {
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 4; ++j) {
      if (edge_vector(X, i, j).norm() <= tiny) {
        throw DegenerateElementError("element " + std::to_string(elem_id) +
                                     ": edge of direction " + std::to_string(i + 1) +
                                     " collapsed below the degeneracy guard");
      }
    }
    if (vbar_vector(X, i).norm() <= tiny) {
      throw DegenerateElementError("element " + std::to_string(elem_id) +
                                   ": averaged edge vector of direction " +
                                   std::to_string(i + 1) +
                                   " collapsed below the degeneracy guard");
    }
  }
}

}  // namespace detail

/// Contribution of one element: potential, 24-dof residual f = dpi/dd and
/// consistent tangent K = d2pi/dd2 for
///   pi = 1/2 eps_avg sum_i G_avg^2 + 1/2 eps_each sum_ij G_each^2
///      + 1/2 eps_ang sum_corners sum_pairs G_ang^2.
struct ElementSystem {
  double potential = 0;
  Vector24 residual = Vector24::Zero();
  Matrix24 tangent = Matrix24::Zero();
};

inline ElementSystem element_system(const ElemPositions& X, const TargetShape& target,
                                    double eps_avg, double eps_each, double eps_ang,
                                    double tiny = 0.0, int elem_id = -1,
                                    bool exact_hessian = true) {
  if (tiny > 0) detail::check_element_frame(X, tiny, elem_id);
  ElementSystem sys;
  // With exact_hessian off, the constraint-curvature term is dropped, leaving
  // the positive-semidefinite Gauss-Newton tangent (a guaranteed descent
  // model for this sum-of-squares potential).
  auto add = [&sys, exact_hessian](const ConstraintEval& ce, double eps) {
    if (eps == 0) return;
    sys.potential += 0.5 * eps * ce.value * ce.value;
    sys.residual += eps * ce.value * ce.grad;
    sys.tangent += eps * (ce.grad * ce.grad.transpose());
    if (exact_hessian) sys.tangent += eps * ce.value * ce.hess;
  };
  for (int i = 0; i < 3; ++i) {
    if (eps_avg != 0) add(constraint_avg_edge(X, i, target.edge_length[i]), eps_avg);
    if (eps_each != 0) {
      for (int j = 0; j < 4; ++j) add(constraint_equal_edges(X, i, j), eps_each);
    }
  }
  if (eps_ang != 0) {
    for (int node = 0; node < 8; ++node) {
      for (int pair = 0; pair < 3; ++pair) {
        add(constraint_angle(X, node, pair, target.angle[pair]), eps_ang);
      }
    }
  }
  return sys;
}

/// Potential only (used by tests and the optional step-halving globalization).
inline double element_potential(const ElemPositions& X, const TargetShape& target,
                                double eps_avg, double eps_each, double eps_ang,
                                double tiny = 0.0, int elem_id = -1) {
  if (tiny > 0) detail::check_element_frame(X, tiny, elem_id);
  double pi = 0;
  for (int i = 0; i < 3; ++i) {
    if (eps_avg != 0) {
      const double g = detail::vbar_vector(X, i).norm() / target.edge_length[i] - 1.0;
      pi += 0.5 * eps_avg * g * g;
    }
    if (eps_each != 0) {
      const double q = detail::vbar_vector(X, i).squaredNorm();
      for (int j = 0; j < 4; ++j) {
        const double g = detail::edge_vector(X, i, j).squaredNorm() / q - 1.0;
        pi += 0.5 * eps_each * g * g;
      }
    }
  }
  if (eps_ang != 0) {
    for (int node = 0; node < 8; ++node) {
      for (int pair = 0; pair < 3; ++pair) {
        const int m = kDirPair[pair][0];
        const int n = kDirPair[pair][1];
        const NodeEdgeRef rm = kNodeEdge[node][m];
        const NodeEdgeRef rn = kNodeEdge[node][n];
        const Vec3 u = rm.sign * detail::edge_vector(X, m, rm.edge);
        const Vec3 w = rn.sign * detail::edge_vector(X, n, rn.edge);
        const double g = u.dot(w) / (u.norm() * w.norm()) - std::cos(target.angle[pair]);
        pi += 0.5 * eps_ang * g * g;
      }
    }
  }
  return pi;
}

inline ElemPositions gather_positions(const std::vector<Vec3>& positions, const Hex8& conn) {
  ElemPositions X;
  for (int k = 0; k < 8; ++k) X.col(k) = positions[conn[k]];
  return X;
}

/// Global distortion system at the given nodal positions. The effective
/// penalties per element include the optional spatial scale evaluated at the
/// REFERENCE centroid (`scale_points`, one per element), fixed for the whole
/// solve. Triplets accumulate element tangents; `f` is the full 3N residual.
struct GlobalSystem {
  double potential = 0;
  Eigen::VectorXd f;
  std::vector<Eigen::Triplet<double>> K;
};

inline GlobalSystem assemble_distortion(const Mesh& mesh, const std::vector<Vec3>& positions,
                                        const std::vector<TargetShape>& targets,
                                        const PenaltyParams& penalties,
                                        const std::vector<Vec3>& scale_points,
                                        double tiny, bool exact_hessian = true) {
  penalties.validate();
  GlobalSystem g;
  g.f = Eigen::VectorXd::Zero(3 * positions.size());
  g.K.reserve(mesh.n_elements() * 24 * 24);
  for (int e = 0; e < mesh.n_elements(); ++e) {
    double scale = 1.0;
    if (penalties.spatial_scale) scale = penalties.spatial_scale(scale_points[e]);
    const ElemPositions X = gather_positions(positions, mesh.elements[e]);
    const ElementSystem sys =
        element_system(X, targets[e], scale * penalties.eps_edge_avg,
                       scale * penalties.eps_edge_each, scale * penalties.eps_angle, tiny, e,
                       exact_hessian);
    g.potential += sys.potential;
    const Hex8& c = mesh.elements[e];
    for (int p = 0; p < 8; ++p) {
      for (int a = 0; a < 3; ++a) g.f[3 * c[p] + a] += sys.residual[3 * p + a];
    }
    for (int p = 0; p < 8; ++p) {
      for (int q = 0; q < 8; ++q) {
        for (int a = 0; a < 3; ++a) {
          for (int b = 0; b < 3; ++b) {
            const double v = sys.tangent(3 * p + a, 3 * q + b);
            if (v != 0.0) g.K.emplace_back(3 * c[p] + a, 3 * c[q] + b, v);
          }
        }
      }
    }
  }
  return g;
}

inline double assemble_distortion_potential(const Mesh& mesh, const std::vector<Vec3>& positions,
                                            const std::vector<TargetShape>& targets,
                                            const PenaltyParams& penalties,
                                            const std::vector<Vec3>& scale_points, double tiny) {
  double pi = 0;
  for (int e = 0; e < mesh.n_elements(); ++e) {
    double scale = 1.0;
    if (penalties.spatial_scale) scale = penalties.spatial_scale(scale_points[e]);
    const ElemPositions X = gather_positions(positions, mesh.elements[e]);
    pi += element_potential(X, targets[e], scale * penalties.eps_edge_avg,
                            scale * penalties.eps_edge_each, scale * penalties.eps_angle, tiny, e);
  }
  return pi;
}

/// Mesh-wide mean of |v_bar| per direction; the uniform regularization target.
inline std::array<double, 3> average_target_lengths(const Mesh& mesh) {
  std::array<double, 3> avg{};
  for (int e = 0; e < mesh.n_elements(); ++e) {
    const ElementEdgeFrame f = element_edge_frame(mesh, e);
    for (int i = 0; i < 3; ++i) avg[i] += f.v_bar[i].norm();
  }
  for (double& a : avg) a /= std::max(1, mesh.n_elements());
  return avg;
}

/// Element target shape as measured on the current mesh: averaged edge lengths
/// and the angles enclosed by the averaged direction vectors.
inline TargetShape measure_target_shape(const Mesh& mesh, int elem) {
  const ElementEdgeFrame f = element_edge_frame(mesh, elem);
  TargetShape t;
  for (int i = 0; i < 3; ++i) t.edge_length[i] = f.v_bar[i].norm();
  for (int p = 0; p < 3; ++p) {
    const Vec3& u = f.v_bar[kDirPair[p][0]];
    const Vec3& w = f.v_bar[kDirPair[p][1]];
    const double c = std::clamp(u.dot(w) / (u.norm() * w.norm()), -1.0, 1.0);
    t.angle[p] = std::acos(c);
  }
  return t;
}

/// Linear blend between the measured start shape and the goal:
/// value_alpha = start + alpha * (goal - start). alpha=0 reproduces the start
/// exactly; alpha=1 the goal.
inline TargetShape increment_targets(const TargetShape& start, const TargetShape& goal,
                                     double alpha) {
  TargetShape t;
  for (int i = 0; i < 3; ++i) {
    t.edge_length[i] = start.edge_length[i] + alpha * (goal.edge_length[i] - start.edge_length[i]);
    t.angle[i] = start.angle[i] + alpha * (goal.angle[i] - start.angle[i]);
  }
  return t;
}

/// Spatial multiplier fields for localized refitting.
///   peak: f(X) = 1 + exp(-c d^2)   (largest at the center, f(center) = 2)
///   well: f(X) = 2 - exp(-c d^2)   (smallest at the center)
/// where d^2 is |X - X0|^2 for the point variant, and for the cylindrical
/// variant (r_n - r_ref)^2 + (z - z_ref)^2 with r_n = x^2 + y^2 (the shipped
/// squared-distance convention of the cylindrical band).
struct LocalizationField {
  enum class Variant { point, cylindrical };
  enum class Profile { peak, well };
  Variant variant = Variant::point;
  Profile profile = Profile::peak;
  double c = 0.1;
  Vec3 center = Vec3::Zero();   // point variant
  double r_ref = 0;             // cylindrical variant
  double z_ref = 0;

  double dist2(const Vec3& x) const {
    if (variant == Variant::point) return (x - center).squaredNorm();
    const double rn = x[0] * x[0] + x[1] * x[1];
    const double dr = rn - r_ref;
    const double dz = x[2] - z_ref;
    return dr * dr + dz * dz;
  }
  /// Decay factor in (0,1]; what region band filters select on.
  double decay(const Vec3& x) const { return std::exp(-c * dist2(x)); }
  double f(const Vec3& x) const {
    return profile == Profile::peak ? 1.0 + decay(x) : 2.0 - decay(x);
  }
};

}  // namespace meshfit
