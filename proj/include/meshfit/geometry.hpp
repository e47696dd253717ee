// meshfit: r-adaptive mesh refitting and field transfer for hex8 meshes.
//
// Fixed geometric conventions shared by every module: hex8 node ordering,
// the grouping of the 12 element edges into three parametric directions,
// quad facet shape functions and Gauss rules.
#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace meshfit {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Base type for all errors thrown by this library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ParseError : Error { using Error::Error; };
struct InvariantError : Error { using Error::Error; };
struct DegenerateElementError : Error { using Error::Error; };
struct ProjectionError : Error { using Error::Error; };
struct SingularSystemError : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };
struct TransferError : Error { using Error::Error; };

// Hex8 node ordering follows the usual isoparametric brick: node k sits at
// parametric corner (xi,eta,zeta) = kHexCorner[k], zeta-bottom face first.
inline constexpr std::array<std::array<int, 3>, 8> kHexCorner = {{
    {-1, -1, -1}, {+1, -1, -1}, {+1, +1, -1}, {-1, +1, -1},
    {-1, -1, +1}, {+1, -1, +1}, {+1, +1, +1}, {-1, +1, +1},
}};

// The 12 edges grouped by parametric direction. kHexEdge[i][j] = {tail, head}
// with the head toward the positive axis, so all four vectors of a direction
// point the same way and may be averaged meaningfully.
inline constexpr std::array<std::array<std::array<int, 2>, 4>, 3> kHexEdge = {{
    {{{0, 1}, {3, 2}, {4, 5}, {7, 6}}},
    {{{0, 3}, {1, 2}, {4, 7}, {5, 6}}},
    {{{0, 4}, {1, 5}, {2, 6}, {3, 7}}},
}};

/// Which edge of direction `dir` touches a given node, and whether the edge
/// emanates from it (+1, node is the tail) or ends in it (-1).
struct NodeEdgeRef {
  int edge;     // index j in kHexEdge[dir]
  double sign;  // +1 tail, -1 head
};

inline constexpr std::array<std::array<NodeEdgeRef, 3>, 8> kNodeEdge = {{
    {{{0, +1.0}, {0, +1.0}, {0, +1.0}}},
    {{{0, -1.0}, {1, +1.0}, {1, +1.0}}},
    {{{1, -1.0}, {1, -1.0}, {2, +1.0}}},
    {{{1, +1.0}, {0, -1.0}, {3, +1.0}}},
    {{{2, +1.0}, {2, +1.0}, {0, -1.0}}},
    {{{2, -1.0}, {3, +1.0}, {1, -1.0}}},
    {{{3, -1.0}, {3, -1.0}, {2, -1.0}}},
    {{{3, +1.0}, {2, -1.0}, {3, -1.0}}},
}};

// Element faces with outward orientation (counterclockwise seen from outside).
inline constexpr std::array<std::array<int, 4>, 6> kHexFace = {{
    {0, 3, 2, 1},  // -zeta
    {4, 5, 6, 7},  // +zeta
    {0, 1, 5, 4},  // -eta
    {3, 7, 6, 2},  // +eta
    {0, 4, 7, 3},  // -xi
    {1, 2, 6, 5},  // +xi
}};

/// The three unordered direction pairs used by angle constraints and targets,
/// in fixed order (1,2), (1,3), (2,3) (zero-based (0,1), (0,2), (1,2)).
inline constexpr std::array<std::array<int, 2>, 3> kDirPair = {{{0, 1}, {0, 2}, {1, 2}}};

/// Bilinear quad shape functions at (u,v) in [-1,1]^2, node order CCW.
inline std::array<double, 4> quad_shape(double u, double v) {
  return {0.25 * (1 - u) * (1 - v), 0.25 * (1 + u) * (1 - v),
          0.25 * (1 + u) * (1 + v), 0.25 * (1 - u) * (1 + v)};
}

inline std::array<double, 4> quad_shape_du(double u, double v) {
  (void)u;
  return {-0.25 * (1 - v), 0.25 * (1 - v), 0.25 * (1 + v), -0.25 * (1 + v)};
}

inline std::array<double, 4> quad_shape_dv(double u, double v) {
  (void)v;
  return {-0.25 * (1 - u), -0.25 * (1 + u), 0.25 * (1 + u), 0.25 * (1 - u)};
}

/// 2x2 Gauss points on [-1,1]^2 (weight 1 each).
inline const std::array<std::array<double, 2>, 4>& quad_gauss_2x2() {
  static const double g = 1.0 / std::sqrt(3.0);
  static const std::array<std::array<double, 2>, 4> pts = {{{-g, -g}, {g, -g}, {g, g}, {-g, g}}};
  return pts;
}

/// 2x2x2 Gauss points on the hex reference cube (weight 1 each).
inline const std::array<std::array<double, 3>, 8>& hex_gauss_2x2x2() {
  static const double g = 1.0 / std::sqrt(3.0);
  static const std::array<std::array<double, 3>, 8> pts = {{
      {-g, -g, -g}, {g, -g, -g}, {g, g, -g}, {-g, g, -g},
      {-g, -g, g}, {g, -g, g}, {g, g, g}, {-g, g, g},
  }};
  return pts;
}

/// Trilinear hex shape functions at (xi,eta,zeta) in [-1,1]^3.
inline std::array<double, 8> hex_shape(double xi, double eta, double zeta) {
  std::array<double, 8> n{};
  for (int k = 0; k < 8; ++k) {
    n[k] = 0.125 * (1 + kHexCorner[k][0] * xi) * (1 + kHexCorner[k][1] * eta) *
           (1 + kHexCorner[k][2] * zeta);
  }
  return n;
}

/// Unnormalized midpoint normal of a bilinear quad a,b,c,d (CCW order):
/// cross of the two covariant directions at (u,v) = (0,0).
inline Vec3 quad_midpoint_normal(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
  const Vec3 xu = 0.25 * ((b - a) + (c - d));
  const Vec3 xv = 0.25 * ((d - a) + (c - b));
  return xu.cross(xv);
}

}  // namespace meshfit
