// Built-in demo meshes: tensor grids with seeded unequal spacing, a truncated
// pyramid, and a block with a sheared boundary layer. All generators are
// deterministic for a given seed and record their parameters in the mesh file
// header comment.
#pragma once

#include <random>
#include <sstream>

#include "meshfit/io.hpp"
#include "meshfit/mesh.hpp"

namespace meshfit {

/// Tensor-product hex grid from per-axis node coordinates. Emits boundary
/// facets and the six face node sets x0,x1,y0,y1,z0,z1.
inline Mesh tensor_grid(const std::vector<double>& xs, const std::vector<double>& ys,
                        const std::vector<double>& zs) {
  const int nx = static_cast<int>(xs.size()) - 1;
  const int ny = static_cast<int>(ys.size()) - 1;
  const int nz = static_cast<int>(zs.size()) - 1;
  if (nx < 1 || ny < 1 || nz < 1) throw ConfigError("tensor_grid needs at least one cell per axis");
  Mesh mesh;
  const auto nid = [&](int i, int j, int k) { return i + (nx + 1) * (j + (ny + 1) * k); };
  mesh.nodes.resize((nx + 1) * (ny + 1) * (nz + 1));
  for (int k = 0; k <= nz; ++k) {
    for (int j = 0; j <= ny; ++j) {
      for (int i = 0; i <= nx; ++i) mesh.nodes[nid(i, j, k)] = Vec3(xs[i], ys[j], zs[k]);
    }
  }
  mesh.elements.reserve(nx * ny * nz);
  for (int k = 0; k < nz; ++k) {
    for (int j = 0; j < ny; ++j) {
      for (int i = 0; i < nx; ++i) {
        mesh.elements.push_back({nid(i, j, k), nid(i + 1, j, k), nid(i + 1, j + 1, k),
                                 nid(i, j + 1, k), nid(i, j, k + 1), nid(i + 1, j, k + 1),
                                 nid(i + 1, j + 1, k + 1), nid(i, j + 1, k + 1)});
      }
    }
  }
  mesh.boundary_facets = boundary_facets_from_elements(mesh);
  auto& sets = mesh.node_sets;
  for (int k = 0; k <= nz; ++k) {
    for (int j = 0; j <= ny; ++j) {
      for (int i = 0; i <= nx; ++i) {
        const int n = nid(i, j, k);
        if (i == 0) sets["x0"].push_back(n);
        if (i == nx) sets["x1"].push_back(n);
        if (j == 0) sets["y0"].push_back(n);
        if (j == ny) sets["y1"].push_back(n);
        if (k == 0) sets["z0"].push_back(n);
        if (k == nz) sets["z1"].push_back(n);
      }
    }
  }
  return mesh;
}

/// Monotone coordinates 0 = c_0 < ... < c_n = length with seeded unequal
/// spacing: widths drawn uniformly from [1-spread, 1+spread] then normalized.
inline std::vector<double> random_partition(double length, int n, double spread,
                                            std::mt19937& rng) {
  if (spread < 0 || spread >= 1) throw ConfigError("partition spread must lie in [0,1)");
  std::uniform_real_distribution<double> u(1.0 - spread, 1.0 + spread);
  std::vector<double> w(n);
  double total = 0;
  for (double& wi : w) total += (wi = u(rng));
  std::vector<double> c(n + 1, 0.0);
  for (int i = 0; i < n; ++i) c[i + 1] = c[i] + w[i] * length / total;
  c[n] = length;  // guard the accumulated rounding
  return c;
}

struct DemoMesh {
  Mesh mesh;
  std::string comment;  // provenance line for the file header
};

/// Square 2 x 2 domain, one element thick, with `n` seeded unequal divisions
/// per in-plane axis. `jitter` (fraction of the local min spacing) additionally
/// wobbles nodes tangentially to their boundary faces, for heavily distorted
/// variants; both node layers share the same in-plane wobble. Node sets: the
/// six faces, plus "pin" (the four corner columns).
inline DemoMesh demo_distorted_grid(uint32_t seed, int n = 40, double spread = 0.6,
                                    double jitter = 0.0) {
  std::mt19937 rng(seed);
  const std::vector<double> xs = random_partition(2.0, n, spread, rng);
  const std::vector<double> ys = random_partition(2.0, n, spread, rng);
  const double thickness = 2.0 / n;
  Mesh mesh = tensor_grid(xs, ys, {0.0, thickness});

  if (jitter > 0) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const auto nid = [&](int i, int j, int k) { return i + (n + 1) * (j + (n + 1) * k); };
    for (int j = 0; j <= n; ++j) {
      for (int i = 0; i <= n; ++i) {
        const bool on_x_face = (i == 0 || i == n);
        const bool on_y_face = (j == 0 || j == n);
        double hx = std::min(i > 0 ? xs[i] - xs[i - 1] : 1e30, i < n ? xs[i + 1] - xs[i] : 1e30);
        double hy = std::min(j > 0 ? ys[j] - ys[j - 1] : 1e30, j < n ? ys[j + 1] - ys[j] : 1e30);
        double dx = 0.5 * jitter * hx * u(rng);
        double dy = 0.5 * jitter * hy * u(rng);
        if (on_x_face && on_y_face) continue;    // corner columns stay
        if (on_x_face) dx = 0.0;                 // slide only along the face
        if (on_y_face) dy = 0.0;
        for (int k = 0; k <= 1; ++k) {
          mesh.nodes[nid(i, j, k)][0] += dx;
          mesh.nodes[nid(i, j, k)][1] += dy;
        }
      }
    }
  }

  std::vector<int>& pin = mesh.node_sets["pin"];
  const auto nid = [&](int i, int j, int k) { return i + (n + 1) * (j + (n + 1) * k); };
  for (int k = 0; k <= 1; ++k) {
    pin.push_back(nid(0, 0, k));
    pin.push_back(nid(n, 0, k));
    pin.push_back(nid(0, n, k));
    pin.push_back(nid(n, n, k));
  }

  std::ostringstream cm;
  cm << "demo distorted-grid seed=" << seed << " n=" << n << " spread=" << spread
     << " jitter=" << jitter;
  return {std::move(mesh), cm.str()};
}

/// Truncated rectangular pyramid, 7 x 3 x 2 elements: bottom rectangle
/// 1.4 x 0.6 at z=0, top rectangle scaled by 0.45 about the bottom center at
/// z=0.4. Node sets give a 3-2-1 support in the first quadrant:
/// support_origin (clamp), support_x (pin y,z), support_y (pin z).
inline DemoMesh demo_pyramid() {
  const int nx = 7, ny = 3, nz = 2;
  const double ax = 1.4, ay = 0.6, height = 0.4, top_scale = 0.45;
  Mesh mesh = tensor_grid(
      [&] { std::vector<double> v(nx + 1); for (int i = 0; i <= nx; ++i) v[i] = ax * i / nx; return v; }(),
      [&] { std::vector<double> v(ny + 1); for (int j = 0; j <= ny; ++j) v[j] = ay * j / ny; return v; }(),
      [&] { std::vector<double> v(nz + 1); for (int k = 0; k <= nz; ++k) v[k] = height * k / nz; return v; }());
  const Vec3 center(ax / 2, ay / 2, 0);
  for (Vec3& x : mesh.nodes) {
    const double zeta = x[2] / height;
    const double s = 1.0 + (top_scale - 1.0) * zeta;
    x.head<2>() = center.head<2>() + s * (x.head<2>() - center.head<2>());
  }
  const auto nid = [&](int i, int j, int k) { return i + (nx + 1) * (j + (ny + 1) * k); };
  mesh.node_sets["support_origin"] = {nid(0, 0, 0)};
  mesh.node_sets["support_x"] = {nid(nx, 0, 0)};
  mesh.node_sets["support_y"] = {nid(0, ny, 0)};
  return {std::move(mesh), "demo pyramid 7x3x2 truncated (top scale 0.45)"};
}

/// 1 x 0.25 x 0.125 block, 50 x 10 x 5 elements, with a prescribed tangential
/// shear of the upper boundary layer: u_x = A sin^4(pi x) (y/0.25)^3, which
/// vanishes on the x=0, x=1 and y=0 faces and moves top-face nodes within
/// their plane. Node sets: faces, "top" (= y1), "fixed" (= x0+x1+y0).
inline DemoMesh demo_sheared_block(double amplitude = 0.03) {
  const int nx = 50, ny = 10, nz = 5;
  const double lx = 1.0, ly = 0.25, lz = 0.125;
  auto axis = [](double len, int n) {
    std::vector<double> v(n + 1);
    for (int i = 0; i <= n; ++i) v[i] = len * i / n;
    return v;
  };
  Mesh mesh = tensor_grid(axis(lx, nx), axis(ly, ny), axis(lz, nz));
  for (Vec3& x : mesh.nodes) {
    const double s = std::sin(M_PI * x[0]);
    const double depth = x[1] / ly;
    x[0] += amplitude * s * s * s * s * depth * depth * depth;
  }
  std::vector<int>& fixed = mesh.node_sets["fixed"];
  for (const char* face : {"x0", "x1", "y0"}) {
    for (int n : mesh.node_sets[face]) fixed.push_back(n);
  }
  std::sort(fixed.begin(), fixed.end());
  fixed.erase(std::unique(fixed.begin(), fixed.end()), fixed.end());
  mesh.node_sets["top"] = mesh.node_sets["y1"];
  std::vector<int>& ends = mesh.node_sets["top_ends"];  // top rows shared with x faces
  for (int n : mesh.node_sets["top"]) {
    if (std::binary_search(fixed.begin(), fixed.end(), n)) ends.push_back(n);
  }
  std::ostringstream cm;
  cm << "demo sheared-block 50x10x5 amplitude=" << amplitude;
  return {std::move(mesh), cm.str()};
}

/// Linear scalar demo field sampled at the mesh nodes.
inline FieldSamples demo_scalar_field(const Mesh& mesh) {
  FieldSamples fs;
  fs.is_tensor = false;
  fs.points = mesh.nodes;
  fs.scalars.reserve(mesh.nodes.size());
  for (const Vec3& x : mesh.nodes) fs.scalars.push_back(1.0 + 2.0 * x[0] + 3.0 * x[1] + 4.0 * x[2]);
  return fs;
}

/// Smooth SPD tensor demo field sampled at the mesh nodes: rotation about the
/// z axis by a position-dependent angle applied to well-separated positive
/// eigenvalues.
inline FieldSamples demo_tensor_field(const Mesh& mesh) {
  FieldSamples fs;
  fs.is_tensor = true;
  fs.points = mesh.nodes;
  fs.tensors.reserve(mesh.nodes.size());
  for (const Vec3& x : mesh.nodes) {
    const double th = 0.3 + 0.25 * x[0] + 0.15 * x[1];
    const Eigen::Matrix3d R = Eigen::AngleAxisd(th, Vec3::UnitZ()).toRotationMatrix();
    Vec3 lam(3.0 + x[0], 2.0 + 0.5 * x[1], 1.0 + 0.25 * x[2]);
    fs.tensors.push_back(R * lam.asDiagonal() * R.transpose());
  }
  return fs;
}

}  // namespace meshfit
