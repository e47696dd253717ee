// File formats: native "MESHFIT v1" text meshes, VTK legacy ASCII
// (unstructured grid, hex8 only), CSV quality / solver reports and scattered
// field samples.
#pragma once

#include <charconv>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "meshfit/mesh.hpp"

namespace meshfit {

struct IoError : Error { using Error::Error; };

namespace detail {

/// Shortest decimal form that round-trips a double exactly.
inline std::string fmt_double(double v) {
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, p);
}

/// Next non-empty line, stripping '#' comments; false at EOF.
inline bool next_line(std::istream& in, std::string& line, int& lineno) {
  while (std::getline(in, line)) {
    ++lineno;
    if (auto pos = line.find('#'); pos != std::string::npos) line.erase(pos);
    auto end = line.find_last_not_of(" \t\r\n");
    if (end == std::string::npos) continue;
    line.erase(end + 1);
    return true;
  }
  return false;
}

[[noreturn]] inline void parse_fail(const std::string& path, int lineno, const std::string& what) {
  throw ParseError(path + ":" + std::to_string(lineno) + ": " + what);
}

}  // namespace detail

/// Write the native format. Coordinates use round-trip-exact formatting, so a
/// save/load cycle preserves them bit for bit. `header_comment`, if nonempty,
/// is emitted as leading '#' lines (generators record seeds there).
inline void save_mesh_native(const Mesh& mesh, const std::string& path,
                             const std::string& header_comment = "") {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << "MESHFIT v1\n";
  if (!header_comment.empty()) {
    std::istringstream lines(header_comment);
    std::string l;
    while (std::getline(lines, l)) out << "# " << l << "\n";
  }
  out << "NODES " << mesh.nodes.size() << "\n";
  for (const Vec3& x : mesh.nodes) {
    out << detail::fmt_double(x[0]) << ' ' << detail::fmt_double(x[1]) << ' '
        << detail::fmt_double(x[2]) << "\n";
  }
  out << "HEX8 " << mesh.elements.size() << "\n";
  for (const Hex8& c : mesh.elements) {
    for (int k = 0; k < 8; ++k) out << c[k] << (k == 7 ? '\n' : ' ');
  }
  out << "FACETS " << mesh.boundary_facets.size() << "\n";
  for (const Facet& f : mesh.boundary_facets) {
    out << f[0] << ' ' << f[1] << ' ' << f[2] << ' ' << f[3] << "\n";
  }
  for (const auto& [name, set] : mesh.node_sets) {
    out << "NODESET " << name << ' ' << set.size() << "\n";
    for (size_t i = 0; i < set.size(); ++i) {
      out << set[i] << ((i + 1) % 16 == 0 || i + 1 == set.size() ? '\n' : ' ');
    }
  }
  if (!out) throw IoError("write failed for '" + path + "'");
}

inline Mesh load_mesh_native(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  int lineno = 0;
  std::string line;
  if (!detail::next_line(in, line, lineno) || line != "MESHFIT v1") {
    detail::parse_fail(path, lineno, "expected header 'MESHFIT v1'");
  }
  Mesh mesh;
  auto read_count = [&](const std::string& kw) -> long {
    std::istringstream ss(line);
    std::string tag;
    long n = -1;
    ss >> tag >> n;
    if (tag != kw || n < 0) detail::parse_fail(path, lineno, "expected '" + kw + " <count>'");
    return n;
  };

  if (!detail::next_line(in, line, lineno)) detail::parse_fail(path, lineno, "missing NODES");
  const long nn = read_count("NODES");
  mesh.nodes.reserve(nn);
  for (long i = 0; i < nn; ++i) {
    if (!detail::next_line(in, line, lineno)) detail::parse_fail(path, lineno, "truncated NODES");
    std::istringstream ss(line);
    Vec3 x;
    if (!(ss >> x[0] >> x[1] >> x[2])) detail::parse_fail(path, lineno, "bad node coordinates");
    mesh.nodes.push_back(x);
  }

  if (!detail::next_line(in, line, lineno)) detail::parse_fail(path, lineno, "missing HEX8");
  const long ne = read_count("HEX8");
  mesh.elements.reserve(ne);
  for (long i = 0; i < ne; ++i) {
    if (!detail::next_line(in, line, lineno)) detail::parse_fail(path, lineno, "truncated HEX8");
    std::istringstream ss(line);
    Hex8 c;
    for (int k = 0; k < 8; ++k) {
      if (!(ss >> c[k])) detail::parse_fail(path, lineno, "bad element connectivity");
    }
    mesh.elements.push_back(c);
  }

  if (!detail::next_line(in, line, lineno)) detail::parse_fail(path, lineno, "missing FACETS");
  const long nf = read_count("FACETS");
  mesh.boundary_facets.reserve(nf);
  for (long i = 0; i < nf; ++i) {
    if (!detail::next_line(in, line, lineno)) detail::parse_fail(path, lineno, "truncated FACETS");
    std::istringstream ss(line);
    Facet f;
    for (int k = 0; k < 4; ++k) {
      if (!(ss >> f[k])) detail::parse_fail(path, lineno, "bad facet");
    }
    mesh.boundary_facets.push_back(f);
  }

  while (detail::next_line(in, line, lineno)) {
    std::istringstream ss(line);
    std::string tag, name;
    long count = -1;
    ss >> tag >> name >> count;
    if (tag != "NODESET" || count < 0) detail::parse_fail(path, lineno, "expected NODESET block");
    std::vector<int>& set = mesh.node_sets[name];
    set.reserve(count);
    while (static_cast<long>(set.size()) < count) {
      int v;
      while (static_cast<long>(set.size()) < count && ss >> v) set.push_back(v);
      if (static_cast<long>(set.size()) < count) {
        if (!detail::next_line(in, line, lineno)) {
          detail::parse_fail(path, lineno, "truncated NODESET '" + name + "'");
        }
        ss = std::istringstream(line);
      }
    }
  }

  validate_mesh(mesh);
  return mesh;
}

/// VTK legacy ASCII export (unstructured grid, cell type 12). Boundary facets
/// and node sets are not representable and are dropped.
inline void save_mesh_vtk(const Mesh& mesh, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << "# vtk DataFile Version 3.0\nmeshfit export\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  out << "POINTS " << mesh.nodes.size() << " double\n";
  for (const Vec3& x : mesh.nodes) {
    out << detail::fmt_double(x[0]) << ' ' << detail::fmt_double(x[1]) << ' '
        << detail::fmt_double(x[2]) << "\n";
  }
  out << "CELLS " << mesh.elements.size() << ' ' << mesh.elements.size() * 9 << "\n";
  for (const Hex8& c : mesh.elements) {
    out << 8;
    for (int k = 0; k < 8; ++k) out << ' ' << c[k];
    out << "\n";
  }
  out << "CELL_TYPES " << mesh.elements.size() << "\n";
  for (size_t i = 0; i < mesh.elements.size(); ++i) out << "12\n";
  if (!out) throw IoError("write failed for '" + path + "'");
}

/// VTK legacy ASCII import. Requires every cell to be hex8 (type 12); boundary
/// facets are recovered from connectivity, node sets come back empty.
inline Mesh load_mesh_vtk(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  Mesh mesh;
  std::string tok;
  long n_cells = -1;
  while (in >> tok) {
    if (tok == "DATASET") {
      in >> tok;
      if (tok != "UNSTRUCTURED_GRID") {
        throw ParseError(path + ": unsupported VTK dataset '" + tok + "'");
      }
    } else if (tok == "POINTS") {
      long n;
      std::string type;
      in >> n >> type;
      mesh.nodes.resize(n);
      for (long i = 0; i < n; ++i) {
        if (!(in >> mesh.nodes[i][0] >> mesh.nodes[i][1] >> mesh.nodes[i][2])) {
          throw ParseError(path + ": truncated POINTS");
        }
      }
    } else if (tok == "CELLS") {
      long total;
      in >> n_cells >> total;
      mesh.elements.resize(n_cells);
      for (long i = 0; i < n_cells; ++i) {
        int cnt;
        if (!(in >> cnt)) throw ParseError(path + ": truncated CELLS");
        if (cnt != 8) {
          throw ParseError(path + ": cell " + std::to_string(i) + " has " +
                           std::to_string(cnt) + " nodes; only hex8 supported");
        }
        for (int k = 0; k < 8; ++k) in >> mesh.elements[i][k];
      }
    } else if (tok == "CELL_TYPES") {
      long n;
      in >> n;
      for (long i = 0; i < n; ++i) {
        int t;
        if (!(in >> t)) throw ParseError(path + ": truncated CELL_TYPES");
        if (t != 12) {
          throw ParseError(path + ": cell " + std::to_string(i) + " has VTK type " +
                           std::to_string(t) + "; only hex8 (type 12) supported");
        }
      }
    }
  }
  if (mesh.nodes.empty() || n_cells < 0) throw ParseError(path + ": missing POINTS or CELLS");
  mesh.boundary_facets = boundary_facets_from_elements(mesh);
  validate_mesh(mesh);
  return mesh;
}

inline void save_mesh(const Mesh& mesh, const std::string& path, const std::string& format,
                      const std::string& header_comment = "") {
  if (format == "native") {
    save_mesh_native(mesh, path, header_comment);
  } else if (format == "vtk") {
    save_mesh_vtk(mesh, path);
  } else {
    throw ConfigError("unknown mesh format '" + format + "' (expected native or vtk)");
  }
}

inline Mesh load_mesh(const std::string& path, const std::string& format) {
  if (format == "native") return load_mesh_native(path);
  if (format == "vtk") return load_mesh_vtk(path);
  throw ConfigError("unknown mesh format '" + format + "' (expected native or vtk)");
}

/// Guess the format from the leading bytes: VTK files start with "# vtk".
inline Mesh load_mesh_auto(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::string first;
  std::getline(in, first);
  in.close();
  return first.rfind("# vtk", 0) == 0 ? load_mesh_vtk(path) : load_mesh_native(path);
}

inline void write_quality_csv(const QualityReport& q, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << "element,skewness,mean_edge_1,mean_edge_2,mean_edge_3,degenerate,inverted\n";
  out << std::setprecision(17);
  for (size_t i = 0; i < q.element_ids.size(); ++i) {
    out << q.element_ids[i] << ',' << q.skewness[i] << ',' << q.mean_edge[i][0] << ','
        << q.mean_edge[i][1] << ',' << q.mean_edge[i][2] << ','
        << int(q.degenerate[i]) << ',' << int(q.inverted[i]) << "\n";
  }
  if (q.empty_region) out << "# empty region\n";
}

/// One converged-or-failed Newton attempt of the increment loop.
struct IncrementRecord {
  double alpha = 0;
  int iters = 0;
  double res_norm = 0;
  double inc_norm = 0;
  double seconds = 0;
  bool accepted = false;
};

struct NewtonReport {
  std::vector<IncrementRecord> increments;
  bool converged = false;
  int n_inc = 0;        // total attempts, failed ones included
  double wall_seconds = 0;
};

inline void write_newton_csv(const NewtonReport& r, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << "alpha,iters,res_norm,inc_norm,seconds\n";
  out << std::setprecision(17);
  for (const IncrementRecord& inc : r.increments) {
    out << inc.alpha << ',' << inc.iters << ',' << inc.res_norm << ',' << inc.inc_norm << ','
        << inc.seconds << "\n";
  }
}

/// Scattered samples of a scalar or 3x3 tensor field (row-major components).
struct FieldSamples {
  std::vector<Vec3> points;
  std::vector<double> scalars;              // scalar fields
  std::vector<Eigen::Matrix3d> tensors;     // tensor fields
  bool is_tensor = false;
};

inline FieldSamples load_field_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  FieldSamples fs;
  std::string line;
  int lineno = 0;
  bool first_data = true;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    for (char& ch : line) {
      if (ch == ',') ch = ' ';
    }
    std::istringstream ss(line);
    std::vector<double> vals;
    double v;
    while (ss >> v) vals.push_back(v);
    if (vals.empty()) {
      if (first_data) continue;  // header row
      detail::parse_fail(path, lineno, "unparseable field row");
    }
    if (first_data) {
      if (vals.size() == 4) {
        fs.is_tensor = false;
      } else if (vals.size() == 12) {
        fs.is_tensor = true;
      } else {
        detail::parse_fail(path, lineno,
                           "expected 4 columns (x,y,z,value) or 12 (x,y,z,T11..T33)");
      }
      first_data = false;
    }
    const size_t want = fs.is_tensor ? 12 : 4;
    if (vals.size() != want) detail::parse_fail(path, lineno, "inconsistent column count");
    fs.points.emplace_back(vals[0], vals[1], vals[2]);
    if (fs.is_tensor) {
      Eigen::Matrix3d t;
      for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) t(r, c) = vals[3 + 3 * r + c];
      }
      fs.tensors.push_back(t);
    } else {
      fs.scalars.push_back(vals[3]);
    }
  }
  if (fs.points.empty()) throw ParseError(path + ": no samples");
  return fs;
}

inline void save_field_csv(const FieldSamples& fs, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  if (fs.is_tensor) {
    out << "x,y,z,T11,T12,T13,T21,T22,T23,T31,T32,T33\n";
  } else {
    out << "x,y,z,value\n";
  }
  for (size_t i = 0; i < fs.points.size(); ++i) {
    out << detail::fmt_double(fs.points[i][0]) << ',' << detail::fmt_double(fs.points[i][1])
        << ',' << detail::fmt_double(fs.points[i][2]);
    if (fs.is_tensor) {
      const Eigen::Matrix3d& t = fs.tensors[i];
      for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) out << ',' << detail::fmt_double(t(r, c));
      }
    } else {
      out << ',' << detail::fmt_double(fs.scalars[i]);
    }
    out << "\n";
  }
  if (!out) throw IoError("write failed for '" + path + "'");
}

}  // namespace meshfit
