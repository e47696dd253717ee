// JSON configuration for refitting and field transfer: parse, validate, and
// assemble the runtime problem objects (targets, penalties, sliding
// interfaces, boundary conditions, solver controls) from a mesh plus a
// config document.
#pragma once

#include <fstream>
#include <initializer_list>
#include <map>
#include <numeric>

#include <json.hpp>

#include "meshfit/solver.hpp"
#include "meshfit/transfer.hpp"

namespace meshfit {

/// How per-element target shapes are produced.
struct TargetSpec {
  enum class Kind {
    uniform,   // every direction targets the mesh-wide average edge length
    lengths,   // explicit edge length per direction, constant over the mesh
    localized  // l_r0 scaled by a spatial profile evaluated per element
  };
  Kind kind = Kind::uniform;
  std::array<double, 3> edge_length{};  // kind == lengths
  double l_r0 = 0;                      // kind == localized
  LocalizationField field;              // kind == localized
};

/// One sliding interface: the facet subset spanned by a boundary node set,
/// plus node sets pinned against any motion (corners, feature edges).
struct SlidingSpec {
  std::string nodeset;
  std::vector<std::string> pinned;
};

/// Nodes held fixed along selected axes; nodeset "*" addresses every node.
struct DirichletSpec {
  std::string nodeset;
  std::array<bool, 3> axes{true, true, true};
};

struct RefitConfig {
  double eps_E = 1e-2;  // averaged and individual edge-constraint penalty
  double eps_A = 1e-2;  // angle-constraint penalty
  double eps_m = 2e8;   // sliding penalty
  double theta_r = M_PI / 2;
  TargetSpec targets;
  bool localize_penalties = false;  // scale penalties by the target profile
  SolverOptions solver;
  std::vector<SlidingSpec> sliding;
  std::vector<DirichletSpec> dirichlet;
};

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& j, const char* what,
                                std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(std::string(what) + " must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* key : allowed) {
      if (it.key() == key) {
        known = true;
        break;
      }
    }
    if (!known) throw ConfigError(std::string(what) + ": unknown key '" + it.key() + "'");
  }
}

inline Vec3 parse_vec3(const nlohmann::json& j, const char* what) {
  if (!j.is_array() || j.size() != 3) {
    throw ConfigError(std::string(what) + " must be an array of 3 numbers");
  }
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

inline TargetSpec parse_targets(const nlohmann::json& j) {
  reject_unknown_keys(j, "targets", {"kind", "edge_length", "l_r0", "center", "c", "variant",
                                     "profile", "r_ref", "z_ref"});
  TargetSpec spec;
  const std::string kind = j.value("kind", "uniform");
  if (kind == "uniform") {
    spec.kind = TargetSpec::Kind::uniform;
  } else if (kind == "explicit") {
    spec.kind = TargetSpec::Kind::lengths;
    const auto it = j.find("edge_length");
    if (it == j.end()) throw ConfigError("targets: explicit kind requires edge_length");
    const Vec3 l = parse_vec3(*it, "targets.edge_length");
    spec.edge_length = {l[0], l[1], l[2]};
  } else if (kind == "localized") {
    spec.kind = TargetSpec::Kind::localized;
    if (!j.contains("l_r0")) throw ConfigError("targets: localized kind requires l_r0");
    spec.l_r0 = j.at("l_r0").get<double>();
    spec.field.c = j.value("c", 0.1);
    const std::string variant = j.value("variant", "point");
    if (variant == "point") {
      spec.field.variant = LocalizationField::Variant::point;
      if (!j.contains("center")) throw ConfigError("targets: point localization requires center");
      spec.field.center = parse_vec3(j.at("center"), "targets.center");
    } else if (variant == "cylindrical") {
      spec.field.variant = LocalizationField::Variant::cylindrical;
      spec.field.r_ref = j.value("r_ref", 0.0);
      spec.field.z_ref = j.value("z_ref", 0.0);
    } else {
      throw ConfigError("targets: unknown localization variant '" + variant + "'");
    }
    const std::string profile = j.value("profile", "peak");
    if (profile == "peak") {
      spec.field.profile = LocalizationField::Profile::peak;
    } else if (profile == "well") {
      spec.field.profile = LocalizationField::Profile::well;
    } else {
      throw ConfigError("targets: unknown profile '" + profile + "' (use peak or well)");
    }
  } else {
    throw ConfigError("targets: unknown kind '" + kind + "'");
  }
  return spec;
}

}  // namespace detail

inline RefitConfig parse_refit_config(const nlohmann::json& j) {
  RefitConfig cfg;
  try {
    detail::reject_unknown_keys(
        j, "refit config",
        {"eps_E", "eps_A", "eps_m", "theta_r", "targets", "localize_penalties", "newton_tol",
         "max_newton_iters", "increments", "max_increments", "line_search", "max_halvings",
         "sliding", "dirichlet"});
    cfg.eps_E = j.value("eps_E", cfg.eps_E);
    cfg.eps_A = j.value("eps_A", cfg.eps_A);
    cfg.eps_m = j.value("eps_m", cfg.eps_m);
    cfg.theta_r = j.value("theta_r", cfg.theta_r);
    if (j.contains("targets")) cfg.targets = detail::parse_targets(j.at("targets"));
    cfg.localize_penalties = j.value("localize_penalties", false);
    cfg.solver.tol = j.value("newton_tol", cfg.solver.tol);
    cfg.solver.max_iterations = j.value("max_newton_iters", cfg.solver.max_iterations);
    cfg.solver.increments = j.value("increments", cfg.solver.increments);
    cfg.solver.max_increments = j.value("max_increments", cfg.solver.max_increments);
    cfg.solver.line_search = j.value("line_search", cfg.solver.line_search);
    cfg.solver.max_halvings = j.value("max_halvings", cfg.solver.max_halvings);
    if (j.contains("sliding")) {
      if (!j.at("sliding").is_array()) throw ConfigError("sliding must be an array");
      for (const auto& s : j.at("sliding")) {
        detail::reject_unknown_keys(s, "sliding entry", {"nodeset", "pinned"});
        SlidingSpec spec;
        if (!s.contains("nodeset")) throw ConfigError("sliding entry requires a nodeset");
        spec.nodeset = s.at("nodeset").get<std::string>();
        if (s.contains("pinned")) {
          for (const auto& p : s.at("pinned")) spec.pinned.push_back(p.get<std::string>());
        }
        cfg.sliding.push_back(std::move(spec));
      }
    }
    if (j.contains("dirichlet")) {
      if (!j.at("dirichlet").is_array()) throw ConfigError("dirichlet must be an array");
      for (const auto& d : j.at("dirichlet")) {
        detail::reject_unknown_keys(d, "dirichlet entry", {"nodeset", "axes"});
        DirichletSpec spec;
        if (!d.contains("nodeset")) throw ConfigError("dirichlet entry requires a nodeset");
        spec.nodeset = d.at("nodeset").get<std::string>();
        if (d.contains("axes")) {
          const auto& a = d.at("axes");
          if (!a.is_array() || a.size() != 3) {
            throw ConfigError("dirichlet axes must be an array of 3 booleans");
          }
          for (int k = 0; k < 3; ++k) spec.axes[k] = a[k].get<bool>();
        }
        cfg.dirichlet.push_back(std::move(spec));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("refit config: ") + e.what());
  }
  if (!(cfg.theta_r > 0) || !(cfg.theta_r < M_PI)) {
    throw ConfigError("theta_r must lie strictly between 0 and pi");
  }
  cfg.solver.validate();
  return cfg;
}

inline nlohmann::json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file '" + path + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config file '" + path + "': " + e.what());
  }
}

inline RefitConfig load_refit_config(const std::string& path) {
  return parse_refit_config(load_json(path));
}

/// Resolve a config against a concrete mesh: per-element targets, penalties,
/// sliding interfaces built from facet node sets, and the fixed-dof mask.
/// Nodes pinned by a sliding entry are excluded from gap equations and held
/// fixed on all axes.
struct BuiltRefit {
  RefitProblem problem;
  SolverOptions options;
};

inline BuiltRefit build_refit(const Mesh& mesh, const RefitConfig& cfg) {
  BuiltRefit b;
  b.options = cfg.solver;

  b.problem.penalties.eps_edge_avg = cfg.eps_E;
  b.problem.penalties.eps_edge_each = cfg.eps_E;
  b.problem.penalties.eps_angle = cfg.eps_A;
  if (cfg.localize_penalties) {
    if (cfg.targets.kind != TargetSpec::Kind::localized) {
      throw ConfigError("localize_penalties requires localized targets");
    }
    const LocalizationField field = cfg.targets.field;
    b.problem.penalties.spatial_scale = [field](const Vec3& x) { return field.f(x); };
  }

  b.problem.goals.reserve(mesh.n_elements());
  const std::array<double, 3> theta{cfg.theta_r, cfg.theta_r, cfg.theta_r};
  switch (cfg.targets.kind) {
    case TargetSpec::Kind::uniform: {
      const std::array<double, 3> avg = average_target_lengths(mesh);
      b.problem.goals.assign(mesh.n_elements(), TargetShape{avg, theta});
      break;
    }
    case TargetSpec::Kind::lengths:
      b.problem.goals.assign(mesh.n_elements(), TargetShape{cfg.targets.edge_length, theta});
      break;
    case TargetSpec::Kind::localized: {
      if (!(cfg.targets.l_r0 > 0)) throw ConfigError("localized targets require l_r0 > 0");
      for (int e = 0; e < mesh.n_elements(); ++e) {
        const double l = cfg.targets.l_r0 * cfg.targets.field.f(element_centroid(mesh, e));
        b.problem.goals.push_back(TargetShape{{l, l, l}, theta});
      }
      break;
    }
  }

  b.problem.fixed = free_all(mesh);
  std::vector<int> all_nodes;
  for (const DirichletSpec& spec : cfg.dirichlet) {
    if (spec.nodeset == "*") {
      if (all_nodes.empty()) {
        all_nodes.resize(mesh.n_nodes());
        std::iota(all_nodes.begin(), all_nodes.end(), 0);
      }
      fix_nodes(b.problem.fixed, all_nodes, spec.axes);
      continue;
    }
    const auto it = mesh.node_sets.find(spec.nodeset);
    if (it == mesh.node_sets.end()) {
      throw ConfigError("dirichlet: unknown node set '" + spec.nodeset + "'");
    }
    fix_nodes(b.problem.fixed, it->second, spec.axes);
  }

  for (const SlidingSpec& spec : cfg.sliding) {
    const std::vector<Facet> facets = facets_from_node_set(mesh, spec.nodeset);
    std::vector<int> pinned;
    for (const std::string& name : spec.pinned) {
      const auto it = mesh.node_sets.find(name);
      if (it == mesh.node_sets.end()) {
        throw ConfigError("sliding: unknown pinned node set '" + name + "'");
      }
      pinned.insert(pinned.end(), it->second.begin(), it->second.end());
    }
    fix_nodes(b.problem.fixed, pinned, {true, true, true});
    b.problem.interfaces.push_back(build_interface(mesh, facets, pinned, cfg.eps_m));
  }

  b.problem.validate(mesh);
  return b;
}

/// Transfer configuration: a default scheme plus per-field overrides.
/// Schemes: MLS (tensors: componentwise), LOGMLS (positive scalars), RMLS
/// (tensors via the rotation/stretch split).
struct TransferConfig {
  std::string scheme = "MLS";
  int basis_order = 1;
  double r_p = 0;  // patch radius; 0 derives it from sample spacing
  double c = 0;    // Gaussian decay; 0 derives 9/r_p^2
  bool strict = false;
  std::map<std::string, std::string> field_schemes;
  std::map<std::string, int> field_orders;

  TransferOptions options_for(const std::string& field, bool is_tensor) const {
    std::string s = scheme;
    if (const auto it = field_schemes.find(field); it != field_schemes.end()) s = it->second;
    TransferOptions opt;
    opt.order = basis_order;
    if (const auto it = field_orders.find(field); it != field_orders.end()) opt.order = it->second;
    opt.radius = r_p;
    opt.weight_c = c;
    opt.strict = strict;
    if (s == "MLS") {
      opt.tensor_componentwise = true;
    } else if (s == "LOGMLS") {
      if (is_tensor) {
        throw ConfigError("field '" + field + "': LOGMLS applies to scalar fields only");
      }
      opt.log_scale = true;
    } else if (s == "RMLS" || s == "R-MLS") {
      if (!is_tensor) {
        throw ConfigError("field '" + field + "': RMLS applies to tensor fields only");
      }
    } else {
      throw ConfigError("field '" + field + "': unknown scheme '" + s +
                        "' (use MLS, LOGMLS or RMLS)");
    }
    opt.validate();
    return opt;
  }
};

inline TransferConfig parse_transfer_config(const nlohmann::json& j) {
  TransferConfig cfg;
  try {
    detail::reject_unknown_keys(j, "transfer config",
                                {"scheme", "basis_order", "r_p", "c", "strict", "fields"});
    cfg.scheme = j.value("scheme", cfg.scheme);
    cfg.basis_order = j.value("basis_order", cfg.basis_order);
    cfg.r_p = j.value("r_p", cfg.r_p);
    cfg.c = j.value("c", cfg.c);
    cfg.strict = j.value("strict", cfg.strict);
    if (j.contains("fields")) {
      const auto& fields = j.at("fields");
      if (!fields.is_object()) throw ConfigError("transfer fields must be an object");
      for (auto it = fields.begin(); it != fields.end(); ++it) {
        detail::reject_unknown_keys(*it, "transfer field entry", {"scheme", "basis_order"});
        if (it->contains("scheme")) {
          cfg.field_schemes[it.key()] = it->at("scheme").get<std::string>();
        }
        if (it->contains("basis_order")) {
          cfg.field_orders[it.key()] = it->at("basis_order").get<int>();
        }
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("transfer config: ") + e.what());
  }
  if (cfg.r_p < 0) throw ConfigError("transfer config: r_p must be nonnegative");
  if (cfg.c < 0) throw ConfigError("transfer config: c must be nonnegative");
  if (cfg.basis_order < 0 || cfg.basis_order > 2) {
    throw ConfigError("transfer config: basis_order must be 0, 1 or 2");
  }
  return cfg;
}

inline TransferConfig load_transfer_config(const std::string& path) {
  return parse_transfer_config(load_json(path));
}

}  // namespace meshfit
