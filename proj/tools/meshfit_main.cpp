// Command-line front end: demo mesh generation, mesh refitting, field
// transfer between meshes, and mesh-quality reporting.
//
// Exit codes: 0 success, 2 configuration or input validation error,
// 3 solver non-convergence (best-so-far outputs are still written),
// 4 transfer failure (orphan points, inadmissible tensors), 5 file I/O.
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>

#include <CLI11.hpp>

#include <meshfit/meshfit.hpp>

namespace {

using namespace meshfit;

std::string stem_of(const std::string& path) {
  std::filesystem::path p(path);
  p.replace_extension();
  return p.string();
}

void write_json_file(const nlohmann::json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << j.dump(2) << "\n";
}

nlohmann::json dirichlet_entry(const std::string& set, bool ax, bool ay, bool az) {
  return {{"nodeset", set}, {"axes", {ax, ay, az}}};
}

/// Dirichlet block shared by the grid demos: every boundary face may slide
/// within its own plane, the corner columns are pinned completely.
nlohmann::json planar_face_dirichlet() {
  nlohmann::json d = nlohmann::json::array();
  d.push_back(dirichlet_entry("x0", true, false, false));
  d.push_back(dirichlet_entry("x1", true, false, false));
  d.push_back(dirichlet_entry("y0", false, true, false));
  d.push_back(dirichlet_entry("y1", false, true, false));
  d.push_back(dirichlet_entry("z0", false, false, true));
  d.push_back(dirichlet_entry("z1", false, false, true));
  d.push_back(dirichlet_entry("pin", true, true, true));
  return d;
}

struct DemoArgs {
  std::string name;
  std::string out;
  std::string format = "native";
  uint32_t seed = 42;
};

int cmd_demo(const DemoArgs& args) {
  DemoMesh dm;
  nlohmann::json cfg;
  const std::string stem = stem_of(args.out);
  bool emit_fields = false;

  if (args.name == "distorted-grid" || args.name == "localized-grid") {
    dm = demo_distorted_grid(args.seed);
    cfg["dirichlet"] = planar_face_dirichlet();
    if (args.name == "localized-grid") {
      dm.comment = "demo localized-grid seed=" + std::to_string(args.seed) +
                   " (distorted grid with a localized target-length profile)";
      Vec3 lo = dm.mesh.nodes.front(), hi = lo;
      for (const Vec3& x : dm.mesh.nodes) {
        lo = lo.cwiseMin(x);
        hi = hi.cwiseMax(x);
      }
      const Vec3 center = 0.5 * (lo + hi);
      cfg["targets"] = {{"kind", "localized"},
                        {"l_r0", 0.025},
                        {"c", 0.1},
                        {"center", {center[0], center[1], center[2]}},
                        {"variant", "point"},
                        {"profile", "peak"}};
      cfg["localize_penalties"] = true;
      emit_fields = true;
    } else {
      cfg["targets"] = {{"kind", "uniform"}};
    }
  } else if (args.name == "pyramid") {
    dm = demo_pyramid();
    const std::array<double, 3> avg = average_target_lengths(dm.mesh);
    const double l = (avg[0] + avg[1] + avg[2]) / 3.0;
    cfg["targets"] = {{"kind", "explicit"}, {"edge_length", {l, l, l}}};
    cfg["dirichlet"] = nlohmann::json::array();
    cfg["dirichlet"].push_back(dirichlet_entry("support_origin", true, true, true));
    cfg["dirichlet"].push_back(dirichlet_entry("support_x", false, true, true));
    cfg["dirichlet"].push_back(dirichlet_entry("support_y", false, false, true));
    cfg["line_search"] = true;
  } else if (args.name == "sheared-block") {
    dm = demo_sheared_block();
    cfg["targets"] = {{"kind", "explicit"}, {"edge_length", {0.02, 0.025, 0.025}}};
    cfg["eps_m"] = 2e8;
    cfg["dirichlet"] = nlohmann::json::array();
    cfg["dirichlet"].push_back(dirichlet_entry("fixed", true, true, true));
    cfg["sliding"] = nlohmann::json::array();
    cfg["sliding"].push_back({{"nodeset", "top"}, {"pinned", {"top_ends"}}});
    cfg["line_search"] = true;
  } else {
    throw ConfigError("unknown demo '" + args.name +
                      "' (use distorted-grid, pyramid, sheared-block or localized-grid)");
  }
  cfg["increments"] = 1;
  cfg["max_increments"] = 20;

  save_mesh(dm.mesh, args.out, args.format, dm.comment);
  std::printf("wrote %s (%d nodes, %d elements)\n", args.out.c_str(), dm.mesh.n_nodes(),
              dm.mesh.n_elements());
  const std::string cfg_path = stem + "_refit.json";
  write_json_file(cfg, cfg_path);
  std::printf("wrote %s\n", cfg_path.c_str());
  if (emit_fields) {
    const std::string scalar_path = stem + "_scalar.csv";
    const std::string tensor_path = stem + "_tensor.csv";
    save_field_csv(demo_scalar_field(dm.mesh), scalar_path);
    save_field_csv(demo_tensor_field(dm.mesh), tensor_path);
    std::printf("wrote %s\nwrote %s\n", scalar_path.c_str(), tensor_path.c_str());
  }
  return 0;
}

struct RefitArgs {
  std::string mesh;
  std::string config;
  std::string out;
  std::string report;  // prefix; empty = no files
  std::string format = "native";
};

int cmd_refit(const RefitArgs& args) {
  const Mesh mesh = load_mesh_auto(args.mesh);
  const RefitConfig cfg = load_refit_config(args.config);
  BuiltRefit built = build_refit(mesh, cfg);

  const QualityReport before = quality_report(mesh);
  const RefitResult result = refit(mesh, built.problem, built.options);

  Mesh out = mesh;
  out.nodes = result.positions;
  const QualityReport after = quality_report(out);
  save_mesh(out, args.out, args.format, "refit of " + args.mesh);

  if (!args.report.empty()) {
    write_newton_csv(result.report, args.report + "_increments.csv");
    write_quality_csv(before, args.report + "_quality_before.csv");
    write_quality_csv(after, args.report + "_quality_after.csv");
  }

  double alpha_reached = 0;
  for (const IncrementRecord& inc : result.report.increments) {
    if (inc.accepted) alpha_reached = std::max(alpha_reached, inc.alpha);
  }
  std::printf("increments: %d attempts, level reached %.4f, %.2f s\n", result.report.n_inc,
              alpha_reached, result.report.wall_seconds);
  std::printf("skewness: max %.4f -> %.4f, mean %.4f -> %.4f\n", before.skew_max, after.skew_max,
              before.skew_mean, after.skew_mean);
  for (size_t i = 0; i < built.problem.interfaces.size(); ++i) {
    const BoundaryDistanceReport bd =
        boundary_distance_report(built.problem.interfaces[i], result.positions);
    std::printf("sliding interface %zu: max boundary distance %.3e\n", i, bd.max_distance);
  }
  std::printf("wrote %s\n", args.out.c_str());
  if (!result.report.converged) {
    std::fprintf(stderr, "refit did NOT converge; best-so-far state written\n");
    return 3;
  }
  std::printf("converged\n");
  return 0;
}

struct TransferArgs {
  std::string old_mesh;  // optional, informational
  std::string new_mesh;
  std::string config;  // optional
  std::vector<std::string> fields;
  std::string out;  // prefix: writes <out>_<field>.csv
};

int cmd_transfer(const TransferArgs& args) {
  const TransferConfig cfg =
      args.config.empty() ? TransferConfig{} : load_transfer_config(args.config);
  const Mesh new_mesh = load_mesh_auto(args.new_mesh);
  int old_nodes = -1;
  if (!args.old_mesh.empty()) old_nodes = load_mesh_auto(args.old_mesh).n_nodes();

  for (const std::string& spec : args.fields) {
    const size_t eq = spec.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == spec.size()) {
      throw ConfigError("field spec '" + spec + "' must look like name=path");
    }
    const std::string name = spec.substr(0, eq);
    const std::string path = spec.substr(eq + 1);
    const FieldSamples samples = load_field_csv(path);
    if (old_nodes >= 0 && static_cast<int>(samples.points.size()) != old_nodes) {
      std::printf("note: field '%s' has %zu samples, old mesh has %d nodes\n", name.c_str(),
                  samples.points.size(), old_nodes);
    }
    const TransferOptions opt = cfg.options_for(name, samples.is_tensor);
    TransferStats stats;
    const FieldSamples mapped = transfer_fields(samples, new_mesh.nodes, opt, &stats);
    const std::string out_path = args.out + "_" + name + ".csv";
    save_field_csv(mapped, out_path);

    std::printf("field '%s': %zu samples -> %d values, radius %.4g, snapped %d, "
                "order fallbacks %d, frame fallbacks %d",
                name.c_str(), samples.points.size(), stats.n_eval, stats.radius, stats.n_snapped,
                stats.n_order_fallback, stats.n_rotation_fallback);
    if (mapped.is_tensor) {
      int spd_violations = 0;
      for (const Mat3& T : mapped.tensors) {
        const Mat3 sym = 0.5 * (T + T.transpose());
        if (Eigen::LLT<Mat3>(sym).info() != Eigen::Success) ++spd_violations;
      }
      std::printf(", spd violations %d", spd_violations);
    }
    std::printf("\nwrote %s\n", out_path.c_str());
  }
  return 0;
}

struct QualityArgs {
  std::string mesh;
  std::string region;  // sphere:cx,cy,cz,r | fband:lo,hi
  std::string config;  // needed by fband (localized targets define the field)
  std::string out;     // optional CSV
};

int cmd_quality(const QualityArgs& args) {
  const Mesh mesh = load_mesh_auto(args.mesh);
  QualityReport q;
  if (args.region.empty()) {
    q = quality_report(mesh);
  } else if (args.region.rfind("sphere:", 0) == 0) {
    Vec3 c;
    double r = 0;
    if (std::sscanf(args.region.c_str() + 7, "%lf,%lf,%lf,%lf", &c[0], &c[1], &c[2], &r) != 4) {
      throw ConfigError("region '" + args.region + "' must be sphere:cx,cy,cz,r");
    }
    q = quality_report(mesh, [&](const Vec3& x) { return (x - c).norm() <= r; });
  } else if (args.region.rfind("fband:", 0) == 0) {
    double lo = 0, hi = 0;
    if (std::sscanf(args.region.c_str() + 6, "%lf,%lf", &lo, &hi) != 2) {
      throw ConfigError("region '" + args.region + "' must be fband:lo,hi");
    }
    if (args.config.empty()) {
      throw ConfigError("fband regions need --config with localized targets");
    }
    const RefitConfig cfg = load_refit_config(args.config);
    if (cfg.targets.kind != TargetSpec::Kind::localized) {
      throw ConfigError("fband regions need a config with localized targets");
    }
    const LocalizationField field = cfg.targets.field;
    q = quality_report(mesh, [&](const Vec3& x) {
      const double d = field.decay(x);
      return d > lo && d < hi;
    });
  } else {
    throw ConfigError("unknown region '" + args.region + "' (use sphere:... or fband:...)");
  }

  if (q.empty_region) {
    std::printf("empty region\n");
  } else {
    std::printf("elements %zu\n", q.element_ids.size());
    std::printf("skewness   min %.6f  mean %.6f  max %.6f\n", q.skew_min, q.skew_mean, q.skew_max);
    std::printf("mean edge  min %.6g  mean %.6g  max %.6g\n", q.edge_min, q.edge_mean, q.edge_max);
    std::printf("degenerate %d  inverted %d\n", q.n_degenerate, q.n_inverted);
  }
  if (!args.out.empty()) {
    write_quality_csv(q, args.out);
    std::printf("wrote %s\n", args.out.c_str());
  }
  return 0;
}

int run_guarded(const std::function<int()>& fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const InvariantError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const DegenerateElementError& e) {
    std::fprintf(stderr, "input error: %s\n", e.what());
    return 2;
  } catch (const TransferError& e) {
    std::fprintf(stderr, "transfer error: %s\n", e.what());
    return 4;
  } catch (const ParseError& e) {
    std::fprintf(stderr, "i/o error: %s\n", e.what());
    return 5;
  } catch (const IoError& e) {
    std::fprintf(stderr, "i/o error: %s\n", e.what());
    return 5;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hexahedral mesh refitting and field transfer"};
  app.require_subcommand(1);
  const auto format_check = CLI::IsMember({"native", "vtk"});

  DemoArgs demo_args;
  CLI::App* demo = app.add_subcommand("demo", "generate a demo mesh plus a matching refit config");
  demo->add_option("name", demo_args.name,
                   "distorted-grid | pyramid | sheared-block | localized-grid")
      ->required();
  demo->add_option("--out", demo_args.out, "mesh output path")->required();
  demo->add_option("--seed", demo_args.seed, "random seed for the seeded generators");
  demo->add_option("--format", demo_args.format, "mesh format")->check(format_check);

  RefitArgs refit_args;
  CLI::App* refit = app.add_subcommand("refit", "relocate mesh nodes toward target shapes");
  refit->add_option("--mesh", refit_args.mesh, "input mesh")->required();
  refit->add_option("--config", refit_args.config, "refit config (JSON)")->required();
  refit->add_option("--out", refit_args.out, "output mesh path")->required();
  refit->add_option("--report", refit_args.report,
                    "report prefix: writes <prefix>_increments.csv and "
                    "<prefix>_quality_{before,after}.csv");
  refit->add_option("--format", refit_args.format, "output mesh format")->check(format_check);

  TransferArgs transfer_args;
  CLI::App* transfer = app.add_subcommand("transfer", "map sampled fields onto a new mesh");
  transfer->add_option("--old-mesh", transfer_args.old_mesh,
                       "mesh the samples came from (informational)");
  transfer->add_option("--new-mesh", transfer_args.new_mesh, "mesh whose nodes are evaluated")
      ->required();
  transfer->add_option("--config", transfer_args.config, "transfer config (JSON)");
  transfer->add_option("--field", transfer_args.fields, "field as name=path (repeatable)")
      ->required();
  transfer->add_option("--out", transfer_args.out, "output prefix: writes <prefix>_<name>.csv")
      ->required();

  QualityArgs quality_args;
  CLI::App* quality = app.add_subcommand("quality", "per-element quality report");
  quality->add_option("--mesh", quality_args.mesh, "input mesh")->required();
  quality->add_option("--region", quality_args.region,
                      "filter: sphere:cx,cy,cz,r or fband:lo,hi (band of the "
                      "localization decay factor at element centroids)");
  quality->add_option("--config", quality_args.config, "refit config defining the fband field");
  quality->add_option("--out", quality_args.out, "per-element CSV output path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  if (demo->parsed()) return run_guarded([&] { return cmd_demo(demo_args); });
  if (refit->parsed()) return run_guarded([&] { return cmd_refit(refit_args); });
  if (transfer->parsed()) return run_guarded([&] { return cmd_transfer(transfer_args); });
  return run_guarded([&] { return cmd_quality(quality_args); });
}
