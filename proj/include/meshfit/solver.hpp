// Newton solver for the refit problem: minimize the distortion potential plus
// sliding penalties over the free nodal positions, walking the element targets
// from their measured start shapes to the goal shapes with an adaptive
// incremental loading controller.
#pragma once

#include <chrono>
#include <limits>
#include <optional>

#include <Eigen/SparseLU>

#include "meshfit/distortion.hpp"
#include "meshfit/io.hpp"
#include "meshfit/sliding.hpp"

namespace meshfit {

struct SolverOptions {
  double tol = 1e-5;        // relative residual and increment tolerance
  int max_iterations = 30;  // Newton iterations per increment
  int increments = 1;       // initial number of uniform target increments
  int max_increments = 20;  // attempt budget, failed attempts included
  int fast_iterations = 5;  // an increment converging within this many
  int grow_after = 2;       // ... iterations this many times doubles the step
  bool line_search = false;  // accept steps only when the potential drops,
                             // halving as needed; when the Newton direction
                             // fails entirely, retry along the Gauss-Newton
                             // direction (positive semidefinite tangent)
  int max_halvings = 8;      // step halvings per direction before giving up
  double tiny = 1e-12;      // element degeneracy guard

  void validate() const {
    if (tol <= 0) throw ConfigError("solver tolerance must be positive");
    if (max_iterations < 1) throw ConfigError("solver needs at least one Newton iteration");
    if (increments < 1) throw ConfigError("increment count must be at least 1");
    if (max_increments < increments) {
      throw ConfigError("increment budget is smaller than the initial schedule");
    }
    if (max_halvings < 0) throw ConfigError("halving count must be nonnegative");
  }
};

struct RefitProblem {
  std::vector<TargetShape> goals;           // one per element
  PenaltyParams penalties;
  std::vector<SlidingInterface> interfaces;
  std::vector<uint8_t> fixed;               // 3N flags, nonzero = dof held

  void validate(const Mesh& mesh) const {
    if (static_cast<int>(goals.size()) != mesh.n_elements()) {
      throw ConfigError("refit problem: " + std::to_string(goals.size()) +
                        " target shapes for " + std::to_string(mesh.n_elements()) + " elements");
    }
    if (fixed.size() != static_cast<size_t>(3 * mesh.n_nodes())) {
      throw ConfigError("refit problem: boundary-condition mask size mismatch");
    }
    penalties.validate();
    for (const TargetShape& t : goals) {
      for (double l : t.edge_length) {
        if (!(l > 0)) throw ConfigError("target edge lengths must be positive");
      }
      for (double a : t.angle) {
        if (!(a > 0) || !(a < M_PI)) {
          throw ConfigError("target angles must lie strictly between 0 and pi");
        }
      }
    }
  }
};

/// Convenience constructors for the fixed-dof mask.
inline std::vector<uint8_t> free_all(const Mesh& mesh) {
  return std::vector<uint8_t>(3 * mesh.n_nodes(), 0);
}

inline void fix_nodes(std::vector<uint8_t>& mask, const std::vector<int>& nodes,
                      const std::array<bool, 3>& axes) {
  for (int n : nodes) {
    for (int a = 0; a < 3; ++a) {
      if (axes[a]) mask[3 * n + a] = 1;
    }
  }
}

inline void fix_axis_everywhere(std::vector<uint8_t>& mask, int axis) {
  for (size_t d = axis; d < mask.size(); d += 3) mask[d] = 1;
}

struct RefitResult {
  std::vector<Vec3> positions;
  NewtonReport report;
};

namespace detail {

struct NewtonOutcome {
  bool converged = false;
  int iters = 0;
  double res_norm = 0;
  double inc_norm = 0;
};

/// Newton iteration at fixed targets. Projection or degeneracy failures and
/// singular tangents count as non-convergence of the attempt, not hard
/// errors: the increment controller reacts by shrinking the step.
///
/// `assemble(positions, exact_hessian, f, K) -> potential` builds the full
/// residual and tangent; `energy(positions) -> potential` evaluates the
/// potential alone. With opts.line_search, a step is accepted only when the
/// potential does not increase, halving up to opts.max_halvings times, first
/// along the Newton direction and then along the Gauss-Newton direction
/// (whose positive-semidefinite tangent guarantees descent).
template <typename AssembleFn, typename EnergyFn>
NewtonOutcome newton_solve(std::vector<Vec3>& positions, const std::vector<int>& free_index,
                           int n_free, const AssembleFn& assemble, const EnergyFn& energy,
                           const SolverOptions& opts) {
  NewtonOutcome out;
  const int n_nodes = static_cast<int>(positions.size());
  double res0 = 0, inc_norm = 0;

  const auto solve_direction =
      [&](const std::vector<Eigen::Triplet<double>>& K_full,
          const Eigen::VectorXd& f_free) -> std::optional<Eigen::VectorXd> {
    std::vector<Eigen::Triplet<double>> K_free;
    K_free.reserve(K_full.size());
    for (const auto& t : K_full) {
      const int r = free_index[t.row()];
      const int c = free_index[t.col()];
      if (r >= 0 && c >= 0) K_free.emplace_back(r, c, t.value());
    }
    Eigen::SparseMatrix<double> K(n_free, n_free);
    K.setFromTriplets(K_free.begin(), K_free.end());
    K.makeCompressed();
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu(K);
    if (lu.info() != Eigen::Success) return std::nullopt;
    Eigen::VectorXd dx = lu.solve(-f_free);
    if (lu.info() != Eigen::Success || !dx.allFinite()) return std::nullopt;
    return dx;
  };
  const auto apply = [&](std::vector<Vec3>& pos, const Eigen::VectorXd& dx, double step) {
    for (int n = 0; n < n_nodes; ++n) {
      for (int a = 0; a < 3; ++a) {
        const int idx = free_index[3 * n + a];
        if (idx >= 0) pos[n][a] += step * dx[idx];
      }
    }
  };
  // Walk halved steps along dx until the potential stops increasing; on
  // success commit the trial state and report the applied step length.
  const auto try_direction = [&](const Eigen::VectorXd& dx, double pot0) -> bool {
    double step = 1.0;
    for (int h = 0; h <= opts.max_halvings; ++h, step *= 0.5) {
      std::vector<Vec3> trial = positions;
      apply(trial, dx, step);
      double pot = std::numeric_limits<double>::infinity();
      try {
        pot = energy(trial);
      } catch (const ProjectionError&) {
      } catch (const DegenerateElementError&) {
      }
      if (pot <= pot0 + 1e-12 * std::max(1.0, std::abs(pot0))) {
        positions = std::move(trial);
        inc_norm = step * dx.norm();
        return true;
      }
    }
    return false;
  };

  for (int it = 0; it <= opts.max_iterations; ++it) {
    Eigen::VectorXd f;
    std::vector<Eigen::Triplet<double>> K_full;
    double pot = 0;
    try {
      pot = assemble(positions, true, f, K_full);
    } catch (const ProjectionError&) {
      return out;  // slid out of reach: retry with a smaller increment
    } catch (const DegenerateElementError&) {
      return out;  // element collapsed mid-iteration
    }

    Eigen::VectorXd f_free(n_free);
    for (int n = 0; n < n_nodes; ++n) {
      for (int a = 0; a < 3; ++a) {
        const int idx = free_index[3 * n + a];
        if (idx >= 0) f_free[idx] = f[3 * n + a];
      }
    }
    const double res = f_free.norm();
    if (it == 0) res0 = res;
    out.iters = it;
    out.res_norm = res;
    out.inc_norm = inc_norm;

    double pos_norm = 0;
    for (const Vec3& p : positions) pos_norm += p.squaredNorm();
    pos_norm = std::sqrt(pos_norm);
    const bool res_ok = res <= opts.tol * std::max(1.0, res0);
    const bool inc_ok = it == 0 || inc_norm <= opts.tol * std::max(1.0, pos_norm);
    if (res_ok && inc_ok) {
      out.converged = true;
      return out;
    }
    if (it == opts.max_iterations) return out;

    const std::optional<Eigen::VectorXd> dx = solve_direction(K_full, f_free);
    if (!opts.line_search) {
      if (!dx) return out;  // singular tangent
      apply(positions, *dx, 1.0);
      inc_norm = dx->norm();
      continue;
    }

    if (dx && try_direction(*dx, pot)) continue;
    // The Newton direction is unusable (ascent or singular tangent): retry
    // with the Gauss-Newton tangent.
    Eigen::VectorXd f_gn;
    std::vector<Eigen::Triplet<double>> K_gn;
    try {
      assemble(positions, false, f_gn, K_gn);
    } catch (const ProjectionError&) {
      return out;
    } catch (const DegenerateElementError&) {
      return out;
    }
    const std::optional<Eigen::VectorXd> dx_gn = solve_direction(K_gn, f_free);
    if (!dx_gn || !try_direction(*dx_gn, pot)) return out;  // stuck on this increment
  }
  return out;
}

/// Adaptive incremental loading: walk alpha from 0 to 1, asking `attempt` to
/// equilibrate at each trial level. Bisect the step when an attempt fails,
/// double it after `grow_after` consecutive attempts converging within
/// `fast_iterations`, stop when the budget runs out or the step underflows
/// 1/1024 of its initial value. Every attempt, failed ones included, gets a
/// report row. Returns the level reached.
template <typename AttemptFn>
double run_increments(NewtonReport& report, const SolverOptions& opts, const AttemptFn& attempt) {
  double alpha = 0;
  double step = 1.0 / opts.increments;
  const double min_step = step / 1024.0;
  int fast_streak = 0;
  while (alpha < 1.0 - 1e-12 && report.n_inc < opts.max_increments) {
    const double alpha_try = std::min(1.0, alpha + step);
    const auto t0 = std::chrono::steady_clock::now();
    const NewtonOutcome out = attempt(alpha_try);
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report.increments.push_back(
        {alpha_try, out.iters, out.res_norm, out.inc_norm, secs, out.converged});
    ++report.n_inc;
    if (out.converged) {
      alpha = alpha_try;
      if (out.iters <= opts.fast_iterations) {
        if (++fast_streak >= opts.grow_after) {
          step = std::min(2 * step, 1.0);
          fast_streak = 0;
        }
      } else {
        fast_streak = 0;
      }
    } else {
      step *= 0.5;
      fast_streak = 0;
      if (step < min_step) break;
    }
  }
  return alpha;
}

}  // namespace detail

/// Relocate the mesh nodes so the element shapes approach `problem.goals`,
/// holding fixed dofs and sliding the interface nodes on their frozen
/// surfaces. Targets are blended per increment between the shapes measured on
/// the input mesh (once, up front) and the goals. The controller bisects the
/// increment on failure, doubles it after `grow_after` consecutive fast
/// increments, and gives up when the attempt budget is exhausted or the step
/// underflows 1/1024 of its initial value; the report then says
/// converged = false and `positions` holds the last accepted state.
inline RefitResult refit(const Mesh& mesh, const RefitProblem& problem,
                         const SolverOptions& opts = {}) {
  opts.validate();
  problem.validate(mesh);
  const auto t_start = std::chrono::steady_clock::now();

  std::vector<TargetShape> start_shapes(mesh.n_elements());
  std::vector<Vec3> scale_points(mesh.n_elements());
  for (int e = 0; e < mesh.n_elements(); ++e) {
    start_shapes[e] = measure_target_shape(mesh, e);
    scale_points[e] = element_centroid(mesh, e);
  }

  std::vector<int> free_index(3 * mesh.n_nodes(), -1);
  int n_free = 0;
  for (size_t d = 0; d < problem.fixed.size(); ++d) {
    if (!problem.fixed[d]) free_index[d] = n_free++;
  }

  RefitResult result;
  result.positions = mesh.nodes;
  NewtonReport& report = result.report;

  std::vector<TargetShape> targets(mesh.n_elements());
  const double alpha = detail::run_increments(
      report, opts, [&](double alpha_try) -> detail::NewtonOutcome {
        for (int e = 0; e < mesh.n_elements(); ++e) {
          targets[e] = increment_targets(start_shapes[e], problem.goals[e], alpha_try);
        }
        const auto assemble = [&](const std::vector<Vec3>& pos, bool exact_hessian,
                                  Eigen::VectorXd& f,
                                  std::vector<Eigen::Triplet<double>>& K) -> double {
          GlobalSystem g = assemble_distortion(mesh, pos, targets, problem.penalties,
                                               scale_points, opts.tiny, exact_hessian);
          f = std::move(g.f);
          K = std::move(g.K);
          double pot = g.potential;
          for (const SlidingInterface& si : problem.interfaces) {
            pot += assemble_sliding(si, pos, f, K, exact_hessian);
          }
          return pot;
        };
        const auto energy = [&](const std::vector<Vec3>& pos) -> double {
          double pot = assemble_distortion_potential(mesh, pos, targets, problem.penalties,
                                                     scale_points, opts.tiny);
          for (const SlidingInterface& si : problem.interfaces) {
            pot += sliding_potential(si, pos);
          }
          return pot;
        };
        const std::vector<Vec3> backup = result.positions;
        const detail::NewtonOutcome out =
            detail::newton_solve(result.positions, free_index, n_free, assemble, energy, opts);
        if (!out.converged) result.positions = backup;
        return out;
      });

  report.converged = alpha >= 1.0 - 1e-12;
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return result;
}

}  // namespace meshfit
