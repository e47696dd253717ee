// Field transfer between meshes: moving-least-squares interpolation of
// scattered samples with Gaussian patch weights, a log-space variant for
// positive fields, and a rotation-aware scheme for 3x3 tensor fields that
// interpolates the polar rotation, the principal frame, and the principal
// stretches separately so the transferred tensors stay physically admissible.
#pragma once

#include <optional>
#include <unordered_map>

#include <Eigen/Eigenvalues>
#include <Eigen/Geometry>
#include <Eigen/SVD>

#include "meshfit/io.hpp"

namespace meshfit {

struct TransferOptions {
  int order = 1;               // polynomial order of the local fit (1 or 2)
  double radius = 0;           // patch radius; 0 derives it from sample spacing
  double weight_c = 0;         // Gaussian decay rate; 0 derives 9/radius^2
  double radius_growth = 1.5;  // growth factor when a patch is underfull
  int max_retries = 3;         // growth attempts before declaring an orphan
  bool strict = false;         // error on rank-deficient patches instead of
                               // falling back to a lower order
  bool log_scale = false;      // scalars only: fit ln(y) and exponentiate
  bool tensor_componentwise = false;  // tensors: fit the nine components as
                                      // plain scalars instead of the
                                      // rotation/stretch split

  void validate() const {
    if (order < 0 || order > 2) throw ConfigError("transfer order must be 0, 1 or 2");
    if (radius < 0) throw ConfigError("transfer radius must be nonnegative");
    if (weight_c < 0) throw ConfigError("transfer weight decay must be nonnegative");
    if (radius_growth <= 1) throw ConfigError("transfer radius growth must exceed 1");
    if (max_retries < 0) throw ConfigError("transfer retry count must be nonnegative");
  }

  double decay(double patch_radius) const {
    return weight_c > 0 ? weight_c : 9.0 / (patch_radius * patch_radius);
  }
};

struct TransferStats {
  int n_eval = 0;
  int n_snapped = 0;            // eval points coincident with a sample
  int n_order_fallback = 0;     // patches fitted below the requested order
  int n_rotation_fallback = 0;  // clustered stretches: frame averaged, not fit
  double radius = 0;            // initial patch radius actually used
};

/// Maps a log-space prediction back to a value that is strictly positive and
/// finite even when a poorly conditioned local fit extrapolates beyond the
/// exponent range of double (|x| ~ 709), where plain exp would return 0 or inf.
inline double safe_exp(double x) { return std::exp(std::clamp(x, -700.0, 700.0)); }

/// Gaussian patch weights exp(-c d^2), normalized to unit sum.
inline Eigen::VectorXd normalized_weights(const std::vector<double>& dist2, double c) {
  Eigen::VectorXd w(dist2.size());
  for (size_t i = 0; i < dist2.size(); ++i) w[i] = std::exp(-c * dist2[i]);
  const double sum = w.sum();
  if (!(sum > 0)) {
    throw TransferError("patch weights underflowed to zero; the patch radius is far too small");
  }
  return w / sum;
}

namespace detail {

/// Uniform hash grid over the sample points for ball queries.
class SampleGrid {
 public:
  SampleGrid(const std::vector<Vec3>& pts, double cell) : pts_(&pts), cell_(cell) {
    if (!(cell_ > 0)) cell_ = 1.0;
    for (size_t i = 0; i < pts.size(); ++i) {
      cells_[key(pts[i])].push_back(static_cast<int>(i));
    }
  }

  std::vector<int> query_ball(const Vec3& x, double r) const {
    std::vector<int> out;
    const double r2 = r * r;
    const auto lo = coords(x - Vec3::Constant(r));
    const auto hi = coords(x + Vec3::Constant(r));
    for (int64_t i = lo[0]; i <= hi[0]; ++i) {
      for (int64_t j = lo[1]; j <= hi[1]; ++j) {
        for (int64_t k = lo[2]; k <= hi[2]; ++k) {
          const auto it = cells_.find(pack(i, j, k));
          if (it == cells_.end()) continue;
          for (int idx : it->second) {
            if (((*pts_)[idx] - x).squaredNorm() <= r2) out.push_back(idx);
          }
        }
      }
    }
    return out;
  }

  /// Closest sample to x, optionally excluding one index; -1 if none.
  int nearest(const Vec3& x, int exclude = -1) const {
    double r = cell_;
    for (int round = 0; round < 24; ++round) {
      const double span = 2 * r / cell_ + 1;
      if (span * span * span > 30000) break;  // too many cells: scan instead
      int best = -1;
      double best_d = std::numeric_limits<double>::max();
      for (int idx : query_ball(x, r)) {
        if (idx == exclude) continue;
        const double d = ((*pts_)[idx] - x).norm();
        if (d < best_d) {
          best_d = d;
          best = idx;
        }
      }
      if (best >= 0) {
        // One refinement pass: the true nearest may sit in a cell the first
        // ball missed.
        for (int idx : query_ball(x, best_d)) {
          if (idx == exclude) continue;
          const double d = ((*pts_)[idx] - x).norm();
          if (d < best_d) {
            best_d = d;
            best = idx;
          }
        }
        return best;
      }
      r *= 2;
    }
    int best = -1;
    double best_d = std::numeric_limits<double>::max();
    for (size_t idx = 0; idx < pts_->size(); ++idx) {
      if (static_cast<int>(idx) == exclude) continue;
      const double d = ((*pts_)[idx] - x).norm();
      if (d < best_d) {
        best_d = d;
        best = static_cast<int>(idx);
      }
    }
    return best;
  }

 private:
  std::array<int64_t, 3> coords(const Vec3& x) const {
    return {static_cast<int64_t>(std::floor(x[0] / cell_)),
            static_cast<int64_t>(std::floor(x[1] / cell_)),
            static_cast<int64_t>(std::floor(x[2] / cell_))};
  }
  static int64_t pack(int64_t i, int64_t j, int64_t k) {
    const int64_t m = (int64_t{1} << 21) - 1;
    return ((i & m) << 42) | ((j & m) << 21) | (k & m);
  }
  int64_t key(const Vec3& x) const {
    const auto c = coords(x);
    return pack(c[0], c[1], c[2]);
  }

  const std::vector<Vec3>* pts_;
  double cell_;
  std::unordered_map<int64_t, std::vector<int>> cells_;
};

/// Mean nearest-neighbour distance over a strided probe subset.
inline double estimate_sample_spacing(const std::vector<Vec3>& pts) {
  if (pts.size() < 2) return 1.0;
  Vec3 lo = pts.front(), hi = pts.front();
  for (const Vec3& p : pts) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const double diag = (hi - lo).norm();
  SampleGrid grid(pts, diag > 0 ? diag / std::cbrt(static_cast<double>(pts.size())) : 1.0);
  const size_t probes = std::min<size_t>(pts.size(), 64);
  const size_t stride = std::max<size_t>(1, pts.size() / probes);
  double sum = 0;
  size_t count = 0;
  for (size_t i = 0; i < pts.size(); i += stride) {
    const int nn = grid.nearest(pts[i], static_cast<int>(i));
    if (nn >= 0) {
      sum += (pts[nn] - pts[i]).norm();
      ++count;
    }
  }
  return count > 0 && sum > 0 ? sum / count : 1.0;
}

inline int basis_size(int order) { return order == 0 ? 1 : order == 1 ? 4 : 10; }

/// Polynomial basis in patch-local coordinates xi = (x - x0)/scale, so the
/// value of the fit at the eval point is simply the first coefficient.
inline void eval_basis(const Vec3& xi, int order, double* p) {
  p[0] = 1;
  if (order >= 1) {
    p[1] = xi[0];
    p[2] = xi[1];
    p[3] = xi[2];
  }
  if (order >= 2) {
    p[4] = xi[0] * xi[0];
    p[5] = xi[1] * xi[1];
    p[6] = xi[2] * xi[2];
    p[7] = xi[0] * xi[1];
    p[8] = xi[0] * xi[2];
    p[9] = xi[1] * xi[2];
  }
}

}  // namespace detail

/// Weighted moving-least-squares fit over one patch; `values` may carry
/// several right-hand columns fitted simultaneously. Falls back to lower
/// orders when the scatter cannot support the requested basis (unless
/// strict), down to the weighted mean at order 0.
struct PatchFit {
  Eigen::VectorXd value;  // fitted value at the patch center, one per column
  int used_order = 0;
};

inline PatchFit mls_fit(const std::vector<Vec3>& sample_points, const std::vector<int>& patch,
                        const Eigen::VectorXd& weights, const Eigen::MatrixXd& values,
                        const Vec3& center, double scale, int order, bool strict) {
  const int n = static_cast<int>(patch.size());
  if (n == 0) throw TransferError("moving-least-squares fit on an empty patch");
  if (weights.size() != n || values.rows() != n) {
    throw TransferError("moving-least-squares fit: inconsistent patch arrays");
  }
  for (int try_order = order; try_order >= 0; --try_order) {
    const int m = detail::basis_size(try_order);
    if (n < m) continue;
    Eigen::MatrixXd A(n, m);
    double p[10];
    for (int i = 0; i < n; ++i) {
      const double sw = std::sqrt(weights[i]);
      detail::eval_basis((sample_points[patch[i]] - center) / scale, try_order, p);
      for (int j = 0; j < m; ++j) A(i, j) = sw * p[j];
    }
    Eigen::MatrixXd b(n, values.cols());
    for (int i = 0; i < n; ++i) b.row(i) = std::sqrt(weights[i]) * values.row(i);
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
    if (qr.rank() < m) {
      if (strict) {
        throw TransferError("patch cannot support an order-" + std::to_string(try_order) +
                            " fit (rank " + std::to_string(qr.rank()) + " of " +
                            std::to_string(m) + ")");
      }
      continue;
    }
    const Eigen::MatrixXd coeff = qr.solve(b);
    PatchFit fit;
    fit.value = coeff.row(0).transpose();
    fit.used_order = try_order;
    return fit;
  }
  if (strict) throw TransferError("patch has too few samples for any admissible fit");
  // order 0 with n >= 1 always succeeds above; reaching here means n < 1.
  throw TransferError("moving-least-squares fit on an empty patch");
}

/// Axial-vector logarithm and exponential on rotations.
inline Vec3 rotation_log(const Mat3& R) {
  const Eigen::AngleAxisd aa(R);
  return aa.angle() * aa.axis();
}

inline Mat3 rotation_exp(const Vec3& v) {
  const double angle = v.norm();
  if (angle < 1e-300) return Mat3::Identity();
  return Eigen::AngleAxisd(angle, v / angle).toRotationMatrix();
}

/// Weighted intrinsic mean of rotations (fixed point of the weighted
/// logarithm map), seeded at the heaviest sample.
inline Mat3 rotation_mean(const std::vector<Mat3>& rotations, const Eigen::VectorXd& weights) {
  if (rotations.empty()) throw TransferError("rotation mean of an empty set");
  if (weights.size() != static_cast<Eigen::Index>(rotations.size())) {
    throw TransferError("rotation mean: weight count mismatch");
  }
  const double wsum = weights.sum();
  if (!(wsum > 0)) throw TransferError("rotation mean: weights sum to zero");
  int seed = 0;
  weights.maxCoeff(&seed);
  Mat3 mean = rotations[seed];
  for (int it = 0; it < 50; ++it) {
    Vec3 delta = Vec3::Zero();
    for (size_t j = 0; j < rotations.size(); ++j) {
      delta += weights[j] * rotation_log(mean.transpose() * rotations[j]);
    }
    delta /= wsum;
    if (delta.norm() <= 1e-12) return mean;
    mean = mean * rotation_exp(delta);
  }
  throw TransferError("rotation averaging did not converge");
}

/// Split T = R * Q^T diag(lambda) Q: proper polar rotation R, principal
/// stretches lambda (descending) and the principal frame Q (rows are the
/// principal directions, right-handed, sign-canonicalized).
struct TensorDecomposition {
  Mat3 rotation;
  Vec3 lambda;
  Mat3 frame;
};

inline TensorDecomposition decompose_tensor(const Mat3& T) {
  const Eigen::JacobiSVD<Mat3> svd(T, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 R = svd.matrixU() * svd.matrixV().transpose();
  if (R.determinant() < 0) {
    throw TransferError("tensor polar factor is a reflection (negative determinant)");
  }
  Mat3 S = R.transpose() * T;
  S = 0.5 * (S + S.transpose());
  const Eigen::SelfAdjointEigenSolver<Mat3> es(S);
  if (es.info() != Eigen::Success) throw TransferError("stretch eigendecomposition failed");
  TensorDecomposition d;
  d.rotation = R;
  Mat3 Q;
  for (int i = 0; i < 3; ++i) {
    d.lambda[i] = es.eigenvalues()[2 - i];  // descending
    Q.row(i) = es.eigenvectors().col(2 - i).transpose();
  }
  // Deterministic signs: dominant component of the first two rows positive,
  // third row completes a right-handed frame.
  for (int i = 0; i < 2; ++i) {
    int piv = 0;
    Q.row(i).cwiseAbs().maxCoeff(&piv);
    if (Q(i, piv) < 0) Q.row(i) = -Q.row(i);
  }
  const Vec3 r0 = Q.row(0), r1 = Q.row(1);
  Q.row(2) = r0.cross(r1).transpose();
  d.frame = Q;
  return d;
}

namespace detail {

/// Of the four sign variants of `frame` that stay right-handed, the one
/// closest to `reference`; undoes canonicalization flips inside a patch.
inline Mat3 align_frame(const Mat3& frame, const Mat3& reference) {
  static const std::array<Vec3, 4> signs = {Vec3(1, 1, 1), Vec3(-1, -1, 1), Vec3(-1, 1, -1),
                                            Vec3(1, -1, -1)};
  Mat3 best = frame;
  double best_score = -std::numeric_limits<double>::max();
  for (const Vec3& s : signs) {
    const Mat3 cand = s.asDiagonal() * frame;
    const double score = (reference * cand.transpose()).trace();
    if (score > best_score) {
      best_score = score;
      best = cand;
    }
  }
  return best;
}

struct PatchQuery {
  std::vector<int> indices;
  std::vector<double> dist2;
  double radius = 0;  // radius that produced the patch
};

inline PatchQuery find_patch(const SampleGrid& grid, const std::vector<Vec3>& pts, const Vec3& x,
                             double radius, int min_count, double growth, int max_retries,
                             int point_id) {
  PatchQuery q;
  double r = radius;
  for (int attempt = 0; attempt <= max_retries; ++attempt) {
    q.indices = grid.query_ball(x, r);
    if (static_cast<int>(q.indices.size()) >= min_count) {
      q.radius = r;
      q.dist2.clear();
      q.dist2.reserve(q.indices.size());
      for (int idx : q.indices) q.dist2.push_back((pts[idx] - x).squaredNorm());
      return q;
    }
    r *= growth;
  }
  throw TransferError("orphan point " + std::to_string(point_id) + " at (" +
                      std::to_string(x[0]) + ", " + std::to_string(x[1]) + ", " +
                      std::to_string(x[2]) + "): only " + std::to_string(q.indices.size()) +
                      " samples within reach, " + std::to_string(min_count) + " required");
}

}  // namespace detail

/// Scalar transfer: the field sampled at `samples` evaluated at `points`.
inline std::vector<double> transfer_scalar(const FieldSamples& samples,
                                           const std::vector<Vec3>& points,
                                           const TransferOptions& opt,
                                           TransferStats* stats_out = nullptr) {
  opt.validate();
  if (samples.is_tensor) throw TransferError("scalar transfer on a tensor field");
  if (samples.points.empty()) throw TransferError("scalar transfer without samples");
  if (samples.scalars.size() != samples.points.size()) {
    throw TransferError("scalar transfer: value count does not match sample count");
  }
  TransferStats stats;
  stats.radius = opt.radius > 0
                     ? opt.radius
                     : 2.5 * detail::estimate_sample_spacing(samples.points);
  const detail::SampleGrid grid(samples.points, stats.radius);
  const double snap_tol = 1e-9 * stats.radius;
  const int min_count = detail::basis_size(opt.order);

  std::vector<double> out(points.size());
  for (size_t i = 0; i < points.size(); ++i) {
    ++stats.n_eval;
    const Vec3& x = points[i];
    const int nn = grid.nearest(x);
    if (nn >= 0 && (samples.points[nn] - x).norm() <= snap_tol) {
      out[i] = samples.scalars[nn];
      ++stats.n_snapped;
      continue;
    }
    const detail::PatchQuery patch =
        detail::find_patch(grid, samples.points, x, stats.radius, min_count, opt.radius_growth,
                           opt.max_retries, static_cast<int>(i));
    const Eigen::VectorXd w = normalized_weights(patch.dist2, opt.decay(patch.radius));
    Eigen::MatrixXd values(patch.indices.size(), 1);
    for (size_t j = 0; j < patch.indices.size(); ++j) {
      double y = samples.scalars[patch.indices[j]];
      if (opt.log_scale) {
        if (!(y > 0)) {
          throw TransferError("log-scale transfer requires positive values; sample " +
                              std::to_string(patch.indices[j]) + " is " + std::to_string(y));
        }
        y = std::log(y);
      }
      values(j, 0) = y;
    }
    const PatchFit fit = mls_fit(samples.points, patch.indices, w, values, x, patch.radius,
                                 opt.order, opt.strict);
    if (fit.used_order < opt.order) ++stats.n_order_fallback;
    out[i] = opt.log_scale ? safe_exp(fit.value[0]) : fit.value[0];
  }
  if (stats_out) *stats_out = stats;
  return out;
}

/// Tensor transfer: rotation part, principal frame and principal stretches
/// interpolated separately and reassembled. Stretches travel in log space, so
/// positive-definite inputs stay positive definite.
inline std::vector<Mat3> transfer_tensor(const FieldSamples& samples,
                                         const std::vector<Vec3>& points,
                                         const TransferOptions& opt,
                                         TransferStats* stats_out = nullptr) {
  opt.validate();
  if (!samples.is_tensor) throw TransferError("tensor transfer on a scalar field");
  if (samples.points.empty()) throw TransferError("tensor transfer without samples");
  if (samples.tensors.size() != samples.points.size()) {
    throw TransferError("tensor transfer: value count does not match sample count");
  }
  TransferStats stats;
  stats.radius = opt.radius > 0
                     ? opt.radius
                     : 2.5 * detail::estimate_sample_spacing(samples.points);
  const detail::SampleGrid grid(samples.points, stats.radius);
  const double snap_tol = 1e-9 * stats.radius;
  const int min_count = detail::basis_size(opt.order);

  std::vector<std::optional<TensorDecomposition>> decomp(samples.points.size());
  const auto decompose_cached = [&](int idx) -> const TensorDecomposition& {
    if (!decomp[idx]) {
      try {
        decomp[idx] = decompose_tensor(samples.tensors[idx]);
      } catch (const TransferError& err) {
        throw TransferError("sample " + std::to_string(idx) + ": " + err.what());
      }
    }
    return *decomp[idx];
  };

  std::vector<Mat3> out(points.size());
  for (size_t i = 0; i < points.size(); ++i) {
    ++stats.n_eval;
    const Vec3& x = points[i];
    const int nn = grid.nearest(x);
    if (nn >= 0 && (samples.points[nn] - x).norm() <= snap_tol) {
      out[i] = samples.tensors[nn];
      ++stats.n_snapped;
      continue;
    }
    const detail::PatchQuery patch =
        detail::find_patch(grid, samples.points, x, stats.radius, min_count, opt.radius_growth,
                           opt.max_retries, static_cast<int>(i));
    const int n = static_cast<int>(patch.indices.size());
    const Eigen::VectorXd w = normalized_weights(patch.dist2, opt.decay(patch.radius));

    int seed = 0;
    w.maxCoeff(&seed);
    const Mat3 seed_frame = decompose_cached(patch.indices[seed]).frame;

    std::vector<Mat3> rotations(n), frames(n);
    Eigen::MatrixXd log_lambda(n, 3);
    bool clustered = false;
    for (int j = 0; j < n; ++j) {
      const TensorDecomposition& d = decompose_cached(patch.indices[j]);
      rotations[j] = d.rotation;
      frames[j] = detail::align_frame(d.frame, seed_frame);
      const double scale = std::abs(d.lambda[0]);
      if (d.lambda[0] - d.lambda[1] < 1e-8 * scale || d.lambda[1] - d.lambda[2] < 1e-8 * scale) {
        clustered = true;
      }
      for (int k = 0; k < 3; ++k) {
        if (!(d.lambda[k] > 0)) {
          throw TransferError("sample " + std::to_string(patch.indices[j]) +
                              ": singular stretch, tensor cannot travel in log space");
        }
        log_lambda(j, k) = std::log(d.lambda[k]);
      }
    }

    // Rotation parts: intrinsic mean plus a componentwise fit of the
    // logarithmic increments about it.
    const auto fit_rotation = [&](const std::vector<Mat3>& rs, bool allow_fit) {
      const Mat3 mean = rotation_mean(rs, w);
      if (!allow_fit) return mean;
      Eigen::MatrixXd incr(n, 3);
      for (int j = 0; j < n; ++j) {
        incr.row(j) = rotation_log(mean.transpose() * rs[j]).transpose();
      }
      const PatchFit fit = mls_fit(samples.points, patch.indices, w, incr, x, patch.radius,
                                   opt.order, opt.strict);
      if (fit.used_order < opt.order) ++stats.n_order_fallback;
      return Mat3(mean * rotation_exp(fit.value));
    };
    const Mat3 R = fit_rotation(rotations, true);
    if (clustered) ++stats.n_rotation_fallback;
    const Mat3 Q = fit_rotation(frames, !clustered);

    const PatchFit lam_fit = mls_fit(samples.points, patch.indices, w, log_lambda, x,
                                     patch.radius, opt.order, opt.strict);
    if (lam_fit.used_order < opt.order) ++stats.n_order_fallback;
    const Vec3 lambda(safe_exp(lam_fit.value[0]), safe_exp(lam_fit.value[1]),
                      safe_exp(lam_fit.value[2]));

    out[i] = R * Q.transpose() * lambda.asDiagonal() * Q;
  }
  if (stats_out) *stats_out = stats;
  return out;
}

/// Componentwise tensor transfer: the nine entries fitted as independent
/// scalars. Cheaper than the structure-preserving scheme but offers no
/// admissibility guarantees on the result.
inline std::vector<Mat3> transfer_tensor_componentwise(const FieldSamples& samples,
                                                       const std::vector<Vec3>& points,
                                                       const TransferOptions& opt,
                                                       TransferStats* stats_out = nullptr) {
  opt.validate();
  if (!samples.is_tensor) throw TransferError("tensor transfer on a scalar field");
  if (samples.points.empty()) throw TransferError("tensor transfer without samples");
  if (samples.tensors.size() != samples.points.size()) {
    throw TransferError("tensor transfer: value count does not match sample count");
  }
  TransferStats stats;
  stats.radius = opt.radius > 0
                     ? opt.radius
                     : 2.5 * detail::estimate_sample_spacing(samples.points);
  const detail::SampleGrid grid(samples.points, stats.radius);
  const double snap_tol = 1e-9 * stats.radius;
  const int min_count = detail::basis_size(opt.order);

  std::vector<Mat3> out(points.size());
  for (size_t i = 0; i < points.size(); ++i) {
    ++stats.n_eval;
    const Vec3& x = points[i];
    const int nn = grid.nearest(x);
    if (nn >= 0 && (samples.points[nn] - x).norm() <= snap_tol) {
      out[i] = samples.tensors[nn];
      ++stats.n_snapped;
      continue;
    }
    const detail::PatchQuery patch =
        detail::find_patch(grid, samples.points, x, stats.radius, min_count, opt.radius_growth,
                           opt.max_retries, static_cast<int>(i));
    const int n = static_cast<int>(patch.indices.size());
    const Eigen::VectorXd w = normalized_weights(patch.dist2, opt.decay(patch.radius));
    Eigen::MatrixXd values(n, 9);
    for (int j = 0; j < n; ++j) {
      const Mat3& T = samples.tensors[patch.indices[j]];
      for (int r = 0; r < 3; ++r) {
        for (int col = 0; col < 3; ++col) values(j, 3 * r + col) = T(r, col);
      }
    }
    const PatchFit fit = mls_fit(samples.points, patch.indices, w, values, x, patch.radius,
                                 opt.order, opt.strict);
    if (fit.used_order < opt.order) ++stats.n_order_fallback;
    for (int r = 0; r < 3; ++r) {
      for (int col = 0; col < 3; ++col) out[i](r, col) = fit.value[3 * r + col];
    }
  }
  if (stats_out) *stats_out = stats;
  return out;
}

/// Convenience wrapper mapping a sampled field onto new evaluation points.
inline FieldSamples transfer_fields(const FieldSamples& samples, const std::vector<Vec3>& points,
                                    const TransferOptions& opt,
                                    TransferStats* stats_out = nullptr) {
  FieldSamples out;
  out.points = points;
  out.is_tensor = samples.is_tensor;
  if (samples.is_tensor) {
    const std::vector<Mat3> t = opt.tensor_componentwise
                                    ? transfer_tensor_componentwise(samples, points, opt, stats_out)
                                    : transfer_tensor(samples, points, opt, stats_out);
    out.tensors.assign(t.begin(), t.end());
  } else {
    out.scalars = transfer_scalar(samples, points, opt, stats_out);
  }
  return out;
}

}  // namespace meshfit
