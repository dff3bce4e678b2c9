#pragma once

// Trajectory alignment and evaluation metrics: absolute trajectory error,
// relative pose error, and the absolute state error over SE_2(3), plus the
// finite-difference velocity baseline.

#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "stateval/error.hpp"
#include "stateval/liegroups.hpp"
#include "stateval/trajectory.hpp"

namespace stateval {

enum class AlignMode { Sim3, Se3, Identity };

constexpr std::string_view to_string(AlignMode mode) noexcept {
  switch (mode) {
    case AlignMode::Sim3: return "sim3";
    case AlignMode::Se3: return "se3";
    case AlignMode::Identity: return "none";
  }
  return "unknown";
}

/// x -> s R x + t.
struct SimilarityTransform {
  double scale = 1.0;
  Rotation rotation;
  Vector3 translation = Vector3::Zero();

  static SimilarityTransform identity() { return {}; }

  Vector3 apply(const Vector3& p) const { return scale * (rotation * p) + translation; }
};

/// R' = R R_i, p' = s R p_i + t, v' = s R v_i.
inline ExtendedPose apply_alignment(const SimilarityTransform& s, const ExtendedPose& x) {
  return {s.rotation * x.rotation, s.apply(x.translation), s.scale * (s.rotation * x.velocity)};
}

/// Closed-form least-squares similarity (Umeyama) mapping `est` columns onto
/// `ref` columns. Se3 fixes the scale to one; Identity returns {1, I, 0}.
inline SimilarityTransform umeyama_align(const Eigen::Matrix3Xd& est, const Eigen::Matrix3Xd& ref,
                                         AlignMode mode) {
  if (est.cols() != ref.cols()) throw Error(ErrorCode::InvalidArgument, "point sets differ in size");
  if (mode == AlignMode::Identity) return SimilarityTransform::identity();
  const Eigen::Index n = est.cols();
  if (n < 3) {
    throw Error(ErrorCode::TooFewPairs, std::to_string(n) + " pairs; alignment needs at least 3");
  }
  if (est == ref) return SimilarityTransform::identity();

  const Vector3 mu_est = est.rowwise().mean();
  const Vector3 mu_ref = ref.rowwise().mean();
  const Eigen::Matrix3Xd x = est.colwise() - mu_est;
  const Eigen::Matrix3Xd y = ref.colwise() - mu_ref;
  const double inv_n = 1.0 / static_cast<double>(n);

  const Matrix3 scatter = x * x.transpose() * inv_n;
  const Eigen::SelfAdjointEigenSolver<Matrix3> eig(scatter, Eigen::EigenvaluesOnly);
  const Vector3 lambda = eig.eigenvalues();  // ascending
  if (!(lambda[2] > 0.0) || lambda[1] <= 1e-12 * lambda[2]) {
    throw Error(ErrorCode::DegenerateGeometry, "estimate points are coincident or collinear");
  }
  if (!((y.squaredNorm() * inv_n) > 0.0)) {
    throw Error(ErrorCode::DegenerateGeometry, "reference points are coincident");
  }

  const Matrix3 cov = y * x.transpose() * inv_n;
  Eigen::JacobiSVD<Matrix3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Matrix3 d = Matrix3::Identity();
  if (svd.matrixU().determinant() * svd.matrixV().determinant() < 0.0) d(2, 2) = -1.0;
  const Rotation r = Rotation::trusted(svd.matrixU() * d * svd.matrixV().transpose());

  double s = 1.0;
  if (mode == AlignMode::Sim3) {
    const double var_est = x.squaredNorm() * inv_n;
    s = (svd.singularValues().asDiagonal() * d).trace() / var_est;
    if (!(s > 0.0)) throw Error(ErrorCode::DegenerateGeometry, "non-positive alignment scale");
  }
  return {s, r, mu_ref - s * (r * mu_est)};
}

/// Sum of squared residuals ||ref_i - (s R est_i + t)||^2.
inline double alignment_residual(const SimilarityTransform& s, const Eigen::Matrix3Xd& est,
                                 const Eigen::Matrix3Xd& ref) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < est.cols(); ++i) total += (ref.col(i) - s.apply(est.col(i))).squaredNorm();
  return total;
}

/// Paired translations as 3 x n matrices (estimate, reference).
inline std::pair<Eigen::Matrix3Xd, Eigen::Matrix3Xd> paired_translations(
    const Trajectory& est, const Trajectory& ref, const AssociationPairing& pairing) {
  Eigen::Matrix3Xd e(3, static_cast<Eigen::Index>(pairing.size()));
  Eigen::Matrix3Xd r(3, static_cast<Eigen::Index>(pairing.size()));
  for (std::size_t k = 0; k < pairing.size(); ++k) {
    e.col(static_cast<Eigen::Index>(k)) = est[pairing.pairs[k].est].state.translation;
    r.col(static_cast<Eigen::Index>(k)) = ref[pairing.pairs[k].ref].state.translation;
  }
  return {std::move(e), std::move(r)};
}

inline SimilarityTransform align_trajectories(const Trajectory& est, const Trajectory& ref,
                                              const AssociationPairing& pairing, AlignMode mode) {
  if (pairing.empty()) throw Error(ErrorCode::NoOverlap, "empty pairing");
  const auto [e, r] = paired_translations(est, ref, pairing);
  return umeyama_align(e, r, mode);
}

// Summary statistics

struct MetricReport {
  std::vector<double> per_step;
  double rmse = 0.0;
  double mean = 0.0;
  double std = 0.0;  // population standard deviation
  double median = 0.0;
  std::size_t count = 0;
};

inline MetricReport make_report(std::vector<double> per_step) {
  if (per_step.empty()) throw Error(ErrorCode::NoOverlap, "no error terms to summarize");
  MetricReport r;
  r.count = per_step.size();
  const double n = static_cast<double>(r.count);
  double sum = 0.0;
  double sum_sq = 0.0;
  for (double e : per_step) {
    sum += e;
    sum_sq += e * e;
  }
  r.mean = sum / n;
  r.rmse = std::sqrt(sum_sq / n);
  double var = 0.0;
  for (double e : per_step) var += (e - r.mean) * (e - r.mean);
  r.std = std::sqrt(var / n);

  std::vector<double> sorted = per_step;
  const std::size_t mid = sorted.size() / 2;
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(mid), sorted.end());
  r.median = sorted[mid];
  if (sorted.size() % 2 == 0) {
    const double lower = *std::max_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(mid));
    r.median = 0.5 * (lower + r.median);
  }
  r.per_step = std::move(per_step);
  return r;
}

// Metrics
//
// The per-step norms are evaluated in left-invariant form: for E = Q^-1 X,
// ||E - I||_F = ||X - Q||_F blockwise because R_Q is orthogonal. This is the
// same quantity but is exactly zero when X == Q.

/// Absolute state error: ||Q_i^-1 S P_i - I_5||_F per pair.
inline MetricReport ase(const Trajectory& est, const Trajectory& ref, const AssociationPairing& pairing,
                        const SimilarityTransform& alignment) {
  if (!est.has_velocity()) throw Error(ErrorCode::MissingVelocity, "estimate has no velocity columns");
  if (!ref.has_velocity()) throw Error(ErrorCode::MissingVelocity, "reference has no velocity columns");
  if (pairing.empty()) throw Error(ErrorCode::NoOverlap, "empty pairing");
  std::vector<double> errors;
  errors.reserve(pairing.size());
  for (const auto& [i, j] : pairing.pairs) {
    const ExtendedPose p = apply_alignment(alignment, est[i].state);
    const ExtendedPose& q = ref[j].state;
    const double rot = (p.rotation.matrix() - q.rotation.matrix()).squaredNorm();
    const double trans = (p.translation - q.translation).squaredNorm();
    const double vel = (p.velocity - q.velocity).squaredNorm();
    errors.push_back(std::sqrt(rot + trans + vel));
  }
  return make_report(std::move(errors));
}

inline MetricReport ase(const Trajectory& est, const Trajectory& ref, const AssociationPairing& pairing,
                        AlignMode mode = AlignMode::Sim3) {
  if (!est.has_velocity()) throw Error(ErrorCode::MissingVelocity, "estimate has no velocity columns");
  if (!ref.has_velocity()) throw Error(ErrorCode::MissingVelocity, "reference has no velocity columns");
  return ase(est, ref, pairing, align_trajectories(est, ref, pairing, mode));
}

/// Absolute trajectory error: ||trans(Q_i^-1 S P_i)|| per pair.
inline MetricReport ate(const Trajectory& est, const Trajectory& ref, const AssociationPairing& pairing,
                        const SimilarityTransform& alignment) {
  if (pairing.empty()) throw Error(ErrorCode::NoOverlap, "empty pairing");
  std::vector<double> errors;
  errors.reserve(pairing.size());
  for (const auto& [i, j] : pairing.pairs) {
    errors.push_back((alignment.apply(est[i].state.translation) - ref[j].state.translation).norm());
  }
  return make_report(std::move(errors));
}

inline MetricReport ate(const Trajectory& est, const Trajectory& ref, const AssociationPairing& pairing,
                        AlignMode mode = AlignMode::Sim3) {
  return ate(est, ref, pairing, align_trajectories(est, ref, pairing, mode));
}

/// Relative pose error over `delta` pair steps:
/// ||trans((Q_i^-1 Q_{i+d})^-1 (P_i^-1 P_{i+d}))|| for i = 0..N-d-1. No alignment.
inline MetricReport rpe(const Trajectory& est, const Trajectory& ref, const AssociationPairing& pairing,
                        std::size_t delta) {
  if (delta < 1) throw Error(ErrorCode::InvalidArgument, "delta must be >= 1");
  if (pairing.size() <= delta) {
    throw Error(ErrorCode::DeltaTooLarge, "delta " + std::to_string(delta) + " with only " +
                                              std::to_string(pairing.size()) + " pairs");
  }
  const std::size_t m = pairing.size() - delta;
  std::vector<double> errors;
  errors.reserve(m);
  for (std::size_t k = 0; k < m; ++k) {
    const Pose p0 = est[pairing.pairs[k].est].state.pose();
    const Pose p1 = est[pairing.pairs[k + delta].est].state.pose();
    const Pose q0 = ref[pairing.pairs[k].ref].state.pose();
    const Pose q1 = ref[pairing.pairs[k + delta].ref].state.pose();
    // translation of the relative motions in their own start frames
    const Vector3 est_step = p0.rotation.inverse() * (p1.translation - p0.translation);
    const Vector3 ref_step = q0.rotation.inverse() * (q1.translation - q0.translation);
    errors.push_back((est_step - ref_step).norm());
  }
  return make_report(std::move(errors));
}

/// Converts a window length in seconds to pair steps using the median
/// reference sample period. At least one step.
inline std::size_t delta_steps_from_seconds(const Trajectory& ref, const AssociationPairing& pairing,
                                            double seconds) {
  if (!(seconds > 0.0)) throw Error(ErrorCode::InvalidArgument, "window must be positive");
  if (pairing.size() < 2) throw Error(ErrorCode::DeltaTooLarge, "need at least 2 pairs");
  std::vector<double> periods;
  for (std::size_t k = 1; k < pairing.size(); ++k) {
    periods.push_back(ref[pairing.pairs[k].ref].t - ref[pairing.pairs[k - 1].ref].t);
  }
  std::nth_element(periods.begin(), periods.begin() + static_cast<std::ptrdiff_t>(periods.size() / 2),
                   periods.end());
  const double period = periods[periods.size() / 2];
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(seconds / period)));
}

// Finite-difference velocity baseline

/// Centered differences in the interior, one-sided first-order differences
/// at the two ends. Row i is the velocity at times[i].
inline MatrixXd finite_difference_velocity(std::span<const double> times, const MatrixXd& positions) {
  const auto n = static_cast<Eigen::Index>(times.size());
  if (n < 2) throw Error(ErrorCode::InvalidArgument, "need at least 2 states");
  if (positions.rows() != n) throw Error(ErrorCode::InvalidArgument, "one position row per time");
  MatrixXd v(n, positions.cols());
  auto diff = [&](Eigen::Index lo, Eigen::Index hi, Eigen::Index row) {
    const double dt = times[static_cast<std::size_t>(hi)] - times[static_cast<std::size_t>(lo)];
    if (dt == 0.0) {
      throw Error(ErrorCode::DuplicateTimestamps, "zero time step at index " + std::to_string(row));
    }
    v.row(row) = (positions.row(hi) - positions.row(lo)) / dt;
  };
  diff(0, 1, 0);
  for (Eigen::Index i = 1; i + 1 < n; ++i) diff(i - 1, i + 1, i);
  diff(n - 2, n - 1, n - 1);
  return v;
}

inline MatrixXd finite_difference_velocity(const Trajectory& traj) {
  const std::vector<double> t = traj.times();
  return finite_difference_velocity(t, traj.translations());
}

/// Root mean square of the row-wise Euclidean difference.
inline double rowwise_rmse(const MatrixXd& a, const MatrixXd& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols() || a.rows() == 0) {
    throw Error(ErrorCode::InvalidArgument, "rmse operands differ in shape");
  }
  return std::sqrt((a - b).squaredNorm() / static_cast<double>(a.rows()));
}

}  // namespace stateval
