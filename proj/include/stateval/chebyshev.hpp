#pragma once

// Chebyshev-Gauss-Lobatto interpolation in value space: nodes, barycentric
// evaluation, the spectral differentiation matrix, the node-value to
// Chebyshev-coefficient transform, and a linear least-squares fit of
// sampled signals parameterized by their values at the nodes.
//
// Nodes are ordered t_j = cos(j pi / N), j = 0..N, i.e. descending from the
// upper end of the domain to the lower end. Every matrix below uses that
// ordering.

#include <Eigen/Core>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "stateval/error.hpp"

namespace stateval {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Closed interval [a, b] with a < b, mapped affinely onto [-1, 1].
class Domain {
 public:
  Domain(double a, double b) : a_(a), b_(b) {
    if (!std::isfinite(a) || !std::isfinite(b) || !(a < b)) {
      throw Error(ErrorCode::DegenerateDomain,
                  "domain requires a < b, got [" + std::to_string(a) + ", " + std::to_string(b) + "]");
    }
  }

  static Domain unit() { return {-1.0, 1.0}; }

  double a() const noexcept { return a_; }
  double b() const noexcept { return b_; }
  double length() const noexcept { return b_ - a_; }

  double to_unit(double x) const noexcept { return (2.0 * x - (a_ + b_)) / (b_ - a_); }
  double from_unit(double t) const noexcept { return 0.5 * (a_ + b_) + 0.5 * (b_ - a_) * t; }

  /// Absolute slack used for domain membership tests.
  double slack() const noexcept { return 1e-12 * std::max({1.0, std::abs(a_), std::abs(b_)}); }

  bool contains(double x) const noexcept { return x >= a_ - slack() && x <= b_ + slack(); }

  bool operator==(const Domain&) const = default;

 private:
  double a_;
  double b_;
};

namespace detail {

inline void require_degree(int n) {
  if (n < 1) throw Error(ErrorCode::InvalidArgument, "degree must be >= 1");
}

/// cos(j pi / n) evaluated as sin(pi (n - 2j) / (2n)) so that the nodes are
/// exactly symmetric and the middle node is exactly zero.
inline double unit_node(int j, int n) {
  return std::sin(std::numbers::pi * static_cast<double>(n - 2 * j) / (2.0 * n));
}

inline bool same_point(double x, double y) {
  return std::abs(x - y) <= 1e-13 * std::max({std::abs(x), std::abs(y), 1.0});
}

}  // namespace detail

/// Chebyshev points of the second kind mapped onto `domain`, descending.
inline VectorXd cheb_points(int n, const Domain& domain) {
  detail::require_degree(n);
  VectorXd x(n + 1);
  for (int j = 0; j <= n; ++j) x[j] = domain.from_unit(detail::unit_node(j, n));
  x[0] = domain.b();
  x[n] = domain.a();
  return x;
}

/// (-1)^j with both endpoint weights halved.
inline VectorXd barycentric_weights(int n) {
  detail::require_degree(n);
  VectorXd w(n + 1);
  for (int j = 0; j <= n; ++j) w[j] = (j % 2 == 0) ? 1.0 : -1.0;
  w[0] *= 0.5;
  w[n] *= 0.5;
  return w;
}

/// Precomputed nodes and weights for repeated barycentric evaluation.
class BarycentricBasis {
 public:
  BarycentricBasis(int n, const Domain& domain)
      : n_(n), domain_(domain), nodes_(cheb_points(n, domain)), weights_(barycentric_weights(n)) {}

  int degree() const noexcept { return n_; }
  const Domain& domain() const noexcept { return domain_; }
  const VectorXd& nodes() const noexcept { return nodes_; }
  const VectorXd& weights() const noexcept { return weights_; }

  /// Writes the interpolation row for `x` into `row` (length n+1).
  template <typename Row>
  void row(double x, Row&& out) const {
    if (!std::isfinite(x) || !domain_.contains(x)) {
      throw Error(ErrorCode::OutOfDomain, "x = " + std::to_string(x) + " outside [" +
                                              std::to_string(domain_.a()) + ", " +
                                              std::to_string(domain_.b()) + "]");
    }
    for (int j = 0; j <= n_; ++j) {
      if (detail::same_point(x, nodes_[j])) {
        out.setZero();
        out[j] = 1.0;
        return;
      }
    }
    double denom = 0.0;
    for (int j = 0; j <= n_; ++j) {
      const double r = weights_[j] / (x - nodes_[j]);
      out[j] = r;
      denom += r;
    }
    out /= denom;
  }

  VectorXd row(double x) const {
    VectorXd out(n_ + 1);
    row(x, out);
    return out;
  }

  /// m x (n+1) matrix whose i-th row is row(xs[i]).
  MatrixXd matrix(std::span<const double> xs) const {
    MatrixXd a(static_cast<Eigen::Index>(xs.size()), n_ + 1);
    for (std::size_t i = 0; i < xs.size(); ++i) row(xs[i], a.row(static_cast<Eigen::Index>(i)));
    return a;
  }

 private:
  int n_;
  Domain domain_;
  VectorXd nodes_;
  VectorXd weights_;
};

/// Weights w such that dot(w, f) is the barycentric interpolant of node
/// values f at x. At a node this is the corresponding unit vector.
inline VectorXd interp_row(int n, const Domain& domain, double x) {
  return BarycentricBasis(n, domain).row(x);
}

inline MatrixXd interp_matrix(int n, const Domain& domain, std::span<const double> xs) {
  return BarycentricBasis(n, domain).matrix(xs);
}

/// Differentiation matrix on the nodes of `domain`, including the chain-rule
/// factor 2 / (b - a).
inline MatrixXd diff_matrix(int n, const Domain& domain) {
  detail::require_degree(n);
  const double pi = std::numbers::pi;
  MatrixXd d(n + 1, n + 1);
  auto c = [n](int i) { return (i == 0 || i == n) ? 2.0 : 1.0; };
  for (int i = 0; i <= n; ++i) {
    double diag = 0.0;
    for (int j = 0; j <= n; ++j) {
      if (i == j) continue;
      // t_i - t_j = -2 sin((i + j) pi / 2n) sin((i - j) pi / 2n)
      const double dt = -2.0 * std::sin((i + j) * pi / (2.0 * n)) * std::sin((i - j) * pi / (2.0 * n));
      const double sign = ((i + j) % 2 == 0) ? 1.0 : -1.0;
      const double v = sign * c(i) / (c(j) * dt);
      d(i, j) = v;
      diag += v;
    }
    d(i, i) = -diag;
  }
  return d * (2.0 / domain.length());
}

/// A polynomial of degree N on a domain, stored as its values at the N+1
/// Chebyshev points (one column per signal dimension).
class ChebyshevFit {
 public:
  ChebyshevFit(int degree, Domain domain, MatrixXd values)
      : degree_(degree), domain_(domain), values_(std::move(values)) {
    detail::require_degree(degree);
    if (values_.rows() != degree + 1 || values_.cols() < 1) {
      throw Error(ErrorCode::InvalidArgument, "node value matrix must have degree+1 rows");
    }
  }

  int degree() const noexcept { return degree_; }
  const Domain& domain() const noexcept { return domain_; }
  const MatrixXd& values() const noexcept { return values_; }
  Eigen::Index dims() const noexcept { return values_.cols(); }

 private:
  int degree_;
  Domain domain_;
  MatrixXd values_;
};

inline VectorXd evaluate_fit(const ChebyshevFit& fit, double x) {
  return fit.values().transpose() * interp_row(fit.degree(), fit.domain(), x);
}

/// Evaluates at many points; row i holds the value at xs[i].
inline MatrixXd evaluate_fit(const ChebyshevFit& fit, std::span<const double> xs) {
  return interp_matrix(fit.degree(), fit.domain(), xs) * fit.values();
}

inline ChebyshevFit derivative_fit(const ChebyshevFit& fit) {
  return {fit.degree(), fit.domain(), diff_matrix(fit.degree(), fit.domain()) * fit.values()};
}

/// Coefficients a_k of sum_k a_k T_k(t) interpolating the node values, with t
/// the unit-interval coordinate of the fit's domain. Direct O(N^2) DCT-I.
inline MatrixXd values_to_coeffs(const ChebyshevFit& fit) {
  const int n = fit.degree();
  const MatrixXd& f = fit.values();
  MatrixXd coeffs = MatrixXd::Zero(n + 1, f.cols());
  for (int k = 0; k <= n; ++k) {
    for (int j = 0; j <= n; ++j) {
      // reduce k*j mod 2n before taking the cosine
      const long phase = (static_cast<long>(k) * j) % (2L * n);
      double c = std::cos(std::numbers::pi * static_cast<double>(phase) / n);
      if (j == 0 || j == n) c *= 0.5;
      coeffs.row(k) += c * f.row(j);
    }
    coeffs.row(k) *= 2.0 / n;
  }
  coeffs.row(0) *= 0.5;
  coeffs.row(n) *= 0.5;
  return coeffs;
}

/// Sampled vector signal: m strictly increasing times, m x d values, and a
/// per-axis inverse-variance weight (one entry broadcasts to all axes).
class SampleSet {
 public:
  SampleSet(VectorXd times, MatrixXd values, VectorXd weights = VectorXd::Ones(1))
      : times_(std::move(times)), values_(std::move(values)), weights_(std::move(weights)) {
    if (times_.size() < 2) throw Error(ErrorCode::InvalidArgument, "need at least 2 samples");
    if (values_.rows() != times_.size() || values_.cols() < 1) {
      throw Error(ErrorCode::InvalidArgument, "sample values must have one row per time");
    }
    if (!times_.allFinite() || !values_.allFinite()) {
      throw Error(ErrorCode::InvalidArgument, "samples must be finite");
    }
    for (Eigen::Index i = 1; i < times_.size(); ++i) {
      if (!(times_[i] > times_[i - 1])) {
        throw Error(ErrorCode::NonMonotoneTime, "sample times must be strictly increasing");
      }
    }
    if (weights_.size() == 1) weights_ = VectorXd::Constant(values_.cols(), weights_[0]);
    if (weights_.size() != values_.cols() || !(weights_.array() > 0.0).all() || !weights_.allFinite()) {
      throw Error(ErrorCode::InvalidArgument, "weights must be positive, one per axis");
    }
  }

  Eigen::Index size() const noexcept { return times_.size(); }
  const VectorXd& times() const noexcept { return times_; }
  const MatrixXd& values() const noexcept { return values_; }
  const VectorXd& weights() const noexcept { return weights_; }

 private:
  VectorXd times_;
  MatrixXd values_;
  VectorXd weights_;
};

struct FitOptions {
  /// Tikhonov regularization on the node values. Zero disables it, in which
  /// case a rank-deficient design is reported instead of regularized.
  double ridge = 0.0;
};

/// Least-squares polynomial of degree n over `domain`, parameterized by its
/// node values: minimizes sum_i ||z_i - C^T w(t_i)||^2_Omega (+ ridge ||C||^2).
/// The objective is linear in C, so each axis is solved by QR.
inline ChebyshevFit fit_pseudospectral(const SampleSet& samples, int n, const Domain& domain,
                                       const FitOptions& options = {}) {
  detail::require_degree(n);
  if (!(options.ridge >= 0.0) || !std::isfinite(options.ridge)) {
    throw Error(ErrorCode::InvalidArgument, "ridge must be a finite non-negative number");
  }
  if (samples.size() < n + 1) {
    throw Error(ErrorCode::Underdetermined, std::to_string(samples.size()) + " samples for degree " +
                                                std::to_string(n) + " (need at least " +
                                                std::to_string(n + 1) + ")");
  }
  const VectorXd& t = samples.times();
  const MatrixXd design = interp_matrix(n, domain, std::span<const double>(t.data(), t.size()));
  const MatrixXd& z = samples.values();

  if (options.ridge == 0.0) {
    // Per-axis weights scale each column's objective uniformly and do not move
    // its minimizer.
    Eigen::ColPivHouseholderQR<MatrixXd> qr(design);
    if (qr.rank() < n + 1) {
      throw Error(ErrorCode::RankDeficient, "design matrix rank " + std::to_string(qr.rank()) +
                                                " < " + std::to_string(n + 1) +
                                                "; sample times too clustered for this degree");
    }
    return {n, domain, qr.solve(z)};
  }

  const Eigen::Index m = samples.size();
  MatrixXd values(n + 1, z.cols());
  MatrixXd augmented(m + n + 1, n + 1);
  VectorXd rhs = VectorXd::Zero(m + n + 1);
  for (Eigen::Index c = 0; c < z.cols(); ++c) {
    const double sw = std::sqrt(samples.weights()[c]);
    augmented.topRows(m) = sw * design;
    augmented.bottomRows(n + 1) = std::sqrt(options.ridge) * MatrixXd::Identity(n + 1, n + 1);
    rhs.head(m) = sw * z.col(c);
    values.col(c) = augmented.colPivHouseholderQr().solve(rhs);
  }
  return {n, domain, values};
}

/// Value of the weighted least-squares objective for a candidate fit.
inline double fit_objective(const ChebyshevFit& fit, const SampleSet& samples, double ridge = 0.0) {
  const VectorXd& t = samples.times();
  const MatrixXd residual =
      evaluate_fit(fit, std::span<const double>(t.data(), t.size())) - samples.values();
  double total = 0.0;
  for (Eigen::Index c = 0; c < residual.cols(); ++c) {
    total += samples.weights()[c] * residual.col(c).squaredNorm();
  }
  return total + ridge * fit.values().squaredNorm();
}

}  // namespace stateval
