#pragma once

#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace crstd {

enum class KnotSource { Centile, User };

// Strictly increasing knot locations (log-time or covariate scale).
class KnotVector {
 public:
  KnotVector() = default;
  explicit KnotVector(std::vector<double> knots, KnotSource source = KnotSource::User);

  std::span<const double> values() const { return knots_; }
  std::size_t size() const { return knots_.size(); }
  double front() const { return knots_.front(); }
  double back() const { return knots_.back(); }
  double operator[](std::size_t i) const { return knots_[i]; }
  KnotSource source() const { return source_; }

 private:
  std::vector<double> knots_;
  KnotSource source_ = KnotSource::User;
};

// Centile rule: rank r = (n+1)p/100 on the sorted sample, linear
// interpolation between neighbours, clamped to the sample range.
double centile(std::span<const double> sorted, double percent);

// Boundary knots at min/max of the selected values, df-1 internal knots at
// equally spaced centiles. When log_scale is set the values are logged first.
// An empty mask selects every value.
KnotVector centile_knots(std::span<const double> values, int df, std::span<const bool> mask = {},
                         bool log_scale = true);

struct Orthogonalized {
  Eigen::MatrixXd ortho;  // n x df, zero mean, unit sample variance, mutually orthogonal
  Eigen::MatrixXd R;      // (df+1) x (df+1) with [raw, 1] = [ortho, 1] * R
};

// Gram-Schmidt of the raw columns against the constant and the preceding
// columns, scaling each to unit sample (n-1) variance.
Orthogonalized orthogonalize(const Eigen::MatrixXd& raw);

// Restricted cubic spline basis:
//   v_1(x) = x,
//   v_{j+1}(x) = (x-k_{j+1})^3_+ - l_j (x-k_1)^3_+ - (1-l_j)(x-k_K)^3_+,
//   l_j = (k_K - k_{j+1}) / (k_K - k_1).
// With an R matrix set, columns are mapped to orthogonal coordinates:
//   [ortho, 1] = [raw, 1] * R^{-1}.
class SplineBasis {
 public:
  SplineBasis() = default;
  explicit SplineBasis(KnotVector knots);
  SplineBasis(KnotVector knots, Eigen::MatrixXd R);

  // Orthogonalised basis whose R matrix is computed on `x`.
  static SplineBasis orthogonalized_on(KnotVector knots, std::span<const double> x);

  const KnotVector& knots() const { return knots_; }
  int df() const { return static_cast<int>(knots_.size()) - 1; }
  bool orthogonalized() const { return R_.has_value(); }
  const std::optional<Eigen::MatrixXd>& R() const { return R_; }

  Eigen::MatrixXd eval(std::span<const double> x) const;
  Eigen::MatrixXd deriv(std::span<const double> x) const;
  Eigen::MatrixXd eval_raw(std::span<const double> x) const;
  Eigen::MatrixXd deriv_raw(std::span<const double> x) const;

  // Single-point versions writing df values into `out`.
  void eval_point(double x, std::span<double> out) const;
  void deriv_point(double x, std::span<double> out) const;

  double lambda(int j) const;  // l_j for j = 1 .. df-1

 private:
  void raw_point(double x, std::span<double> out) const;
  void raw_deriv_point(double x, std::span<double> out) const;
  void to_ortho(std::span<double> values, bool derivative) const;

  KnotVector knots_;
  std::optional<Eigen::MatrixXd> R_;
  Eigen::MatrixXd R_inv_;
};

}  // namespace crstd
