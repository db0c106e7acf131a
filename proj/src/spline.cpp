#include "crstd/spline.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "crstd/error.hpp"

namespace crstd {

KnotVector::KnotVector(std::vector<double> knots, KnotSource source)
    : knots_(std::move(knots)), source_(source) {
  if (knots_.size() < 2) throw ValidationError("a knot vector needs at least two knots");
  for (std::size_t i = 0; i < knots_.size(); ++i) {
    if (!std::isfinite(knots_[i])) throw ValidationError("knots must be finite");
    if (i && !(knots_[i] > knots_[i - 1]))
      throw ValidationError("knots must be strictly increasing");
  }
}

double centile(std::span<const double> sorted, double percent) {
  const std::size_t n = sorted.size();
  if (n == 0) throw ValidationError("centile of an empty sample");
  const double rank = (static_cast<double>(n) + 1.0) * percent / 100.0;
  if (rank <= 1.0) return sorted.front();
  if (rank >= static_cast<double>(n)) return sorted.back();
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const double frac = rank - static_cast<double>(lo);
  return sorted[lo - 1] + frac * (sorted[lo] - sorted[lo - 1]);
}

KnotVector centile_knots(std::span<const double> values, int df, std::span<const bool> mask,
                         bool log_scale) {
  if (df < 1) throw ValidationError("df must be >= 1");
  if (!mask.empty() && mask.size() != values.size())
    throw ValidationError("knot mask length differs from values");
  std::vector<double> picked;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!mask.empty() && !mask[i]) continue;
    const double v = values[i];
    if (std::isnan(v)) continue;
    if (log_scale && !(v > 0)) throw ValidationError("log-scale knots need positive values");
    picked.push_back(log_scale ? std::log(v) : v);
  }
  std::sort(picked.begin(), picked.end());
  std::vector<double> uniq(picked);
  uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
  if (static_cast<int>(uniq.size()) < df + 1) {
    throw ValidationError("need at least " + std::to_string(df + 1) +
                          " distinct event values for df=" + std::to_string(df) + ", have " +
                          std::to_string(uniq.size()));
  }
  std::vector<double> knots;
  knots.push_back(picked.front());
  for (int j = 1; j < df; ++j) knots.push_back(centile(picked, 100.0 * j / df));
  knots.push_back(picked.back());
  return KnotVector(std::move(knots), KnotSource::Centile);
}

Orthogonalized orthogonalize(const Eigen::MatrixXd& raw) {
  const Eigen::Index n = raw.rows();
  const Eigen::Index df = raw.cols();
  if (n < df + 2) throw ValidationError("too few rows to orthogonalise");
  Orthogonalized out;
  out.ortho.resize(n, df);
  out.R = Eigen::MatrixXd::Zero(df + 1, df + 1);
  out.R(df, df) = 1.0;
  const double denom = static_cast<double>(n - 1);
  for (Eigen::Index j = 0; j < df; ++j) {
    Eigen::VectorXd v = raw.col(j);
    const double mean = v.mean();
    v.array() -= mean;
    out.R(df, j) = mean;
    for (Eigen::Index i = 0; i < j; ++i) {
      const double proj = out.ortho.col(i).dot(v) / denom;
      v -= proj * out.ortho.col(i);
      out.R(i, j) = proj;
    }
    const double scale = std::sqrt(v.squaredNorm() / denom);
    const double ref = std::sqrt((raw.col(j).array() - mean).square().sum() / denom);
    if (!(scale > 1e-10 * std::max(1.0, ref)))
      throw NumericalError("rank-deficient spline basis in orthogonalisation");
    out.ortho.col(j) = v / scale;
    out.R(j, j) = scale;
  }
  return out;
}

// ---------------------------------------------------------------------------

SplineBasis::SplineBasis(KnotVector knots) : knots_(std::move(knots)) {}

SplineBasis::SplineBasis(KnotVector knots, Eigen::MatrixXd R) : knots_(std::move(knots)) {
  const Eigen::Index m = df() + 1;
  if (m > 32) throw ValidationError("orthogonalised splines support df <= 31");
  if (R.rows() != m || R.cols() != m)
    throw ValidationError("R matrix must be " + std::to_string(m) + "x" + std::to_string(m));
  Eigen::FullPivLU<Eigen::MatrixXd> lu(R);
  if (!lu.isInvertible()) throw ValidationError("R matrix is singular");
  R_inv_ = lu.inverse();
  R_ = std::move(R);
}

SplineBasis SplineBasis::orthogonalized_on(KnotVector knots, std::span<const double> x) {
  SplineBasis raw(std::move(knots));
  Orthogonalized o = orthogonalize(raw.eval_raw(x));
  return SplineBasis(raw.knots_, std::move(o.R));
}

double SplineBasis::lambda(int j) const {
  const std::size_t K = knots_.size();
  return (knots_[K - 1] - knots_[static_cast<std::size_t>(j)]) / (knots_[K - 1] - knots_[0]);
}

void SplineBasis::raw_point(double x, std::span<double> out) const {
  const std::size_t K = knots_.size();
  const double k1 = knots_[0];
  const double kK = knots_[K - 1];
  auto cube = [](double z) { return z > 0 ? z * z * z : 0.0; };
  out[0] = x;
  const double c1 = cube(x - k1);
  const double cK = cube(x - kK);
  for (std::size_t j = 1; j + 1 < K; ++j) {
    const double lam = (kK - knots_[j]) / (kK - k1);
    out[j] = cube(x - knots_[j]) - lam * c1 - (1.0 - lam) * cK;
  }
}

void SplineBasis::raw_deriv_point(double x, std::span<double> out) const {
  const std::size_t K = knots_.size();
  const double k1 = knots_[0];
  const double kK = knots_[K - 1];
  auto sq3 = [](double z) { return z > 0 ? 3.0 * z * z : 0.0; };
  out[0] = 1.0;
  const double c1 = sq3(x - k1);
  const double cK = sq3(x - kK);
  for (std::size_t j = 1; j + 1 < K; ++j) {
    const double lam = (kK - knots_[j]) / (kK - k1);
    out[j] = sq3(x - knots_[j]) - lam * c1 - (1.0 - lam) * cK;
  }
}

void SplineBasis::to_ortho(std::span<double> values, bool derivative) const {
  const int m = df();
  // row vector [values, 1 or 0] times R^{-1}; keep the first df entries.
  std::array<double, 32> buf{};
  for (int j = 0; j < m; ++j) {
    double s = derivative ? 0.0 : R_inv_(m, j);
    for (int i = 0; i < m; ++i) s += values[static_cast<std::size_t>(i)] * R_inv_(i, j);
    buf[j] = s;
  }
  for (int j = 0; j < m; ++j) values[static_cast<std::size_t>(j)] = buf[j];
}

void SplineBasis::eval_point(double x, std::span<double> out) const {
  raw_point(x, out);
  if (R_) to_ortho(out, false);
}

void SplineBasis::deriv_point(double x, std::span<double> out) const {
  raw_deriv_point(x, out);
  if (R_) to_ortho(out, true);
}

namespace {

template <typename F>
Eigen::MatrixXd fill_rows(std::span<const double> x, int df, F&& point) {
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> m(
      static_cast<Eigen::Index>(x.size()), df);
  for (std::size_t i = 0; i < x.size(); ++i)
    point(x[i], std::span<double>(m.row(static_cast<Eigen::Index>(i)).data(),
                                  static_cast<std::size_t>(df)));
  return m;
}

}  // namespace

Eigen::MatrixXd SplineBasis::eval(std::span<const double> x) const {
  return fill_rows(x, df(), [this](double v, std::span<double> o) { eval_point(v, o); });
}

Eigen::MatrixXd SplineBasis::deriv(std::span<const double> x) const {
  return fill_rows(x, df(), [this](double v, std::span<double> o) { deriv_point(v, o); });
}

Eigen::MatrixXd SplineBasis::eval_raw(std::span<const double> x) const {
  return fill_rows(x, df(), [this](double v, std::span<double> o) { raw_point(v, o); });
}

Eigen::MatrixXd SplineBasis::deriv_raw(std::span<const double> x) const {
  return fill_rows(x, df(), [this](double v, std::span<double> o) { raw_deriv_point(v, o); });
}

}  // namespace crstd
