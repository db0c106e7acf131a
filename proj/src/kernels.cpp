#include "crstd/kernels.hpp"

#include <array>
#include <cmath>
#include <limits>

#include "crstd/error.hpp"

namespace crstd::kernels {

namespace {

constexpr std::size_t kMaxModels = 4;
constexpr Eigen::Index kParallelThreshold = 64;

struct RowLik {
  double contribution;
  double cumhaz;
  double inv_deta;
  bool finite;
};

inline RowLik likelihood_row(double eta, double deta, double log_t, int d) {
  const double H = std::exp(eta);
  if (d == 1) {
    if (!(deta > 0)) return {-std::numeric_limits<double>::infinity(), H, 0.0, false};
    return {std::log(deta) - log_t + eta - H, H, 1.0 / deta, true};
  }
  return {-H, H, 0.0, true};
}

void check_models(std::span<const RowTerms> models, std::span<const TimeTerms> at) {
  if (models.empty() || models.size() > kMaxModels || models.size() != at.size())
    throw ValidationError("kernels: 1 to 4 models with matching time terms required");
}

inline double row_eta(const RowTerms& m, const TimeTerms& t, Eigen::Index i, Eigen::Index q,
                      double& deta) {
  double eta = m.lin[i] + t.g[q];
  deta = t.dg[q];
  for (Eigen::Index j = 0; j < m.tvc_x.cols(); ++j) {
    const double x = m.tvc_x(i, j);
    eta += x * t.gt(q, j);
    deta += x * t.dgt(q, j);
  }
  return eta;
}

inline double row_survival(std::span<const RowTerms> models, std::span<const TimeTerms> at,
                           Eigen::Index i, Eigen::Index q) {
  double cum = 0.0;
  for (std::size_t m = 0; m < models.size(); ++m) {
    double deta;
    cum += std::exp(row_eta(models[m], at[m], i, q, deta));
  }
  return std::exp(-cum);
}

inline void row_incidence(std::span<const RowTerms> models, std::span<const TimeTerms> at,
                          std::span<const double> u, std::span<const double> w, Eigen::Index i,
                          double* out) {
  const std::size_t K = models.size();
  std::array<double, kMaxModels> acc{};
  std::array<double, kMaxModels> h{};
  for (std::size_t q = 0; q < u.size(); ++q) {
    const auto qi = static_cast<Eigen::Index>(q);
    double cum = 0.0;
    for (std::size_t m = 0; m < K; ++m) {
      double deta;
      const double H = std::exp(row_eta(models[m], at[m], i, qi, deta));
      cum += H;
      h[m] = H * deta / u[q];
    }
    const double ws = w[q] * std::exp(-cum);
    for (std::size_t m = 0; m < K; ++m) acc[m] += ws * h[m];
  }
  for (std::size_t m = 0; m < K; ++m) out[m] = acc[m];
}

}  // namespace

LikelihoodRows likelihood_rows(const Eigen::VectorXd& eta, const Eigen::VectorXd& deta,
                               const Eigen::VectorXd& log_t, const Eigen::VectorXi& d) {
  const Eigen::Index n = eta.size();
  LikelihoodRows out;
  out.contribution.resize(n);
  out.cumhaz.resize(n);
  out.inv_deta.resize(n);
  int all_finite = 1;
#pragma omp parallel for schedule(static) reduction(&& : all_finite) if (n > kParallelThreshold)
  for (Eigen::Index i = 0; i < n; ++i) {
    const RowLik r = likelihood_row(eta[i], deta[i], log_t[i], d[i]);
    out.contribution[i] = r.contribution;
    out.cumhaz[i] = r.cumhaz;
    out.inv_deta[i] = r.inv_deta;
    all_finite = all_finite && r.finite;
  }
  out.finite = all_finite != 0;
  return out;
}

LikelihoodRows likelihood_rows_serial(const Eigen::VectorXd& eta, const Eigen::VectorXd& deta,
                                      const Eigen::VectorXd& log_t, const Eigen::VectorXi& d) {
  const Eigen::Index n = eta.size();
  LikelihoodRows out;
  out.contribution.resize(n);
  out.cumhaz.resize(n);
  out.inv_deta.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const RowLik r = likelihood_row(eta[i], deta[i], log_t[i], d[i]);
    out.contribution[i] = r.contribution;
    out.cumhaz[i] = r.cumhaz;
    out.inv_deta[i] = r.inv_deta;
    out.finite = out.finite && r.finite;
  }
  return out;
}

double ordered_sum(const Eigen::VectorXd& v) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) s += v[i];
  return s;
}

double mean_survival(std::span<const RowTerms> models, std::span<const TimeTerms> at,
                     Eigen::Index q) {
  check_models(models, at);
  const Eigen::Index n = models[0].lin.size();
  Eigen::VectorXd rows(n);
#pragma omp parallel for schedule(static) if (n > kParallelThreshold)
  for (Eigen::Index i = 0; i < n; ++i) rows[i] = row_survival(models, at, i, q);
  return ordered_sum(rows) / static_cast<double>(n);
}

double mean_survival_serial(std::span<const RowTerms> models, std::span<const TimeTerms> at,
                            Eigen::Index q) {
  check_models(models, at);
  const Eigen::Index n = models[0].lin.size();
  double s = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) s += row_survival(models, at, i, q);
  return s / static_cast<double>(n);
}

void mean_incidence(std::span<const RowTerms> models, std::span<const TimeTerms> at,
                    std::span<const double> u, std::span<const double> w, std::span<double> out) {
  check_models(models, at);
  const std::size_t K = models.size();
  if (out.size() != K || u.size() != w.size())
    throw ValidationError("kernels: output/node size mismatch");
  const Eigen::Index n = models[0].lin.size();
  Eigen::MatrixXd rows(static_cast<Eigen::Index>(K), n);
#pragma omp parallel for schedule(static) if (n > kParallelThreshold)
  for (Eigen::Index i = 0; i < n; ++i) row_incidence(models, at, u, w, i, rows.col(i).data());
  for (std::size_t k = 0; k < K; ++k) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) s += rows(static_cast<Eigen::Index>(k), i);
    out[k] = s / static_cast<double>(n);
  }
}

void mean_incidence_serial(std::span<const RowTerms> models, std::span<const TimeTerms> at,
                           std::span<const double> u, std::span<const double> w,
                           std::span<double> out) {
  check_models(models, at);
  const std::size_t K = models.size();
  if (out.size() != K || u.size() != w.size())
    throw ValidationError("kernels: output/node size mismatch");
  const Eigen::Index n = models[0].lin.size();
  std::array<double, kMaxModels> sum{};
  std::array<double, kMaxModels> row{};
  for (Eigen::Index i = 0; i < n; ++i) {
    row_incidence(models, at, u, w, i, row.data());
    for (std::size_t k = 0; k < K; ++k) sum[k] += row[k];
  }
  for (std::size_t k = 0; k < K; ++k) out[k] = sum[k] / static_cast<double>(n);
}

}  // namespace crstd::kernels
