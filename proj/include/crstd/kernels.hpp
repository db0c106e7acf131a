#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

// Data-parallel inner loops. Every kernel has an OpenMP version and a
// `_serial` reference with the same per-row arithmetic; reductions are
// always summed in row order, so both return bit-identical results for any
// thread count.
namespace crstd::kernels {

// Per-row log-likelihood pieces for eta and d eta / d ln t.
struct LikelihoodRows {
  Eigen::VectorXd contribution;  // d(ln deta - ln t + eta) - exp(eta)
  Eigen::VectorXd cumhaz;        // exp(eta)
  Eigen::VectorXd inv_deta;      // d / deta (0 on censored rows)
  bool finite = true;            // false when an event row has deta <= 0
};

LikelihoodRows likelihood_rows(const Eigen::VectorXd& eta, const Eigen::VectorXd& deta,
                               const Eigen::VectorXd& log_t, const Eigen::VectorXi& d);
LikelihoodRows likelihood_rows_serial(const Eigen::VectorXd& eta, const Eigen::VectorXd& deta,
                                      const Eigen::VectorXd& log_t, const Eigen::VectorXi& d);

// Sum in index order.
double ordered_sum(const Eigen::VectorXd& v);

// Row-dependent part of one cause-specific model under one scenario.
struct RowTerms {
  Eigen::VectorXd lin;    // x_i' beta + intercept
  Eigen::MatrixXd tvc_x;  // rows x n_tvc, the covariates carrying time-varying effects
};

// Time-dependent part of one model at Q time points (given theta).
struct TimeTerms {
  Eigen::VectorXd g;    // s0(ln u_q; gamma)
  Eigen::VectorXd dg;   // s0'(ln u_q; gamma)
  Eigen::MatrixXd gt;   // Q x n_tvc: s_j(ln u_q; delta_j)
  Eigen::MatrixXd dgt;  // Q x n_tvc
};

// mean_i exp(-sum_m H_m(t | x_i)) at time point q of `at`.
double mean_survival(std::span<const RowTerms> models, std::span<const TimeTerms> at, Eigen::Index q);
double mean_survival_serial(std::span<const RowTerms> models, std::span<const TimeTerms> at,
                            Eigen::Index q);

// out[k] = mean_i sum_q w_q S(u_q | x_i) h_k(u_q | x_i), with S the product of
// all models' survival functions. `at` holds each model's terms at the nodes u.
void mean_incidence(std::span<const RowTerms> models, std::span<const TimeTerms> at,
                    std::span<const double> u, std::span<const double> w, std::span<double> out);
void mean_incidence_serial(std::span<const RowTerms> models, std::span<const TimeTerms> at,
                           std::span<const double> u, std::span<const double> w,
                           std::span<double> out);

}  // namespace crstd::kernels
