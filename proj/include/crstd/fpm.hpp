#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "crstd/dataset.hpp"
#include "crstd/spline.hpp"

namespace crstd {

// Covariate x log-time spline interaction.
struct TvcTerm {
  std::string covariate;
  int df = 1;
};

// Flexible parametric model on the log cumulative hazard scale:
//   eta(t, x) = s0(ln t; gamma) + x'beta + sum_j x_j s_j(ln t; delta_j) + c.
struct ModelSpec {
  std::vector<std::string> covariates;
  int baseline_df = 3;
  std::vector<TvcTerm> tvc;
  int failure_code = 1;
  double exit_time = 60.0;
  std::string time_column = "dtime";
  std::string event_column = "eventType";
  bool orthogonalize = true;

  void validate() const;
  std::size_t n_parameters() const;
  // Parameter labels in theta order: covariates, _rcs1.., _rcs_<tvc>1.., _cons.
  std::vector<std::string> parameter_names() const;
  // Index into `covariates` of each tvc covariate.
  std::vector<std::size_t> tvc_covariate_index() const;
};

struct ModelBases {
  SplineBasis baseline;
  std::vector<SplineBasis> tvc;
};

// Knots and (optionally) orthogonalisation fitted to the declared data.
ModelBases make_bases(const ModelSpec& spec, const SurvivalDeclaration& decl,
                      std::span<const std::size_t> rows);

// Dense per-row design: eta = Z theta, d eta / d ln t = D theta.
struct FpmDesign {
  Eigen::MatrixXd Z;
  Eigen::MatrixXd D;
  Eigen::VectorXd log_t;
  Eigen::VectorXi d;

  std::size_t n_rows() const { return static_cast<std::size_t>(Z.rows()); }
  std::size_t n_parameters() const { return static_cast<std::size_t>(Z.cols()); }
};

// Covariate matrix (rows x covariates, in spec order) for the given frame rows.
Eigen::MatrixXd covariate_matrix(const SurvivalFrame& frame, std::span<const std::string> covariates,
                                 std::span<const std::size_t> rows);

FpmDesign build_design(const ModelSpec& spec, const ModelBases& bases, const Eigen::MatrixXd& X,
                       std::span<const double> analysis_time, std::span<const int> d);

struct LikelihoodResult {
  double value = 0.0;
  Eigen::VectorXd gradient;
  Eigen::MatrixXd hessian;
};

// sum_i d_i [ln(D_i theta) - ln t_i + eta_i] - exp(eta_i); value is -inf
// when D_i theta <= 0 on an event row (gradient/hessian left empty then).
LikelihoodResult log_likelihood(const Eigen::VectorXd& theta, const FpmDesign& design,
                                bool with_hessian = true);

// Convenience: build bases and design from the frame, then evaluate.
LikelihoodResult log_likelihood(const Eigen::VectorXd& theta, const ModelSpec& spec,
                                const SurvivalFrame& data);

struct FitOptions {
  int max_iterations = 100;
  int max_halvings = 30;
  double gradient_tolerance = 1e-6;
  double loglik_tolerance = 1e-9;
  std::optional<Eigen::VectorXd> start;
};

struct LinearPredictor {
  double eta = 0.0;
  double deta_dlogt = 0.0;
};

class FpmFit {
 public:
  FpmFit() = default;
  FpmFit(ModelSpec spec, ModelBases bases, Eigen::VectorXd theta, Eigen::MatrixXd vcov);

  const ModelSpec& spec() const { return spec_; }
  const ModelBases& bases() const { return bases_; }
  const Eigen::VectorXd& theta() const { return theta_; }
  const Eigen::MatrixXd& vcov() const { return vcov_; }
  std::vector<std::string> parameter_names() const { return spec_.parameter_names(); }

  // Offsets of the parameter blocks inside theta.
  std::size_t n_covariates() const { return spec_.covariates.size(); }
  std::size_t gamma_offset() const { return n_covariates(); }
  std::size_t tvc_offset(std::size_t j) const;
  std::size_t intercept_index() const { return static_cast<std::size_t>(theta_.size()) - 1; }

  LinearPredictor linear_predictor(std::span<const double> x, double t) const;
  LinearPredictor linear_predictor(const Eigen::VectorXd& theta, std::span<const double> x,
                                   double t) const;

  // Fit diagnostics and provenance.
  double loglik = 0.0;
  std::size_t n_obs = 0;
  std::size_t n_events = 0;
  std::size_t n_dropped = 0;
  int iterations = 0;
  double max_abs_gradient = 0.0;
  double max_event_time = 0.0;

 private:
  ModelSpec spec_;
  ModelBases bases_;
  Eigen::VectorXd theta_;
  Eigen::MatrixXd vcov_;
};

// Newton-Raphson with step halving on the analytic gradient and hessian.
// Rows with a missing covariate are dropped (count kept in n_dropped).
FpmFit fit(const ModelSpec& spec, const SurvivalFrame& data, const FitOptions& options = {});

struct Prediction {
  Eigen::MatrixXd eta;       // rows x times
  Eigen::MatrixXd survival;  // exp(-exp(eta))
  Eigen::MatrixXd failure;   // 1 - survival
  Eigen::MatrixXd hazard;    // exp(eta) * (d eta / d ln t) / t
};

// X holds covariates in spec order. Times must be >= 0; t = 0 gives S = 1.
Prediction predict(const FpmFit& fit, const Eigen::MatrixXd& X, std::span<const double> times);
Prediction predict(const FpmFit& fit, const SurvivalFrame& rows, std::span<const double> times);

// h(t | x1) / h(t | x0), including the time-varying terms.
double hazard_ratio(const FpmFit& fit, std::span<const double> x1, std::span<const double> x0,
                    double t);

void save_fit(const FpmFit& fit, const std::filesystem::path& path);
FpmFit load_fit(const std::filesystem::path& path);
std::string fit_to_json(const FpmFit& fit);
FpmFit fit_from_json(const std::string& text);

}  // namespace crstd
