#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "crstd/dataset.hpp"
#include "crstd/fpm.hpp"

namespace crstd {

// One column assignment of a scenario: either a fixed value or a copy of
// another column of the same row.
struct Assignment {
  std::string column;
  std::optional<double> value;
  std::string source;  // used when value is empty
};

struct AtScenario {
  std::string label;
  std::vector<Assignment> assignments;

  // "col=v,col2=~src". Blank text gives the observed-data scenario.
  static AtScenario parse(std::string_view text, std::string label);
  bool assigns(std::string_view column) const;
};

enum class Estimand { Survival, Failure, Cif, Rmft };
enum class ContrastKind { None, Difference, Ratio };

Estimand parse_estimand(std::string_view name);
std::string_view to_string(Estimand e);
ContrastKind parse_contrast(std::string_view name);
std::string_view to_string(ContrastKind c);

struct StandardizeRequest {
  std::vector<FpmFit> models;
  std::vector<std::string> cause_labels;  // one per model; defaults to "cause<code>"
  Estimand estimand = Estimand::Failure;
  std::vector<double> times;  // grid, or the single t* for rmft
  std::vector<AtScenario> scenarios;
  ContrastKind contrast = ContrastKind::None;
  std::vector<double> lincom;  // weights over (scenario, cause), cause fastest
  std::size_t reference = 0;
  double ci_level = 0.95;
  std::optional<std::size_t> row;  // non-marginal mode: one population row
  int nodes = 50;

  void validate() const;
};

enum class RowKind { Scenario, Contrast, Lincom };

struct SeriesRow {
  double time = 0.0;
  std::string label;
  std::string cause;
  RowKind kind = RowKind::Scenario;
  double estimate = 0.0;
  double se = 0.0;
  double lci = 0.0;
  double uci = 0.0;
  bool extrapolated = false;
};

std::string_view to_string(RowKind k);

struct StandardizedSeries {
  Estimand estimand = Estimand::Failure;
  double ci_level = 0.95;
  int nodes = 0;
  std::size_t population = 0;
  std::vector<std::string> scenario_labels;
  std::vector<std::string> cause_labels;
  std::vector<double> times;
  // Scenario rows come first, ordered (time, scenario, cause); their joint
  // delta-method covariance is kept for later contrasts.
  std::vector<SeriesRow> rows;
  Eigen::MatrixXd scenario_cov;

  std::size_t n_scenario_rows() const {
    return times.size() * scenario_labels.size() * cause_labels.size();
  }
  std::size_t scenario_index(std::size_t time, std::size_t scenario, std::size_t cause) const;
  // First row matching label and cause at time t; throws when absent.
  const SeriesRow& find(std::string_view label, std::string_view cause, double t) const;
  bool any_extrapolated() const;
};

// Dispatch on request.estimand, then append the requested contrast and lincom rows.
StandardizedSeries standardize(const StandardizeRequest& request, const SurvivalFrame& population);

// Single-model standardized failure probability (1 - exp(-exp(eta))).
StandardizedSeries standardized_failure(StandardizeRequest request, const SurvivalFrame& population);
// Two cause-specific models: standardized cumulative incidence per cause.
StandardizedSeries standardized_cif(StandardizeRequest request, const SurvivalFrame& population);
// Two cause-specific models: restricted mean failure time per cause before t*.
StandardizedSeries standardized_rmft(StandardizeRequest request, const SurvivalFrame& population);

// CIFs at (rx_c=1, rx_o=1), (rx_c=1, rx_o=0), (rx_c=0, rx_o=0) and difference
// contrasts against the first scenario.
StandardizedSeries separable_effects(const FpmFit& cause_model, const FpmFit& other_model,
                                     const SurvivalFrame& population, std::vector<double> times,
                                     std::vector<AtScenario> scenarios, double ci_level = 0.95,
                                     int nodes = 50);

// Scenario-vs-reference contrast rows for every other scenario, cause and time.
std::vector<SeriesRow> contrast(const StandardizedSeries& series, ContrastKind kind,
                                std::size_t reference);
// Weighted sum of (scenario, cause) estimates at each time, symmetric CI.
std::vector<SeriesRow> lincom(const StandardizedSeries& series, std::span<const double> weights,
                              std::string label = "lincom");

struct DeltaMethod {
  Eigen::VectorXd value;
  Eigen::MatrixXd jacobian;
  Eigen::MatrixXd cov;
};

// Central differences with step 1e-5 * max(1, |theta_j|); cov = J V J'.
DeltaMethod delta_method(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& psi,
                         const Eigen::VectorXd& theta, const Eigen::MatrixXd& V);

// Block-diagonal stack of the models' covariance matrices.
Eigen::MatrixXd stacked_vcov(std::span<const FpmFit> models);

// Two-sided normal quantile for a confidence level.
double normal_quantile(double ci_level);

}  // namespace crstd
