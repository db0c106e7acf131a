#pragma once

#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "crstd/dataset.hpp"
#include "crstd/fpm.hpp"
#include "crstd/spline.hpp"
#include "crstd/standardize.hpp"

namespace crstd {

struct RecipeOptions {
  std::vector<double> grid;  // empty: 0..60 in 121 points
  double t_star = 60.0;
  double ci_level = 0.95;
  int nodes = 50;
};

struct RecipeResult {
  std::string name;
  std::vector<std::pair<std::string, std::string>> files;  // file name, content
  nlohmann::ordered_json manifest;
};

// start, start + step, ..., stop with `points` values.
std::vector<double> time_grid(double start, double stop, int points);

std::span<const std::string> recipe_names();

// Accepts a raw or already prepared prostate frame.
RecipeResult run_recipe(std::string_view name, const SurvivalFrame& data,
                        const RecipeOptions& options = {});

// Cause-specific models of the main analysis.
ModelSpec prostate_model_spec(std::string treatment = "rx");
ModelSpec other_model_spec(std::string treatment = "rx");

struct CauseSpecificFits {
  FpmFit prostate;
  FpmFit other;
};
CauseSpecificFits fit_main_models(const SurvivalFrame& prepared);

// Adds ageCat2rx, ageCat3rx.
SurvivalFrame with_age_category_interactions(const SurvivalFrame& prepared);

struct AgeSplines {
  SplineBasis basis;  // 3 df on age, orthogonalised on the frame's ages
  SurvivalFrame frame;  // adds agercs1..3 and agercs1rx..3rx
};
AgeSplines with_age_splines(const SurvivalFrame& prepared);

// CSV: parameter,estimate,se,exp_estimate
std::string coefficient_table(const FpmFit& fit);

}  // namespace crstd
