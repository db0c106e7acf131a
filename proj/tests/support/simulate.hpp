#pragma once

#include <cstdint>
#include <vector>

#include "crstd/dataset.hpp"

namespace crstd::testing {

// Two causes with constant hazards, uniform censoring on [0, censor_max]
// and administrative end at `horizon`. Columns: dtime, eventType, grp (all 0).
SurvivalFrame simulate_constant_hazards(std::size_t n, double lambda_c, double lambda_o,
                                        double censor_max, double horizon, std::uint64_t seed);

// Weibull cause-specific hazard H_k(t|x) = exp(a_k + x'b_k) t^p_k.
struct WeibullCause {
  double log_scale = 0.0;
  double shape = 1.0;
  std::vector<double> beta;  // rx, normalAct, ageCat2, ageCat3, hx, hgBinary
};

struct ProstateLikeTruth {
  WeibullCause prostate{-4.0, 1.1, {-0.3, -0.8, 0.2, 0.3, -0.2, 0.5}};
  WeibullCause other{-4.6, 1.0, {0.3, -0.1, 0.9, 1.2, 0.8, 0.6}};
  double censor_max = 80.0;
};

// Prepared-format frame (rx, dtime, eventType, normalAct, ageCat2, ageCat3,
// hx, hgBinary, age) drawn from the Weibull causes above.
SurvivalFrame simulate_prostate_like(std::size_t n, std::uint64_t seed,
                                     const ProstateLikeTruth& truth = {});

// Raw-format frame with label columns: rx, status, dtime, hg, age, pf, hx.
// Four arms, ten status labels and some missing cells.
SurvivalFrame simulate_raw_prostate(std::size_t n, std::uint64_t seed);

// Nonparametric bootstrap resample of rows.
SurvivalFrame resample(const SurvivalFrame& frame, std::uint64_t seed);

}  // namespace crstd::testing
