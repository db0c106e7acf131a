#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "crstd/dataset.hpp"

namespace crstd {

// Right-continuous step function. The first point is (0, value at 0).
struct StepFunction {
  std::vector<double> times;
  std::vector<double> values;
  std::vector<double> n_at_risk;
  std::vector<double> variance;  // Greenwood, KM only; empty otherwise

  double at(double t) const;
};

struct GroupCurve {
  double group = 0.0;
  int cause = 0;  // 0 for all-cause curves
  StepFunction curve;
};

// 1 - prod_{t_j <= t} (1 - d_j / n_j) per group. Events at a tied time are
// counted before censorings at that time. `expected_groups`, when given,
// must each contain at least one row.
std::vector<GroupCurve> kaplan_meier_failure(std::span<const double> time, std::span<const int> d,
                                             std::span<const double> group,
                                             std::span<const double> expected_groups = {});

struct AalenJohansen {
  std::vector<GroupCurve> cif;       // one per (group, cause)
  std::vector<GroupCurve> survival;  // all-cause KM survival per group
};

// F_k(t) = sum_{t_j <= t} S(t_j-) d_kj / n_j, with S the all-cause KM.
// `cause` is 0 for censored rows and the cause code otherwise.
AalenJohansen aalen_johansen_cif(std::span<const double> time, std::span<const int> cause,
                                 std::span<const double> group,
                                 std::span<const double> expected_groups = {});

// Frame helpers using administrative censoring at exit_time.
std::vector<GroupCurve> kaplan_meier_failure(const SurvivalFrame& frame, double exit_time,
                                             const std::string& group_column,
                                             const std::string& time_column = "dtime",
                                             const std::string& event_column = "eventType");
AalenJohansen aalen_johansen_cif(const SurvivalFrame& frame, double exit_time,
                                 const std::string& group_column,
                                 const std::string& time_column = "dtime",
                                 const std::string& event_column = "eventType");

// CSV: time,estimate,n_at_risk,group,cause
void write_curves_csv(std::span<const GroupCurve> curves, std::ostream& out);

}  // namespace crstd
