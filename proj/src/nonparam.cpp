#include "crstd/nonparam.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <set>

#include "crstd/csv.hpp"
#include "crstd/error.hpp"

namespace crstd {

double StepFunction::at(double t) const {
  auto it = std::upper_bound(times.begin(), times.end(), t);
  if (it == times.begin()) return values.front();
  return values[static_cast<std::size_t>(it - times.begin()) - 1];
}

namespace {

struct TimeSlice {
  double time;
  double at_risk;
  std::map<int, double> events;  // cause -> count
  double total_events() const {
    double s = 0;
    for (const auto& [c, n] : events) s += n;
    return s;
  }
};

// Distinct times with any event, with the risk set just before each.
std::vector<TimeSlice> slices(std::span<const double> time, std::span<const int> cause,
                              const std::vector<std::size_t>& rows) {
  std::vector<std::size_t> order(rows);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return time[a] < time[b] || (time[a] == time[b] && a < b);
  });
  std::vector<TimeSlice> out;
  const std::size_t n = order.size();
  std::size_t i = 0;
  while (i < n) {
    const double t = time[order[i]];
    TimeSlice s{t, static_cast<double>(n - i), {}};
    std::size_t j = i;
    while (j < n && time[order[j]] == t) {
      if (cause[order[j]] != 0) s.events[cause[order[j]]] += 1.0;
      ++j;
    }
    if (!s.events.empty()) out.push_back(std::move(s));
    i = j;
  }
  return out;
}

std::map<double, std::vector<std::size_t>> split_groups(std::span<const double> time,
                                                         std::span<const int> cause,
                                                         std::span<const double> group,
                                                         std::span<const double> expected) {
  if (time.size() != cause.size() || (!group.empty() && group.size() != time.size()))
    throw ValidationError("time, event and group vectors differ in length");
  std::map<double, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < time.size(); ++i) {
    if (!(time[i] >= 0)) throw ValidationError("times must be non-negative");
    const double g = group.empty() ? 0.0 : group[i];
    if (std::isnan(g)) continue;
    groups[g].push_back(i);
  }
  for (double g : expected) {
    if (!groups.count(g)) throw ValidationError("group " + csv::format_number(g) + " is empty");
  }
  if (groups.empty()) throw ValidationError("no rows to estimate from");
  return groups;
}

}  // namespace

std::vector<GroupCurve> kaplan_meier_failure(std::span<const double> time, std::span<const int> d,
                                             std::span<const double> group,
                                             std::span<const double> expected_groups) {
  std::vector<GroupCurve> out;
  for (const auto& [g, rows] : split_groups(time, d, group, expected_groups)) {
    GroupCurve gc;
    gc.group = g;
    StepFunction& f = gc.curve;
    f.times.push_back(0.0);
    f.values.push_back(0.0);
    f.n_at_risk.push_back(static_cast<double>(rows.size()));
    f.variance.push_back(0.0);
    double surv = 1.0;
    double greenwood = 0.0;
    for (const auto& s : slices(time, d, rows)) {
      const double e = s.total_events();
      surv *= 1.0 - e / s.at_risk;
      if (s.at_risk > e) greenwood += e / (s.at_risk * (s.at_risk - e));
      f.times.push_back(s.time);
      f.values.push_back(1.0 - surv);
      f.n_at_risk.push_back(s.at_risk);
      f.variance.push_back(surv > 0 ? surv * surv * greenwood : 0.0);
    }
    out.push_back(std::move(gc));
  }
  return out;
}

AalenJohansen aalen_johansen_cif(std::span<const double> time, std::span<const int> cause,
                                 std::span<const double> group,
                                 std::span<const double> expected_groups) {
  std::set<int> causes;
  for (int c : cause) {
    if (c < 0) throw ValidationError("cause codes must be >= 0");
    if (c) causes.insert(c);
  }
  AalenJohansen out;
  for (const auto& [g, rows] : split_groups(time, cause, group, expected_groups)) {
    const auto sl = slices(time, cause, rows);
    GroupCurve surv_curve;
    surv_curve.group = g;
    StepFunction& S = surv_curve.curve;
    S.times.push_back(0.0);
    S.values.push_back(1.0);
    S.n_at_risk.push_back(static_cast<double>(rows.size()));

    std::map<int, GroupCurve> per_cause;
    for (int c : causes) {
      GroupCurve gc;
      gc.group = g;
      gc.cause = c;
      gc.curve.times.push_back(0.0);
      gc.curve.values.push_back(0.0);
      gc.curve.n_at_risk.push_back(static_cast<double>(rows.size()));
      per_cause.emplace(c, std::move(gc));
    }
    double surv = 1.0;
    for (const auto& s : sl) {
      for (auto& [c, gc] : per_cause) {
        auto it = s.events.find(c);
        const double dk = it == s.events.end() ? 0.0 : it->second;
        gc.curve.times.push_back(s.time);
        gc.curve.values.push_back(gc.curve.values.back() + surv * dk / s.at_risk);
        gc.curve.n_at_risk.push_back(s.at_risk);
      }
      surv *= 1.0 - s.total_events() / s.at_risk;
      S.times.push_back(s.time);
      S.values.push_back(surv);
      S.n_at_risk.push_back(s.at_risk);
    }
    for (auto& [c, gc] : per_cause) out.cif.push_back(std::move(gc));
    out.survival.push_back(std::move(surv_curve));
  }
  return out;
}

namespace {

struct Censored {
  std::vector<double> time;
  std::vector<int> cause;
  std::vector<double> group;
};

Censored administratively_censored(const SurvivalFrame& frame, double exit_time,
                                   const std::string& group_column, const std::string& time_column,
                                   const std::string& event_column) {
  if (!(exit_time > 0)) throw ValidationError("exit time must be > 0");
  const auto& t = frame.numeric(time_column);
  const auto& e = frame.numeric(event_column);
  const auto& g = frame.numeric(group_column);
  Censored c;
  for (std::size_t i = 0; i < frame.n_rows(); ++i) {
    if (std::isnan(t[i]) || std::isnan(e[i])) continue;
    const bool within = t[i] <= exit_time;
    c.time.push_back(within ? t[i] : exit_time);
    c.cause.push_back(within ? static_cast<int>(e[i]) : 0);
    c.group.push_back(g[i]);
  }
  return c;
}

}  // namespace

std::vector<GroupCurve> kaplan_meier_failure(const SurvivalFrame& frame, double exit_time,
                                             const std::string& group_column,
                                             const std::string& time_column,
                                             const std::string& event_column) {
  auto c = administratively_censored(frame, exit_time, group_column, time_column, event_column);
  std::vector<int> any(c.cause.size());
  std::transform(c.cause.begin(), c.cause.end(), any.begin(), [](int k) { return k != 0 ? 1 : 0; });
  return kaplan_meier_failure(c.time, any, c.group);
}

AalenJohansen aalen_johansen_cif(const SurvivalFrame& frame, double exit_time,
                                 const std::string& group_column, const std::string& time_column,
                                 const std::string& event_column) {
  auto c = administratively_censored(frame, exit_time, group_column, time_column, event_column);
  return aalen_johansen_cif(c.time, c.cause, c.group);
}

void write_curves_csv(std::span<const GroupCurve> curves, std::ostream& out) {
  out << "time,estimate,n_at_risk,group,cause\n";
  for (const auto& gc : curves) {
    const auto& f = gc.curve;
    for (std::size_t i = 0; i < f.times.size(); ++i) {
      out << csv::format_number(f.times[i]) << ',' << csv::format_number(f.values[i]) << ','
          << csv::format_number(f.n_at_risk[i]) << ',' << csv::format_number(gc.group) << ','
          << gc.cause << '\n';
    }
  }
}

}  // namespace crstd
