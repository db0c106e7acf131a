#include "crstd/standardize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include <boost/math/distributions/normal.hpp>

#include "crstd/csv.hpp"
#include "crstd/error.hpp"
#include "crstd/kernels.hpp"
#include "crstd/quadrature.hpp"

namespace crstd {

// ---------------------------------------------------------------------------
// Scenarios and enums

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

AtScenario AtScenario::parse(std::string_view text, std::string label) {
  AtScenario s;
  s.label = std::move(label);
  const std::string all = trim(text);
  if (all.empty()) return s;
  std::size_t pos = 0;
  while (pos <= all.size()) {
    const auto comma = all.find(',', pos);
    const std::string item =
        trim(std::string_view(all).substr(pos, comma == std::string::npos ? std::string::npos
                                                                          : comma - pos));
    pos = comma == std::string::npos ? all.size() + 1 : comma + 1;
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ValidationError("scenario item '" + item + "' lacks '='");
    Assignment a;
    a.column = trim(std::string_view(item).substr(0, eq));
    const std::string rhs = trim(std::string_view(item).substr(eq + 1));
    if (a.column.empty() || rhs.empty())
      throw ValidationError("scenario item '" + item + "' is incomplete");
    if (rhs.front() == '~') {
      a.source = trim(std::string_view(rhs).substr(1));
      if (a.source.empty()) throw ValidationError("scenario item '" + item + "' has no source");
    } else {
      double v;
      if (!csv::parse_number(rhs, v) || !std::isfinite(v))
        throw ValidationError("scenario value '" + rhs + "' is not a number");
      a.value = v;
    }
    if (s.assigns(a.column))
      throw ValidationError("scenario assigns '" + a.column + "' twice");
    s.assignments.push_back(std::move(a));
  }
  return s;
}

bool AtScenario::assigns(std::string_view column) const {
  return std::any_of(assignments.begin(), assignments.end(),
                     [&](const Assignment& a) { return a.column == column; });
}

Estimand parse_estimand(std::string_view name) {
  if (name == "survival") return Estimand::Survival;
  if (name == "failure") return Estimand::Failure;
  if (name == "cif") return Estimand::Cif;
  if (name == "rmft") return Estimand::Rmft;
  throw ValidationError("unknown estimand '" + std::string(name) + "'");
}

std::string_view to_string(Estimand e) {
  switch (e) {
    case Estimand::Survival: return "survival";
    case Estimand::Failure: return "failure";
    case Estimand::Cif: return "cif";
    case Estimand::Rmft: return "rmft";
  }
  return "";
}

ContrastKind parse_contrast(std::string_view name) {
  if (name == "none" || name.empty()) return ContrastKind::None;
  if (name == "difference") return ContrastKind::Difference;
  if (name == "ratio") return ContrastKind::Ratio;
  throw ValidationError("unknown contrast '" + std::string(name) + "'");
}

std::string_view to_string(ContrastKind c) {
  switch (c) {
    case ContrastKind::None: return "none";
    case ContrastKind::Difference: return "difference";
    case ContrastKind::Ratio: return "ratio";
  }
  return "";
}

std::string_view to_string(RowKind k) {
  switch (k) {
    case RowKind::Scenario: return "scenario";
    case RowKind::Contrast: return "contrast";
    case RowKind::Lincom: return "lincom";
  }
  return "";
}

namespace {

std::size_t n_causes(const StandardizeRequest& r) {
  if (r.estimand == Estimand::Survival || r.estimand == Estimand::Failure) return 1;
  return r.models.size();
}

}  // namespace

void StandardizeRequest::validate() const {
  if (models.empty()) throw ValidationError("at least one model is required");
  switch (estimand) {
    case Estimand::Failure:
      if (models.size() != 1) throw ValidationError("failure estimand takes exactly one model");
      break;
    case Estimand::Survival:
      if (models.size() > 2) throw ValidationError("survival estimand takes one or two models");
      break;
    case Estimand::Cif:
    case Estimand::Rmft:
      if (models.size() != 2) throw ValidationError(std::string(to_string(estimand)) +
                                                    " estimand takes exactly two models");
      break;
  }
  if (scenarios.empty()) throw ValidationError("at least one scenario is required");
  if (times.empty()) throw ValidationError("no evaluation times");
  for (double t : times)
    if (!(t >= 0) || !std::isfinite(t)) throw ValidationError("times must be finite and >= 0");
  if (estimand == Estimand::Rmft) {
    if (times.size() != 1) throw ValidationError("rmft takes a single t*");
    if (!(times[0] > 0)) throw ValidationError("t* must be > 0");
  }
  if (!cause_labels.empty() && cause_labels.size() != n_causes(*this))
    throw ValidationError("cause label count does not match the estimand");
  if (contrast != ContrastKind::None && scenarios.size() < 2)
    throw ValidationError("a contrast needs at least two scenarios");
  if (reference >= scenarios.size()) throw ValidationError("reference scenario out of range");
  if (!lincom.empty() && lincom.size() != scenarios.size() * n_causes(*this))
    throw ValidationError("lincom needs " + std::to_string(scenarios.size() * n_causes(*this)) +
                          " weights (scenarios x causes)");
  if (!(ci_level > 0 && ci_level < 1)) throw ValidationError("ci level must lie in (0, 1)");
  if (nodes < 2 || nodes > 1000) throw ValidationError("quadrature nodes must be between 2 and 1000");
  std::set<std::string> labels;
  for (const auto& s : scenarios)
    if (!labels.insert(s.label).second)
      throw ValidationError("duplicate scenario label '" + s.label + "'");
  for (const auto& s : scenarios) {
    for (const auto& a : s.assignments) {
      const bool known = std::any_of(models.begin(), models.end(), [&](const FpmFit& m) {
        const auto& c = m.spec().covariates;
        return std::find(c.begin(), c.end(), a.column) != c.end();
      });
      if (!known) throw ValidationError("override column '" + a.column + "' is in no model");
    }
  }
}

// ---------------------------------------------------------------------------
// Series helpers

std::size_t StandardizedSeries::scenario_index(std::size_t time, std::size_t scenario,
                                               std::size_t cause) const {
  return (time * scenario_labels.size() + scenario) * cause_labels.size() + cause;
}

const SeriesRow& StandardizedSeries::find(std::string_view label, std::string_view cause,
                                          double t) const {
  for (const auto& r : rows)
    if (r.label == label && r.cause == cause && r.time == t) return r;
  throw ValidationError("no series row for '" + std::string(label) + "', cause '" +
                        std::string(cause) + "' at t=" + csv::format_number(t));
}

bool StandardizedSeries::any_extrapolated() const {
  return std::any_of(rows.begin(), rows.end(), [](const SeriesRow& r) { return r.extrapolated; });
}

double normal_quantile(double ci_level) {
  if (!(ci_level > 0 && ci_level < 1)) throw ValidationError("ci level must lie in (0, 1)");
  return boost::math::quantile(boost::math::normal(), 0.5 + 0.5 * ci_level);
}

Eigen::MatrixXd stacked_vcov(std::span<const FpmFit> models) {
  Eigen::Index p = 0;
  for (const auto& m : models) p += m.theta().size();
  Eigen::MatrixXd V = Eigen::MatrixXd::Zero(p, p);
  Eigen::Index off = 0;
  for (const auto& m : models) {
    const Eigen::Index k = m.theta().size();
    V.block(off, off, k, k) = m.vcov();
    off += k;
  }
  return V;
}

DeltaMethod delta_method(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& psi,
                         const Eigen::VectorXd& theta, const Eigen::MatrixXd& V) {
  if (V.rows() != theta.size() || V.cols() != theta.size())
    throw ValidationError("covariance does not match the parameter vector");
  DeltaMethod out;
  out.value = psi(theta);
  out.jacobian.resize(out.value.size(), theta.size());
  Eigen::VectorXd th = theta;
  for (Eigen::Index j = 0; j < theta.size(); ++j) {
    const double h = 1e-5 * std::max(1.0, std::abs(theta[j]));
    th[j] = theta[j] + h;
    const Eigen::VectorXd up = psi(th);
    th[j] = theta[j] - h;
    const Eigen::VectorXd down = psi(th);
    th[j] = theta[j];
    out.jacobian.col(j) = (up - down) / (2.0 * h);
    if (!out.jacobian.col(j).allFinite())
      throw NumericalError("non-finite delta-method gradient for parameter " + std::to_string(j));
  }
  out.cov = out.jacobian * V * out.jacobian.transpose();
  return out;
}

// ---------------------------------------------------------------------------
// Engine

namespace {

// Spline values at the integration nodes of one evaluation time.
struct TimeBasis {
  std::vector<double> u;
  std::vector<double> w;
  Eigen::MatrixXd B, dB;
  std::vector<Eigen::MatrixXd> Bt, dBt;
};

struct ModelData {
  const FpmFit* fit = nullptr;
  std::vector<Eigen::MatrixXd> X;      // per scenario, rows x covariates
  std::vector<Eigen::MatrixXd> tvc_x;  // per scenario, rows x tvc terms
  std::vector<TimeBasis> at;           // per time index (unused at t = 0)
};

TimeBasis time_basis(const FpmFit& fit, std::vector<double> u, std::vector<double> w) {
  TimeBasis tb;
  std::vector<double> lu(u.size());
  std::transform(u.begin(), u.end(), lu.begin(), [](double x) { return std::log(x); });
  tb.B = fit.bases().baseline.eval(lu);
  tb.dB = fit.bases().baseline.deriv(lu);
  for (const auto& b : fit.bases().tvc) {
    tb.Bt.push_back(b.eval(lu));
    tb.dBt.push_back(b.deriv(lu));
  }
  tb.u = std::move(u);
  tb.w = std::move(w);
  return tb;
}

kernels::TimeTerms time_terms(const FpmFit& fit, const TimeBasis& tb, const Eigen::VectorXd& th) {
  kernels::TimeTerms t;
  const auto g0 = static_cast<Eigen::Index>(fit.gamma_offset());
  const Eigen::Index df = tb.B.cols();
  t.g = tb.B * th.segment(g0, df);
  t.dg = tb.dB * th.segment(g0, df);
  const auto Q = static_cast<Eigen::Index>(tb.u.size());
  const auto k = static_cast<Eigen::Index>(tb.Bt.size());
  t.gt.resize(Q, k);
  t.dgt.resize(Q, k);
  for (Eigen::Index j = 0; j < k; ++j) {
    const auto off = static_cast<Eigen::Index>(fit.tvc_offset(static_cast<std::size_t>(j)));
    const auto& Bj = tb.Bt[static_cast<std::size_t>(j)];
    t.gt.col(j) = Bj * th.segment(off, Bj.cols());
    t.dgt.col(j) = tb.dBt[static_cast<std::size_t>(j)] * th.segment(off, Bj.cols());
  }
  return t;
}

class Engine {
 public:
  Engine(const StandardizeRequest& req, const SurvivalFrame& frame) : req_(req) {
    select_population(frame);
    for (const auto& m : req.models) {
      for (double k : m.bases().baseline.knots().values()) breaks_.push_back(std::exp(k));
      for (const auto& b : m.bases().tvc)
        for (double k : b.knots().values()) breaks_.push_back(std::exp(k));
    }
    const auto S = req.scenarios.size();
    for (const auto& m : req.models) {
      ModelData md;
      md.fit = &m;
      const auto tvc_idx = m.spec().tvc_covariate_index();
      for (std::size_t s = 0; s < S; ++s) {
        Eigen::MatrixXd X = scenario_matrix(frame, m, req.scenarios[s]);
        Eigen::MatrixXd T(X.rows(), static_cast<Eigen::Index>(tvc_idx.size()));
        for (std::size_t j = 0; j < tvc_idx.size(); ++j)
          T.col(static_cast<Eigen::Index>(j)) = X.col(static_cast<Eigen::Index>(tvc_idx[j]));
        md.X.push_back(std::move(X));
        md.tvc_x.push_back(std::move(T));
      }
      for (double t : req.times) md.at.push_back(nodes_for(m, t));
      models_.push_back(std::move(md));
    }
  }

  std::size_t population() const { return rows_.size(); }

  Eigen::VectorXd stacked_theta() const {
    Eigen::Index p = 0;
    for (const auto& m : req_.models) p += m.theta().size();
    Eigen::VectorXd th(p);
    Eigen::Index off = 0;
    for (const auto& m : req_.models) {
      th.segment(off, m.theta().size()) = m.theta();
      off += m.theta().size();
    }
    return th;
  }

  // Scenario estimates ordered (time, scenario, cause).
  Eigen::VectorXd evaluate(const Eigen::VectorXd& stacked) const {
    const std::size_t M = models_.size();
    const std::size_t S = req_.scenarios.size();
    const std::size_t C = n_causes(req_);
    const std::size_t T = req_.times.size();
    std::vector<Eigen::VectorXd> theta(M);
    Eigen::Index off = 0;
    for (std::size_t m = 0; m < M; ++m) {
      const Eigen::Index k = models_[m].fit->theta().size();
      theta[m] = stacked.segment(off, k);
      off += k;
    }
    // Row terms per scenario per model.
    std::vector<std::vector<kernels::RowTerms>> rows(S, std::vector<kernels::RowTerms>(M));
    for (std::size_t m = 0; m < M; ++m) {
      const auto& md = models_[m];
      const auto p = static_cast<Eigen::Index>(md.fit->n_covariates());
      const double c = theta[m][static_cast<Eigen::Index>(md.fit->intercept_index())];
      for (std::size_t s = 0; s < S; ++s) {
        auto& r = rows[s][m];
        r.lin = (md.X[s] * theta[m].head(p)).array() + c;
        r.tvc_x = md.tvc_x[s];
      }
    }
    Eigen::VectorXd out(static_cast<Eigen::Index>(T * S * C));
    std::vector<kernels::TimeTerms> at(M);
    std::vector<double> buf(M);
    for (std::size_t ti = 0; ti < T; ++ti) {
      const double t = req_.times[ti];
      if (t > 0)
        for (std::size_t m = 0; m < M; ++m) at[m] = time_terms(*models_[m].fit, models_[m].at[ti], theta[m]);
      for (std::size_t s = 0; s < S; ++s) {
        const auto base = static_cast<Eigen::Index>((ti * S + s) * C);
        switch (req_.estimand) {
          case Estimand::Survival:
            out[base] = t > 0 ? kernels::mean_survival(rows[s], at, 0) : 1.0;
            break;
          case Estimand::Failure:
            out[base] = t > 0 ? 1.0 - kernels::mean_survival(rows[s], at, 0) : 0.0;
            break;
          case Estimand::Cif:
          case Estimand::Rmft:
            if (t > 0) {
              const auto& tb = models_[0].at[ti];
              kernels::mean_incidence(rows[s], at, tb.u, tb.w, buf);
              for (std::size_t k = 0; k < C; ++k) out[base + static_cast<Eigen::Index>(k)] = buf[k];
            } else {
              for (std::size_t k = 0; k < C; ++k) out[base + static_cast<Eigen::Index>(k)] = 0.0;
            }
            break;
        }
      }
    }
    return out;
  }

 private:
  void select_population(const SurvivalFrame& frame) {
    std::set<std::string> needed;
    for (const auto& m : req_.models) {
      for (const auto& c : m.spec().covariates) {
        const bool always_fixed = std::all_of(
            req_.scenarios.begin(), req_.scenarios.end(), [&](const AtScenario& s) {
              return std::any_of(s.assignments.begin(), s.assignments.end(),
                                 [&](const Assignment& a) { return a.column == c && a.value; });
            });
        if (!always_fixed) needed.insert(c);
      }
    }
    for (const auto& s : req_.scenarios)
      for (const auto& a : s.assignments)
        if (!a.value) needed.insert(a.source);
    for (const auto& c : needed)
      if (!frame.has_column(c)) throw ValidationError("population lacks column '" + c + "'");
    const std::vector<std::string> cols(needed.begin(), needed.end());
    const auto complete = frame.complete_rows(cols);
    if (req_.row) {
      if (*req_.row >= frame.n_rows()) throw ValidationError("row index out of range");
      if (std::find(complete.begin(), complete.end(), *req_.row) == complete.end())
        throw ValidationError("row " + std::to_string(*req_.row) + " has missing covariates");
      rows_ = {*req_.row};
    } else {
      rows_ = complete;
    }
    if (rows_.empty()) throw ValidationError("no complete rows to standardise over");
  }

  Eigen::MatrixXd scenario_matrix(const SurvivalFrame& frame, const FpmFit& fit,
                                  const AtScenario& sc) const {
    const auto& covs = fit.spec().covariates;
    const auto n = static_cast<Eigen::Index>(rows_.size());
    Eigen::MatrixXd X(n, static_cast<Eigen::Index>(covs.size()));
    for (std::size_t j = 0; j < covs.size(); ++j) {
      const auto jj = static_cast<Eigen::Index>(j);
      auto it = std::find_if(sc.assignments.begin(), sc.assignments.end(),
                             [&](const Assignment& a) { return a.column == covs[j]; });
      if (it != sc.assignments.end() && it->value) {
        X.col(jj).setConstant(*it->value);
        continue;
      }
      const auto& src = frame.numeric(it != sc.assignments.end() ? it->source : covs[j]);
      for (Eigen::Index i = 0; i < n; ++i) X(i, jj) = src[rows_[static_cast<std::size_t>(i)]];
    }
    return X;
  }

  TimeBasis nodes_for(const FpmFit& fit, double t) const {
    if (!(t > 0)) return {};
    if (req_.estimand == Estimand::Survival || req_.estimand == Estimand::Failure)
      return time_basis(fit, {t}, {1.0});
    auto rule = panel_rule(t, breaks_, req_.nodes);
    if (req_.estimand == Estimand::Rmft)
      for (std::size_t q = 0; q < rule.nodes.size(); ++q) rule.weights[q] *= t - rule.nodes[q];
    return time_basis(fit, std::move(rule.nodes), std::move(rule.weights));
  }

  const StandardizeRequest& req_;
  std::vector<std::size_t> rows_;
  std::vector<double> breaks_;
  std::vector<ModelData> models_;
};

void log_scale_ci(SeriesRow& r, double z) {
  if (r.estimate > 0 && r.se > 0) {
    const double f = std::exp(z * r.se / r.estimate);
    r.lci = r.estimate / f;
    r.uci = r.estimate * f;
  } else {
    r.lci = r.uci = r.estimate;
  }
}

}  // namespace

StandardizedSeries standardize(const StandardizeRequest& request, const SurvivalFrame& population) {
  request.validate();
  Engine engine(request, population);
  const Eigen::VectorXd theta = engine.stacked_theta();
  const DeltaMethod dm = delta_method(
      [&](const Eigen::VectorXd& th) { return engine.evaluate(th); }, theta,
      stacked_vcov(request.models));

  StandardizedSeries out;
  out.estimand = request.estimand;
  out.ci_level = request.ci_level;
  out.nodes = (request.estimand == Estimand::Cif || request.estimand == Estimand::Rmft)
                  ? request.nodes
                  : 0;
  out.population = engine.population();
  out.times = request.times;
  for (const auto& s : request.scenarios) out.scenario_labels.push_back(s.label);
  if (!request.cause_labels.empty()) {
    out.cause_labels = request.cause_labels;
  } else if (n_causes(request) == 1) {
    out.cause_labels = {request.models.size() == 1
                            ? "cause" + std::to_string(request.models[0].spec().failure_code)
                            : "all"};
  } else {
    for (const auto& m : request.models)
      out.cause_labels.push_back("cause" + std::to_string(m.spec().failure_code));
  }
  out.scenario_cov = dm.cov;

  double support = 0.0;
  for (const auto& m : request.models) support = std::max(support, m.max_event_time);
  const double z = normal_quantile(request.ci_level);
  for (std::size_t ti = 0; ti < out.times.size(); ++ti) {
    for (std::size_t s = 0; s < out.scenario_labels.size(); ++s) {
      for (std::size_t k = 0; k < out.cause_labels.size(); ++k) {
        const auto idx = static_cast<Eigen::Index>(out.scenario_index(ti, s, k));
        SeriesRow r;
        r.time = out.times[ti];
        r.label = out.scenario_labels[s];
        r.cause = out.cause_labels[k];
        r.kind = RowKind::Scenario;
        r.estimate = dm.value[idx];
        r.se = std::sqrt(std::max(0.0, dm.cov(idx, idx)));
        r.extrapolated = r.time > support;
        log_scale_ci(r, z);
        out.rows.push_back(std::move(r));
      }
    }
  }
  if (request.contrast != ContrastKind::None) {
    auto extra = contrast(out, request.contrast, request.reference);
    out.rows.insert(out.rows.end(), extra.begin(), extra.end());
  }
  if (!request.lincom.empty()) {
    auto extra = lincom(out, request.lincom);
    out.rows.insert(out.rows.end(), extra.begin(), extra.end());
  }
  return out;
}

namespace {

StandardizedSeries with_estimand(StandardizeRequest request, const SurvivalFrame& population,
                                 Estimand e) {
  request.estimand = e;
  return standardize(request, population);
}

}  // namespace

StandardizedSeries standardized_failure(StandardizeRequest request, const SurvivalFrame& population) {
  return with_estimand(std::move(request), population, Estimand::Failure);
}

StandardizedSeries standardized_cif(StandardizeRequest request, const SurvivalFrame& population) {
  return with_estimand(std::move(request), population, Estimand::Cif);
}

StandardizedSeries standardized_rmft(StandardizeRequest request, const SurvivalFrame& population) {
  return with_estimand(std::move(request), population, Estimand::Rmft);
}

StandardizedSeries separable_effects(const FpmFit& cause_model, const FpmFit& other_model,
                                     const SurvivalFrame& population, std::vector<double> times,
                                     std::vector<AtScenario> scenarios, double ci_level,
                                     int nodes) {
  const auto has = [](const FpmFit& f, std::string_view c) {
    const auto& v = f.spec().covariates;
    return std::find(v.begin(), v.end(), c) != v.end();
  };
  if (!has(cause_model, "rx_c") || has(cause_model, "rx_o"))
    throw ValidationError("the cause model must contain rx_c and not rx_o");
  if (!has(other_model, "rx_o") || has(other_model, "rx_c"))
    throw ValidationError("the other-cause model must contain rx_o and not rx_c");
  if (scenarios.size() != 3) throw ValidationError("separable effects use three scenarios");
  for (const auto& s : scenarios)
    if (!s.assigns("rx_c") || !s.assigns("rx_o"))
      throw ValidationError("scenario '" + s.label + "' must set both rx_c and rx_o");
  StandardizeRequest req;
  req.models = {cause_model, other_model};
  req.estimand = Estimand::Cif;
  req.times = std::move(times);
  req.scenarios = std::move(scenarios);
  req.contrast = ContrastKind::Difference;
  req.reference = 0;
  req.ci_level = ci_level;
  req.nodes = nodes;
  return standardize(req, population);
}

std::vector<SeriesRow> contrast(const StandardizedSeries& series, ContrastKind kind,
                                std::size_t reference) {
  const std::size_t S = series.scenario_labels.size();
  const std::size_t C = series.cause_labels.size();
  if (S < 2) throw ValidationError("a contrast needs at least two scenarios");
  if (reference >= S) throw ValidationError("reference scenario out of range");
  if (kind == ContrastKind::None) return {};
  const double z = normal_quantile(series.ci_level);
  const auto& V = series.scenario_cov;
  std::vector<SeriesRow> out;
  for (std::size_t ti = 0; ti < series.times.size(); ++ti) {
    for (std::size_t s = 0; s < S; ++s) {
      if (s == reference) continue;
      for (std::size_t k = 0; k < C; ++k) {
        const auto a = static_cast<Eigen::Index>(series.scenario_index(ti, s, k));
        const auto b = static_cast<Eigen::Index>(series.scenario_index(ti, reference, k));
        const double va = series.rows[static_cast<std::size_t>(a)].estimate;
        const double vb = series.rows[static_cast<std::size_t>(b)].estimate;
        SeriesRow r;
        r.time = series.times[ti];
        r.cause = series.cause_labels[k];
        r.kind = RowKind::Contrast;
        r.extrapolated = series.rows[static_cast<std::size_t>(a)].extrapolated;
        if (kind == ContrastKind::Difference) {
          r.label = series.scenario_labels[s] + " - " + series.scenario_labels[reference];
          r.estimate = va - vb;
          r.se = std::sqrt(std::max(0.0, V(a, a) + V(b, b) - 2.0 * V(a, b)));
          r.lci = r.estimate - z * r.se;
          r.uci = r.estimate + z * r.se;
        } else {
          r.label = series.scenario_labels[s] + " / " + series.scenario_labels[reference];
          if (vb == 0.0) {
            if (r.time != 0.0)
              throw NumericalError("ratio contrast with a zero reference estimate at t=" +
                                   csv::format_number(r.time));
            r.estimate = r.se = r.lci = r.uci = std::numeric_limits<double>::quiet_NaN();
          } else {
            r.estimate = va / vb;
            const double ga = 1.0 / va;
            const double gb = -1.0 / vb;
            const double var_log = ga * ga * V(a, a) + gb * gb * V(b, b) + 2.0 * ga * gb * V(a, b);
            const double se_log = std::sqrt(std::max(0.0, var_log));
            r.se = r.estimate * se_log;
            r.lci = r.estimate * std::exp(-z * se_log);
            r.uci = r.estimate * std::exp(z * se_log);
          }
        }
        out.push_back(std::move(r));
      }
    }
  }
  return out;
}

std::vector<SeriesRow> lincom(const StandardizedSeries& series, std::span<const double> weights,
                              std::string label) {
  const std::size_t S = series.scenario_labels.size();
  const std::size_t C = series.cause_labels.size();
  if (weights.size() != S * C)
    throw ValidationError("lincom needs " + std::to_string(S * C) + " weights (scenarios x causes)");
  const double z = normal_quantile(series.ci_level);
  const Eigen::Map<const Eigen::VectorXd> w(weights.data(), static_cast<Eigen::Index>(weights.size()));
  std::vector<SeriesRow> out;
  for (std::size_t ti = 0; ti < series.times.size(); ++ti) {
    const auto base = static_cast<Eigen::Index>(series.scenario_index(ti, 0, 0));
    const auto n = static_cast<Eigen::Index>(S * C);
    SeriesRow r;
    r.time = series.times[ti];
    r.label = label;
    r.cause = "all";
    r.kind = RowKind::Lincom;
    for (Eigen::Index j = 0; j < n; ++j) {
      const auto& src = series.rows[static_cast<std::size_t>(base + j)];
      r.estimate += w[j] * src.estimate;
      r.extrapolated = r.extrapolated || src.extrapolated;
    }
    const double var = w.dot(series.scenario_cov.block(base, base, n, n) * w);
    r.se = std::sqrt(std::max(0.0, var));
    r.lci = r.estimate - z * r.se;
    r.uci = r.estimate + z * r.se;
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace crstd
