#include "crstd/fpm.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <set>

#include "crstd/error.hpp"
#include "crstd/kernels.hpp"

namespace crstd {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double max_abs(const Eigen::VectorXd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace

// ---------------------------------------------------------------------------
// ModelSpec

void ModelSpec::validate() const {
  if (baseline_df < 1) throw ValidationError("baseline df must be >= 1");
  if (!(exit_time > 0)) throw ValidationError("exit time must be > 0");
  std::set<std::string> seen;
  for (const auto& c : covariates) {
    if (c.empty()) throw ValidationError("empty covariate name");
    if (!seen.insert(c).second) throw ValidationError("duplicate covariate '" + c + "'");
  }
  std::set<std::string> tvc_seen;
  for (const auto& t : tvc) {
    if (t.df < 1) throw ValidationError("tvc df must be >= 1 for '" + t.covariate + "'");
    if (!seen.count(t.covariate))
      throw ValidationError("tvc covariate '" + t.covariate + "' is not a model covariate");
    if (!tvc_seen.insert(t.covariate).second)
      throw ValidationError("duplicate tvc term '" + t.covariate + "'");
  }
}

std::size_t ModelSpec::n_parameters() const {
  std::size_t p = covariates.size() + static_cast<std::size_t>(baseline_df) + 1;
  for (const auto& t : tvc) p += static_cast<std::size_t>(t.df);
  return p;
}

std::vector<std::string> ModelSpec::parameter_names() const {
  std::vector<std::string> names = covariates;
  for (int j = 1; j <= baseline_df; ++j) names.push_back("_rcs" + std::to_string(j));
  for (const auto& t : tvc)
    for (int j = 1; j <= t.df; ++j) names.push_back("_rcs_" + t.covariate + std::to_string(j));
  names.push_back("_cons");
  return names;
}

std::vector<std::size_t> ModelSpec::tvc_covariate_index() const {
  std::vector<std::size_t> idx;
  for (const auto& t : tvc) {
    auto it = std::find(covariates.begin(), covariates.end(), t.covariate);
    if (it == covariates.end())
      throw ValidationError("tvc covariate '" + t.covariate + "' is not a model covariate");
    idx.push_back(static_cast<std::size_t>(it - covariates.begin()));
  }
  return idx;
}

// ---------------------------------------------------------------------------
// Bases and design

ModelBases make_bases(const ModelSpec& spec, const SurvivalDeclaration& decl,
                      std::span<const std::size_t> rows) {
  std::vector<double> log_t;
  std::vector<double> event_times;
  log_t.reserve(rows.size());
  for (std::size_t r : rows) {
    log_t.push_back(std::log(decl.analysis_time[r]));
    if (decl.d[r] == 1) event_times.push_back(decl.analysis_time[r]);
  }

  auto make = [&](int df) {
    KnotVector knots = centile_knots(event_times, df, {}, true);
    return spec.orthogonalize ? SplineBasis::orthogonalized_on(std::move(knots), log_t)
                              : SplineBasis(std::move(knots));
  };
  ModelBases bases;
  bases.baseline = make(spec.baseline_df);
  for (const auto& t : spec.tvc) bases.tvc.push_back(make(t.df));
  return bases;
}

Eigen::MatrixXd covariate_matrix(const SurvivalFrame& frame, std::span<const std::string> covariates,
                                 std::span<const std::size_t> rows) {
  Eigen::MatrixXd X(static_cast<Eigen::Index>(rows.size()),
                    static_cast<Eigen::Index>(covariates.size()));
  for (std::size_t j = 0; j < covariates.size(); ++j) {
    const auto& col = frame.numeric(covariates[j]);
    for (std::size_t i = 0; i < rows.size(); ++i)
      X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = col[rows[i]];
  }
  return X;
}

FpmDesign build_design(const ModelSpec& spec, const ModelBases& bases, const Eigen::MatrixXd& X,
                       std::span<const double> analysis_time, std::span<const int> d) {
  const auto n = static_cast<Eigen::Index>(analysis_time.size());
  if (X.rows() != n || static_cast<Eigen::Index>(d.size()) != n)
    throw ValidationError("design: row count mismatch");
  if (X.cols() != static_cast<Eigen::Index>(spec.covariates.size()))
    throw ValidationError("design: covariate count mismatch");
  const auto P = static_cast<Eigen::Index>(spec.n_parameters());
  const auto p = X.cols();
  FpmDesign design;
  design.Z = Eigen::MatrixXd::Zero(n, P);
  design.D = Eigen::MatrixXd::Zero(n, P);
  design.log_t.resize(n);
  design.d.resize(n);

  std::vector<double> log_t(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    log_t[static_cast<std::size_t>(i)] = std::log(analysis_time[static_cast<std::size_t>(i)]);
    design.log_t[i] = log_t[static_cast<std::size_t>(i)];
    design.d[i] = d[static_cast<std::size_t>(i)];
  }
  design.Z.leftCols(p) = X;
  Eigen::Index col = p;
  const auto B = bases.baseline.eval(log_t);
  const auto dB = bases.baseline.deriv(log_t);
  design.Z.middleCols(col, B.cols()) = B;
  design.D.middleCols(col, B.cols()) = dB;
  col += B.cols();
  const auto tvc_idx = spec.tvc_covariate_index();
  for (std::size_t j = 0; j < spec.tvc.size(); ++j) {
    const auto S = bases.tvc[j].eval(log_t);
    const auto dS = bases.tvc[j].deriv(log_t);
    const auto x = X.col(static_cast<Eigen::Index>(tvc_idx[j]));
    design.Z.middleCols(col, S.cols()) = S.array().colwise() * x.array();
    design.D.middleCols(col, S.cols()) = dS.array().colwise() * x.array();
    col += S.cols();
  }
  design.Z.col(col).setOnes();
  return design;
}

// ---------------------------------------------------------------------------
// Likelihood

LikelihoodResult log_likelihood(const Eigen::VectorXd& theta, const FpmDesign& design,
                                bool with_hessian) {
  if (theta.size() != design.Z.cols())
    throw ValidationError("theta has " + std::to_string(theta.size()) + " entries, model has " +
                          std::to_string(design.Z.cols()));
  const Eigen::VectorXd eta = design.Z * theta;
  const Eigen::VectorXd deta = design.D * theta;
  const auto rows = kernels::likelihood_rows(eta, deta, design.log_t, design.d);
  LikelihoodResult out;
  if (!rows.finite) {
    out.value = kNegInf;
    return out;
  }
  out.value = kernels::ordered_sum(rows.contribution);
  const Eigen::VectorXd resid = design.d.cast<double>() - rows.cumhaz;
  out.gradient = design.Z.transpose() * resid + design.D.transpose() * rows.inv_deta;
  if (with_hessian) {
    out.hessian = -(design.Z.transpose() * rows.cumhaz.asDiagonal() * design.Z);
    out.hessian.noalias() -=
        design.D.transpose() * rows.inv_deta.array().square().matrix().asDiagonal() * design.D;
  }
  return out;
}

LikelihoodResult log_likelihood(const Eigen::VectorXd& theta, const ModelSpec& spec,
                                const SurvivalFrame& data) {
  spec.validate();
  if (static_cast<std::size_t>(theta.size()) != spec.n_parameters())
    throw ValidationError("theta has " + std::to_string(theta.size()) + " entries, spec needs " +
                          std::to_string(spec.n_parameters()));
  const auto decl =
      declare_survival(data, spec.failure_code, spec.exit_time, spec.time_column, spec.event_column);
  std::vector<std::size_t> rows(data.n_rows());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  const auto bases = make_bases(spec, decl, rows);
  const auto X = covariate_matrix(data, spec.covariates, rows);
  const auto design = build_design(spec, bases, X, decl.analysis_time, decl.d);
  return log_likelihood(theta, design, true);
}

// ---------------------------------------------------------------------------
// FpmFit

FpmFit::FpmFit(ModelSpec spec, ModelBases bases, Eigen::VectorXd theta, Eigen::MatrixXd vcov)
    : spec_(std::move(spec)), bases_(std::move(bases)), theta_(std::move(theta)),
      vcov_(std::move(vcov)) {
  const auto P = static_cast<Eigen::Index>(spec_.n_parameters());
  if (theta_.size() != P) throw ValidationError("theta dimension does not match the model spec");
  if (vcov_.rows() != P || vcov_.cols() != P)
    throw ValidationError("vcov dimension does not match theta");
  if (bases_.tvc.size() != spec_.tvc.size())
    throw ValidationError("tvc basis count does not match the model spec");
  if (bases_.baseline.df() != spec_.baseline_df)
    throw ValidationError("baseline basis df does not match the model spec");
  for (std::size_t j = 0; j < spec_.tvc.size(); ++j)
    if (bases_.tvc[j].df() != spec_.tvc[j].df)
      throw ValidationError("tvc basis df does not match the model spec");
}

std::size_t FpmFit::tvc_offset(std::size_t j) const {
  std::size_t off = n_covariates() + static_cast<std::size_t>(spec_.baseline_df);
  for (std::size_t k = 0; k < j; ++k) off += static_cast<std::size_t>(spec_.tvc[k].df);
  return off;
}

LinearPredictor FpmFit::linear_predictor(std::span<const double> x, double t) const {
  return linear_predictor(theta_, x, t);
}

LinearPredictor FpmFit::linear_predictor(const Eigen::VectorXd& theta, std::span<const double> x,
                                         double t) const {
  if (x.size() != n_covariates()) throw ValidationError("covariate vector has wrong length");
  const double lt = std::log(t);
  LinearPredictor lp;
  lp.eta = theta[static_cast<Eigen::Index>(intercept_index())];
  for (std::size_t j = 0; j < x.size(); ++j) lp.eta += x[j] * theta[static_cast<Eigen::Index>(j)];
  std::array<double, 32> b{}, db{};
  const auto add_block = [&](const SplineBasis& basis, std::size_t offset, double mult) {
    const auto df = static_cast<std::size_t>(basis.df());
    basis.eval_point(lt, std::span<double>(b.data(), df));
    basis.deriv_point(lt, std::span<double>(db.data(), df));
    for (std::size_t k = 0; k < df; ++k) {
      const double coef = theta[static_cast<Eigen::Index>(offset + k)];
      lp.eta += mult * b[k] * coef;
      lp.deta_dlogt += mult * db[k] * coef;
    }
  };
  add_block(bases_.baseline, gamma_offset(), 1.0);
  const auto idx = spec_.tvc_covariate_index();
  for (std::size_t j = 0; j < spec_.tvc.size(); ++j)
    add_block(bases_.tvc[j], tvc_offset(j), x[idx[j]]);
  return lp;
}

// ---------------------------------------------------------------------------
// Fitting

namespace {

// Exponential proportional-hazards fit: log h = a + x'b.
Eigen::VectorXd exponential_start(const Eigen::MatrixXd& X, std::span<const double> t,
                                  std::span<const int> d) {
  const Eigen::Index n = X.rows();
  const Eigen::Index p = X.cols();
  Eigen::MatrixXd A(n, p + 1);
  A.leftCols(p) = X;
  A.col(p).setOnes();
  Eigen::VectorXd tv(n), dv(n);
  double events = 0, exposure = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    tv[i] = t[static_cast<std::size_t>(i)];
    dv[i] = d[static_cast<std::size_t>(i)];
    events += dv[i];
    exposure += tv[i];
  }
  Eigen::VectorXd b = Eigen::VectorXd::Zero(p + 1);
  b[p] = std::log(events / exposure);
  auto loglik = [&](const Eigen::VectorXd& beta) {
    const Eigen::VectorXd lp = A * beta;
    return dv.dot(lp) - tv.dot(lp.array().exp().matrix());
  };
  double ll = loglik(b);
  for (int iter = 0; iter < 50; ++iter) {
    const Eigen::VectorXd mu = ((A * b).array().exp() * tv.array()).matrix();
    const Eigen::VectorXd g = A.transpose() * (dv - mu);
    const Eigen::MatrixXd info = A.transpose() * mu.asDiagonal() * A;
    Eigen::VectorXd step = info.ldlt().solve(g);
    if (!step.allFinite()) break;
    double scale = 1.0;
    bool moved = false;
    for (int h = 0; h < 30; ++h) {
      const Eigen::VectorXd cand = b + scale * step;
      const double l2 = loglik(cand);
      if (std::isfinite(l2) && l2 >= ll) {
        b = cand;
        moved = std::abs(l2 - ll) > 1e-12 * (1 + std::abs(ll));
        ll = l2;
        break;
      }
      scale *= 0.5;
    }
    if (!moved) break;
  }
  return b;
}

// Nelson-Aalen cumulative hazard at each row's time (ties: all events at t counted).
std::vector<double> nelson_aalen_at(std::span<const double> t, std::span<const int> d) {
  const std::size_t n = t.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return t[a] < t[b]; });
  std::vector<double> H(n, 0.0);
  double cum = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    double events = 0;
    while (j < n && t[order[j]] == t[order[i]]) events += d[order[j++]];
    cum += events / static_cast<double>(n - i);
    for (std::size_t k = i; k < j; ++k) H[order[k]] = cum;
    i = j;
  }
  return H;
}

Eigen::VectorXd initial_values(const ModelSpec& spec, const FpmDesign& design,
                               const Eigen::MatrixXd& X, std::span<const double> t,
                               std::span<const int> d) {
  const Eigen::Index n = X.rows();
  const Eigen::Index p = X.cols();
  const Eigen::Index P = static_cast<Eigen::Index>(spec.n_parameters());
  const Eigen::Index df = spec.baseline_df;
  const Eigen::VectorXd expo = exponential_start(X, t, d);
  const Eigen::VectorXd beta = expo.head(p);
  const Eigen::VectorXd xb = X * beta;
  const double mean_xb = n ? xb.mean() : 0.0;

  // Baseline block and intercept from a least-squares fit of log Nelson-Aalen.
  const auto H = nelson_aalen_at(t, d);
  std::vector<Eigen::Index> ev;
  for (Eigen::Index i = 0; i < n; ++i)
    if (d[static_cast<std::size_t>(i)] == 1 && H[static_cast<std::size_t>(i)] > 0) ev.push_back(i);

  auto assemble = [&](const Eigen::VectorXd& gamma_c) {
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(P);
    theta.head(p) = beta;
    theta.segment(p, df) = gamma_c.head(df);
    theta[P - 1] = gamma_c[df];
    return theta;
  };
  auto regress = [&](const std::vector<Eigen::Index>& rows, const Eigen::VectorXd& y) {
    Eigen::MatrixXd A(static_cast<Eigen::Index>(rows.size()), df + 1);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      A.row(static_cast<Eigen::Index>(r)).head(df) = design.Z.row(rows[r]).segment(p, df);
      A(static_cast<Eigen::Index>(r), df) = 1.0;
    }
    return Eigen::VectorXd(A.colPivHouseholderQr().solve(y));
  };

  if (static_cast<Eigen::Index>(ev.size()) > df + 1) {
    Eigen::VectorXd y(static_cast<Eigen::Index>(ev.size()));
    for (std::size_t r = 0; r < ev.size(); ++r)
      y[static_cast<Eigen::Index>(r)] =
          std::log(H[static_cast<std::size_t>(ev[r])]) - (xb[ev[r]] - mean_xb);
    Eigen::VectorXd gc = regress(ev, y);
    gc[df] -= mean_xb;
    Eigen::VectorXd theta = assemble(gc);
    if (std::isfinite(log_likelihood(theta, design, false).value)) return theta;
  }

  // Fallback: Weibull-like eta = ln t + a + x'b, exactly representable by the basis.
  std::vector<Eigen::Index> all(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) all[static_cast<std::size_t>(i)] = i;
  Eigen::VectorXd y = design.log_t;
  Eigen::VectorXd gc = regress(all, y);
  gc[df] += expo[p];
  return assemble(gc);
}

// Newton direction, regularising the hessian when it is not negative definite.
Eigen::VectorXd newton_step(const Eigen::MatrixXd& hessian, const Eigen::VectorXd& gradient) {
  Eigen::MatrixXd info = -hessian;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
  if (ldlt.info() == Eigen::Success && ldlt.isPositive() &&
      (ldlt.vectorD().array() > 0).all()) {
    Eigen::VectorXd step = ldlt.solve(gradient);
    if (step.allFinite()) return step;
  }
  const double scale = std::max(1e-8, info.diagonal().cwiseAbs().maxCoeff());
  for (double ridge = 1e-6; ridge < 1e8; ridge *= 10) {
    Eigen::MatrixXd reg = info;
    reg.diagonal().array() += ridge * scale;
    Eigen::LLT<Eigen::MatrixXd> llt(reg);
    if (llt.info() == Eigen::Success) {
      Eigen::VectorXd step = llt.solve(gradient);
      if (step.allFinite()) return step;
    }
  }
  return gradient / scale;
}

}  // namespace

FpmFit fit(const ModelSpec& spec, const SurvivalFrame& data, const FitOptions& options) {
  spec.validate();
  std::vector<std::string> needed = spec.covariates;
  needed.push_back(spec.time_column);
  needed.push_back(spec.event_column);
  for (const auto& c : needed)
    if (!data.is_numeric(c))
      throw ValidationError("column '" + c + "' is missing or not numeric");
  const auto rows = data.complete_rows(needed);
  const std::size_t dropped = data.n_rows() - rows.size();
  if (rows.empty()) throw ValidationError("no complete rows to fit");

  const SurvivalFrame sub = data.select_rows(rows);
  const auto decl =
      declare_survival(sub, spec.failure_code, spec.exit_time, spec.time_column, spec.event_column);
  if (decl.n_events() == 0) throw ValidationError("no events for failure code " +
                                                  std::to_string(spec.failure_code));
  std::vector<std::size_t> all(sub.n_rows());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  ModelBases bases = make_bases(spec, decl, all);
  const Eigen::MatrixXd X = covariate_matrix(sub, spec.covariates, all);
  const FpmDesign design = build_design(spec, bases, X, decl.analysis_time, decl.d);

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design.Z);
  if (qr.rank() < design.Z.cols()) throw ValidationError("rank-deficient design matrix");

  Eigen::VectorXd theta;
  if (options.start) {
    if (options.start->size() != design.Z.cols())
      throw ValidationError("start vector has the wrong dimension");
    theta = *options.start;
  } else {
    theta = initial_values(spec, design, X, decl.analysis_time, decl.d);
  }
  LikelihoodResult cur = log_likelihood(theta, design, true);
  if (!std::isfinite(cur.value))
    throw NumericalError("initial values give a non-finite likelihood");

  int iter = 0;
  bool converged = false;
  for (; iter < options.max_iterations && !converged; ++iter) {
    const Eigen::VectorXd step = newton_step(cur.hessian, cur.gradient);
    double scale = 1.0;
    bool accepted = false;
    Eigen::VectorXd cand;
    double cand_value = kNegInf;
    for (int h = 0; h <= options.max_halvings; ++h) {
      cand = theta + scale * step;
      cand_value = log_likelihood(cand, design, false).value;
      if (std::isfinite(cand_value) && cand_value >= cur.value - 1e-12 * (1 + std::abs(cur.value))) {
        accepted = true;
        break;
      }
      scale *= 0.5;
    }
    if (!accepted) {
      if (max_abs(cur.gradient) < options.gradient_tolerance) converged = true;
      break;
    }
    const double rel = std::abs(cand_value - cur.value) / std::max(1e-300, std::abs(cur.value));
    theta = cand;
    cur = log_likelihood(theta, design, true);
    converged = max_abs(cur.gradient) < options.gradient_tolerance && rel < options.loglik_tolerance;
  }
  if (!converged)
    throw NumericalError("Newton-Raphson did not converge in " +
                         std::to_string(options.max_iterations) + " iterations (max |gradient| " +
                         std::to_string(max_abs(cur.gradient)) + ")");

  Eigen::MatrixXd info = -cur.hessian;
  Eigen::MatrixXd vcov = info.ldlt().solve(Eigen::MatrixXd::Identity(info.rows(), info.cols()));
  vcov = (0.5 * (vcov + vcov.transpose())).eval();
  if (!vcov.allFinite() || (vcov.diagonal().array() < 0).any())
    throw NumericalError("information matrix is not invertible at the optimum");

  FpmFit out(spec, std::move(bases), theta, vcov);
  out.loglik = cur.value;
  out.n_obs = rows.size();
  out.n_events = decl.n_events();
  out.n_dropped = dropped;
  out.iterations = iter;
  out.max_abs_gradient = max_abs(cur.gradient);
  for (std::size_t i = 0; i < decl.n_rows(); ++i)
    if (decl.d[i] == 1) out.max_event_time = std::max(out.max_event_time, decl.analysis_time[i]);
  return out;
}

// ---------------------------------------------------------------------------
// Prediction

Prediction predict(const FpmFit& fit, const Eigen::MatrixXd& X, std::span<const double> times) {
  if (X.cols() != static_cast<Eigen::Index>(fit.n_covariates()))
    throw ValidationError("covariate matrix has the wrong number of columns");
  const Eigen::Index n = X.rows();
  const auto m = static_cast<Eigen::Index>(times.size());
  Prediction p;
  p.eta.resize(n, m);
  p.survival.resize(n, m);
  p.failure.resize(n, m);
  p.hazard.resize(n, m);
  std::vector<double> x(fit.n_covariates());
  for (Eigen::Index i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < x.size(); ++j) x[j] = X(i, static_cast<Eigen::Index>(j));
    for (Eigen::Index k = 0; k < m; ++k) {
      const double t = times[static_cast<std::size_t>(k)];
      if (t < 0 || std::isnan(t)) throw ValidationError("prediction times must be >= 0");
      if (t == 0) {
        p.eta(i, k) = kNegInf;
        p.survival(i, k) = 1.0;
        p.failure(i, k) = 0.0;
        p.hazard(i, k) = 0.0;
        continue;
      }
      const LinearPredictor lp = fit.linear_predictor(x, t);
      const double H = std::exp(lp.eta);
      p.eta(i, k) = lp.eta;
      p.survival(i, k) = std::exp(-H);
      p.failure(i, k) = -std::expm1(-H);
      p.hazard(i, k) = H * lp.deta_dlogt / t;
    }
  }
  return p;
}

Prediction predict(const FpmFit& fit, const SurvivalFrame& rows, std::span<const double> times) {
  std::vector<std::size_t> idx(rows.n_rows());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  return predict(fit, covariate_matrix(rows, fit.spec().covariates, idx), times);
}

double hazard_ratio(const FpmFit& fit, std::span<const double> x1, std::span<const double> x0,
                    double t) {
  if (!(t > 0)) throw ValidationError("hazard ratio needs t > 0");
  const LinearPredictor a = fit.linear_predictor(x1, t);
  const LinearPredictor b = fit.linear_predictor(x0, t);
  if (!(b.deta_dlogt > 0)) throw NumericalError("reference hazard is not positive");
  return std::exp(a.eta - b.eta) * a.deta_dlogt / b.deta_dlogt;
}

}  // namespace crstd
