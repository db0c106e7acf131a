#include "crstd/analysis.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

#include "crstd/csv.hpp"
#include "crstd/error.hpp"
#include "crstd/nonparam.hpp"
#include "crstd/output.hpp"

namespace crstd {

std::vector<double> time_grid(double start, double stop, int points) {
  if (points < 1) throw ValidationError("time grid needs at least one point");
  if (!(stop >= start) || !(start >= 0)) throw ValidationError("time grid must satisfy 0 <= start <= stop");
  if (points == 1) return {start};
  std::vector<double> g(static_cast<std::size_t>(points));
  const double step = (stop - start) / (points - 1);
  for (int i = 0; i < points; ++i) g[static_cast<std::size_t>(i)] = start + i * step;
  g.back() = stop;
  return g;
}

std::span<const std::string> recipe_names() {
  static const std::array<std::string, 9> names = {
      "km-figure1",        "total-cif",           "rmft-60",
      "net-direct",        "separable",           "appendixB-interactions",
      "appendixB-age-splines", "appendixB-age-specific", "appendixB-ratio"};
  return names;
}

ModelSpec prostate_model_spec(std::string treatment) {
  ModelSpec s;
  s.covariates = {treatment, "normalAct", "ageCat2", "ageCat3", "hx", "hgBinary"};
  s.baseline_df = 4;
  if (treatment == "rx") s.tvc = {{"rx", 2}};
  s.failure_code = kProstateDeath;
  return s;
}

ModelSpec other_model_spec(std::string treatment) {
  ModelSpec s;
  s.covariates = {std::move(treatment), "normalAct", "ageCat2", "ageCat3", "hx", "hgBinary"};
  s.baseline_df = 3;
  s.failure_code = kOtherDeath;
  return s;
}

CauseSpecificFits fit_main_models(const SurvivalFrame& prepared) {
  return {fit(prostate_model_spec(), prepared), fit(other_model_spec(), prepared)};
}

SurvivalFrame with_age_category_interactions(const SurvivalFrame& prepared) {
  const auto& rx = prepared.numeric("rx");
  SurvivalFrame out = prepared;
  for (const char* c : {"ageCat2", "ageCat3"}) {
    const auto& a = prepared.numeric(c);
    std::vector<double> v(a.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = a[i] * rx[i];
    out = out.with_numeric(std::string(c) + "rx", std::move(v));
  }
  return out;
}

AgeSplines with_age_splines(const SurvivalFrame& prepared) {
  const auto& age = prepared.numeric("age");
  const auto& rx = prepared.numeric("rx");
  std::vector<double> observed;
  for (double a : age)
    if (!std::isnan(a)) observed.push_back(a);
  if (observed.empty()) throw ValidationError("no observed ages");
  auto knots = centile_knots(observed, 3, {}, false);
  AgeSplines out{SplineBasis::orthogonalized_on(knots, observed), prepared};
  const Eigen::MatrixXd B = out.basis.eval(age);
  for (Eigen::Index j = 0; j < B.cols(); ++j) {
    std::vector<double> v(age.size()), vx(age.size());
    for (std::size_t i = 0; i < age.size(); ++i) {
      v[i] = std::isnan(age[i]) ? std::nan("") : B(static_cast<Eigen::Index>(i), j);
      vx[i] = v[i] * rx[i];
    }
    const std::string name = "agercs" + std::to_string(j + 1);
    out.frame = out.frame.with_numeric(name, std::move(v)).with_numeric(name + "rx", std::move(vx));
  }
  return out;
}

std::string coefficient_table(const FpmFit& fit) {
  std::ostringstream os;
  os << "parameter,estimate,se,exp_estimate\n";
  const auto names = fit.parameter_names();
  for (std::size_t j = 0; j < names.size(); ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    const std::string cells[] = {names[j], csv::format_number(fit.theta()[jj]),
                                 csv::format_number(std::sqrt(fit.vcov()(jj, jj))),
                                 csv::format_number(std::exp(fit.theta()[jj]))};
    csv::write_row(os, cells);
  }
  return os.str();
}

namespace {

nlohmann::ordered_json fit_summary(const FpmFit& f) {
  nlohmann::ordered_json j;
  j["failure_code"] = f.spec().failure_code;
  j["covariates"] = f.spec().covariates;
  j["baseline_df"] = f.spec().baseline_df;
  nlohmann::ordered_json tvc = nlohmann::ordered_json::array();
  for (const auto& t : f.spec().tvc) tvc.push_back({{"covariate", t.covariate}, {"df", t.df}});
  j["tvc"] = std::move(tvc);
  j["loglik"] = f.loglik;
  j["n_obs"] = f.n_obs;
  j["n_events"] = f.n_events;
  j["n_dropped"] = f.n_dropped;
  j["iterations"] = f.iterations;
  return j;
}

class RecipeBuilder {
 public:
  RecipeBuilder(std::string name, const RecipeOptions& opt) : opt_(opt) {
    result_.name = std::move(name);
    result_.manifest["recipe"] = result_.name;
    grid_ = opt.grid.empty() ? time_grid(0.0, 60.0, 121) : opt.grid;
    result_.manifest["grid"] = {{"start", grid_.front()}, {"stop", grid_.back()},
                                {"points", grid_.size()}};
    result_.manifest["t_star"] = opt.t_star;
    result_.manifest["ci_level"] = opt.ci_level;
    result_.manifest["quadrature_nodes"] = opt.nodes;
    result_.manifest["models"] = nlohmann::ordered_json::object();
    result_.manifest["series"] = nlohmann::ordered_json::object();
  }

  const std::vector<double>& grid() const { return grid_; }

  StandardizeRequest request(std::vector<FpmFit> models, Estimand e,
                             std::vector<AtScenario> scenarios) const {
    StandardizeRequest r;
    r.models = std::move(models);
    r.estimand = e;
    r.times = e == Estimand::Rmft ? std::vector<double>{opt_.t_star} : grid_;
    r.scenarios = std::move(scenarios);
    r.ci_level = opt_.ci_level;
    r.nodes = opt_.nodes;
    if (e == Estimand::Cif || e == Estimand::Rmft) r.cause_labels = {"prostate", "other"};
    return r;
  }

  void add_model(const std::string& label, const FpmFit& f) {
    result_.manifest["models"][label] = fit_summary(f);
    result_.files.emplace_back("coefficients_" + label + ".csv", coefficient_table(f));
    result_.files.emplace_back("model_" + label + ".json", fit_to_json(f));
  }

  void add_series(const std::string& file, const StandardizeRequest& r, const StandardizedSeries& s) {
    result_.manifest["series"][file] = series_manifest(r, s);
    result_.files.emplace_back(file, series_csv(s));
  }

  void add_file(std::string file, std::string content) {
    result_.files.emplace_back(std::move(file), std::move(content));
  }

  nlohmann::ordered_json& manifest() { return result_.manifest; }

  RecipeResult finish(std::size_t rows) {
    result_.manifest["data_rows"] = rows;
    result_.manifest["versions"] = software_versions();
    nlohmann::ordered_json files = nlohmann::ordered_json::array();
    for (const auto& [name, content] : result_.files) files.push_back(name);
    result_.manifest["files"] = std::move(files);
    return std::move(result_);
  }

 private:
  const RecipeOptions& opt_;
  std::vector<double> grid_;
  RecipeResult result_;
};

std::vector<AtScenario> treatment_scenarios(const std::string& placebo, const std::string& des) {
  return {AtScenario::parse(placebo, "at1"), AtScenario::parse(des, "at2")};
}

nlohmann::ordered_json spline_json(const SplineBasis& b) {
  nlohmann::ordered_json j;
  j["knots"] = std::vector<double>(b.knots().values().begin(), b.knots().values().end());
  nlohmann::ordered_json R = nlohmann::ordered_json::array();
  if (b.R())
    for (Eigen::Index i = 0; i < b.R()->rows(); ++i) {
      std::vector<double> row(static_cast<std::size_t>(b.R()->cols()));
      for (Eigen::Index k = 0; k < b.R()->cols(); ++k) row[static_cast<std::size_t>(k)] = (*b.R())(i, k);
      R.push_back(row);
    }
  j["R"] = std::move(R);
  return j;
}

ModelSpec age_spline_prostate_spec() {
  ModelSpec s = prostate_model_spec();
  s.covariates = {"rx",       "normalAct", "agercs1",   "agercs2",  "agercs3",
                  "hx",       "hgBinary",  "agercs1rx", "agercs2rx", "agercs3rx"};
  return s;
}

const std::string kAgeSplinePlacebo = "rx=0,agercs1rx=0,agercs2rx=0,agercs3rx=0";
const std::string kAgeSplineDes = "rx=1,agercs1rx=~agercs1,agercs2rx=~agercs2,agercs3rx=~agercs3";

void age_spline_cif(RecipeBuilder& rb, const SurvivalFrame& prepared, ContrastKind kind,
                    const std::string& file) {
  const AgeSplines as = with_age_splines(prepared);
  rb.manifest()["age_spline"] = spline_json(as.basis);
  const FpmFit prostate = fit(age_spline_prostate_spec(), as.frame);
  const FpmFit other = fit(other_model_spec(), as.frame);
  rb.add_model("prostate", prostate);
  rb.add_model("other", other);
  auto req = rb.request({prostate, other}, Estimand::Cif,
                        treatment_scenarios(kAgeSplinePlacebo, kAgeSplineDes));
  req.contrast = kind;
  rb.add_series(file, req, standardize(req, as.frame));
}

}  // namespace

RecipeResult run_recipe(std::string_view name, const SurvivalFrame& data,
                        const RecipeOptions& options) {
  if (std::find(recipe_names().begin(), recipe_names().end(), name) == recipe_names().end())
    throw ValidationError("unknown recipe '" + std::string(name) + "'");
  const SurvivalFrame prepared = prepare_prostate(data);
  RecipeBuilder rb(std::string(name), options);

  if (name == "km-figure1") {
    const auto curves = kaplan_meier_failure(prepared, rb.grid().back(), "rx");
    std::ostringstream os;
    write_curves_csv(curves, os);
    rb.add_file("km_figure1.csv", os.str());
  } else if (name == "total-cif" || name == "rmft-60" || name == "net-direct") {
    const auto fits = fit_main_models(prepared);
    rb.add_model("prostate", fits.prostate);
    rb.add_model("other", fits.other);
    if (name == "total-cif") {
      std::ostringstream hr;
      hr << "time,hazard_ratio\n";
      std::vector<double> x1(fits.prostate.n_covariates(), 0.0), x0 = x1;
      x1[0] = 1.0;
      for (double t : {12.0, 36.0, 60.0})
        hr << csv::format_number(t) << ','
           << csv::format_number(hazard_ratio(fits.prostate, x1, x0, t)) << '\n';
      rb.add_file("prostate_rx_hazard_ratio.csv", hr.str());
      auto req = rb.request({fits.prostate, fits.other}, Estimand::Cif,
                            treatment_scenarios("rx=0", "rx=1"));
      req.contrast = ContrastKind::Difference;
      rb.add_series("total_cif.csv", req, standardize(req, prepared));
    } else if (name == "rmft-60") {
      auto req = rb.request({fits.prostate, fits.other}, Estimand::Rmft,
                            treatment_scenarios("rx=0", "rx=1"));
      req.contrast = ContrastKind::Difference;
      auto series = standardize(req, prepared);
      const std::array<double, 4> placebo{1, 1, 0, 0}, des{0, 0, 1, 1};
      for (auto& r : lincom(series, placebo, "total at1")) series.rows.push_back(std::move(r));
      for (auto& r : lincom(series, des, "total at2")) series.rows.push_back(std::move(r));
      rb.add_series("rmft_60.csv", req, series);
    } else {
      auto req = rb.request({fits.prostate}, Estimand::Failure, treatment_scenarios("rx=0", "rx=1"));
      req.contrast = ContrastKind::Difference;
      req.cause_labels = {"prostate"};
      rb.add_series("net_direct.csv", req, standardize(req, prepared));
    }
  } else if (name == "separable") {
    const SurvivalFrame f =
        prepared.with_numeric("rx_c", prepared.numeric("rx")).with_numeric("rx_o", prepared.numeric("rx"));
    const FpmFit prostate = fit(prostate_model_spec("rx_c"), f);
    const FpmFit other = fit(other_model_spec("rx_o"), f);
    rb.add_model("prostate", prostate);
    rb.add_model("other", other);
    std::vector<AtScenario> sc = {AtScenario::parse("rx_c=1,rx_o=1", "at1"),
                                  AtScenario::parse("rx_c=1,rx_o=0", "at2"),
                                  AtScenario::parse("rx_c=0,rx_o=0", "at3")};
    auto req = rb.request({prostate, other}, Estimand::Cif, sc);
    req.contrast = ContrastKind::Difference;
    auto series = separable_effects(prostate, other, f, rb.grid(), sc, options.ci_level, options.nodes);
    rb.add_series("separable.csv", req, series);
  } else if (name == "appendixB-interactions") {
    const SurvivalFrame f = with_age_category_interactions(prepared);
    ModelSpec ps = prostate_model_spec();
    ps.covariates.insert(ps.covariates.end(), {"ageCat2rx", "ageCat3rx"});
    const FpmFit prostate = fit(ps, f);
    const FpmFit other = fit(other_model_spec(), f);
    rb.add_model("prostate", prostate);
    rb.add_model("other", other);
    auto req = rb.request({prostate, other}, Estimand::Cif,
                          treatment_scenarios("rx=0,ageCat2rx=0,ageCat3rx=0",
                                              "rx=1,ageCat2rx=~ageCat2,ageCat3rx=~ageCat3"));
    req.contrast = ContrastKind::Difference;
    rb.add_series("interactions_cif.csv", req, standardize(req, f));
  } else if (name == "appendixB-age-splines") {
    age_spline_cif(rb, prepared, ContrastKind::Difference, "age_splines_cif.csv");
  } else if (name == "appendixB-ratio") {
    age_spline_cif(rb, prepared, ContrastKind::Ratio, "age_splines_ratio.csv");
  } else {  // appendixB-age-specific
    const AgeSplines as = with_age_splines(prepared);
    rb.manifest()["age_spline"] = spline_json(as.basis);
    const FpmFit prostate = fit(age_spline_prostate_spec(), as.frame);
    const FpmFit other = fit(other_model_spec(), as.frame);
    rb.add_model("prostate", prostate);
    rb.add_model("other", other);
    for (double age : {55.0, 65.0, 75.0}) {
      std::array<double, 3> c{};
      as.basis.eval_point(age, c);
      // One covariate pattern; the other-cause model reads the matching age group.
      SurvivalFrame row;
      const auto one = [](double v) { return std::vector<double>{v}; };
      row = row.with_numeric("rx", one(0)).with_numeric("normalAct", one(1)).with_numeric("hx", one(0))
                .with_numeric("hgBinary", one(1))
                .with_numeric("ageCat2", one(age >= 60 && age < 75 ? 1 : 0))
                .with_numeric("ageCat3", one(age >= 75 ? 1 : 0));
      for (int j = 0; j < 3; ++j) {
        const std::string n = "agercs" + std::to_string(j + 1);
        row = row.with_numeric(n, one(c[static_cast<std::size_t>(j)])).with_numeric(n + "rx", one(0));
      }
      auto req = rb.request({prostate, other}, Estimand::Cif,
                            treatment_scenarios(kAgeSplinePlacebo, kAgeSplineDes));
      req.contrast = ContrastKind::Difference;
      req.row = 0;
      const std::string file = "age_specific_" + csv::format_number(age) + ".csv";
      rb.add_series(file, req, standardize(req, row));
    }
  }
  return rb.finish(prepared.n_rows());
}

}  // namespace crstd
