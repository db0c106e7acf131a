#include <doctest.h>

#include <cmath>

#include <omp.h>

#include "crstd/error.hpp"
#include "crstd/fpm.hpp"
#include "crstd/nonparam.hpp"
#include "crstd/quadrature.hpp"
#include "crstd/standardize.hpp"
#include "support/simulate.hpp"

using namespace crstd;

namespace {

const SurvivalFrame& data() {
  static const SurvivalFrame f = testing::simulate_prostate_like(500, 77);
  return f;
}

ModelSpec spec(int code, std::vector<std::string> covs, int df, bool tvc) {
  ModelSpec s;
  s.covariates = std::move(covs);
  s.baseline_df = df;
  if (tvc) s.tvc = {{"rx", 2}};
  s.failure_code = code;
  return s;
}

const FpmFit& prostate() {
  static const FpmFit f = fit(spec(1, {"rx", "normalAct", "hx", "hgBinary"}, 3, true), data());
  return f;
}

const FpmFit& other() {
  static const FpmFit f = fit(spec(2, {"rx", "normalAct", "ageCat2", "ageCat3", "hx"}, 3, false), data());
  return f;
}

StandardizeRequest cif_request(std::vector<double> times) {
  StandardizeRequest r;
  r.models = {prostate(), other()};
  r.cause_labels = {"prostate", "other"};
  r.estimand = Estimand::Cif;
  r.times = std::move(times);
  r.scenarios = {AtScenario::parse("rx=0", "at1"), AtScenario::parse("rx=1", "at2")};
  return r;
}

}  // namespace

TEST_SUITE("standardize") {
  TEST_CASE("scenario parsing") {
    const auto s = AtScenario::parse("rx=1, agercs1rx=~agercs1", "at2");
    REQUIRE(s.assignments.size() == 2);
    CHECK(s.assignments[0].column == "rx");
    CHECK(*s.assignments[0].value == 1.0);
    CHECK_FALSE(s.assignments[1].value.has_value());
    CHECK(s.assignments[1].source == "agercs1");
    CHECK(AtScenario::parse("", "obs").assignments.empty());
    CHECK_THROWS_AS(AtScenario::parse("rx", "x"), ValidationError);
    CHECK_THROWS_AS(AtScenario::parse("rx=abc", "x"), ValidationError);
    CHECK_THROWS_AS(AtScenario::parse("rx=1,rx=0", "x"), ValidationError);
    CHECK_THROWS_AS(AtScenario::parse("rx=~", "x"), ValidationError);
  }

  TEST_CASE("request validation") {
    auto r = cif_request({10});
    r.models = {prostate()};
    CHECK_THROWS_AS(standardize(r, data()), ValidationError);
    r = cif_request({10});
    r.estimand = Estimand::Failure;
    CHECK_THROWS_AS(standardize(r, data()), ValidationError);
    r = cif_request({10});
    r.lincom = {1, 1, 0};
    CHECK_THROWS_AS(standardize(r, data()), ValidationError);
    r = cif_request({10});
    r.scenarios[0] = AtScenario::parse("nosuch=1", "at1");
    CHECK_THROWS_AS(standardize(r, data()), ValidationError);
    r = cif_request({0});
    r.estimand = Estimand::Rmft;
    CHECK_THROWS_AS(standardize(r, data()), ValidationError);
    r = cif_request({-1});
    CHECK_THROWS_AS(standardize(r, data()), ValidationError);
    r = cif_request({10});
    r.scenarios.pop_back();
    r.contrast = ContrastKind::Difference;
    CHECK_THROWS_AS(standardize(r, data()), ValidationError);
  }

  TEST_CASE("time zero short-circuits to zero with zero SE") {
    StandardizeRequest r;
    r.models = {prostate()};
    r.estimand = Estimand::Failure;
    r.times = {0, 12};
    r.scenarios = {AtScenario::parse("rx=0", "at1"), AtScenario::parse("rx=1", "at2")};
    r.contrast = ContrastKind::Ratio;
    const auto s = standardize(r, data());
    for (const char* l : {"at1", "at2"}) {
      const auto& row = s.find(l, "cause1", 0);
      CHECK(row.estimate == 0);
      CHECK(row.se == 0);
      CHECK(row.lci == 0);
      CHECK(row.uci == 0);
    }
    CHECK(std::isnan(s.find("at2 / at1", "cause1", 0).estimate));
    CHECK(std::isfinite(s.find("at2 / at1", "cause1", 12).estimate));
  }

  TEST_CASE("identical scenarios give null contrasts") {
    auto r = cif_request({24, 48});
    r.scenarios = {AtScenario::parse("rx=1", "a"), AtScenario::parse("rx=1", "b")};
    r.contrast = ContrastKind::Difference;
    const auto d = standardize(r, data());
    const auto& row = d.find("b - a", "prostate", 48);
    CHECK(row.estimate == 0);
    CHECK(row.se < 1e-12);
    CHECK(row.lci <= 0);
    CHECK(row.uci >= 0);
    CHECK(row.uci - row.lci < 1e-10);
    r.contrast = ContrastKind::Ratio;
    CHECK(standardize(r, data()).find("b / a", "other", 24).estimate == 1.0);
  }

  TEST_CASE("delta method basics") {
    Eigen::VectorXd th(2);
    th << 0.5, -2.0;
    const Eigen::MatrixXd V = Eigen::Matrix2d::Identity() * 0.04;
    const auto c = delta_method([](const Eigen::VectorXd&) { return Eigen::VectorXd::Constant(1, 3.0); },
                                th, V);
    CHECK(c.cov(0, 0) == 0.0);
    const auto lin = delta_method(
        [](const Eigen::VectorXd& t) { return Eigen::VectorXd::Constant(1, 2 * t[0] - t[1]); }, th, V);
    CHECK(lin.cov(0, 0) == doctest::Approx(0.04 * 5).epsilon(1e-8));
    CHECK_THROWS_AS(delta_method([](const Eigen::VectorXd& t) {
                      return Eigen::VectorXd::Constant(1, t[0] > 0.5 ? 1.0 / 0.0 : 0.0);
                    }, th, V),
                    NumericalError);
  }

  TEST_CASE("single-row failure SE matches the closed form") {
    const FpmFit& f = prostate();
    const auto row = SurvivalFrame{}
                         .with_numeric("rx", {1})
                         .with_numeric("normalAct", {1})
                         .with_numeric("hx", {0})
                         .with_numeric("hgBinary", {1});
    StandardizeRequest r;
    r.models = {f};
    r.estimand = Estimand::Failure;
    r.times = {6, 30, 60};
    r.scenarios = {AtScenario::parse("", "obs")};
    r.row = 0;
    const auto s = standardize(r, row);
    const std::vector<double> x{1, 1, 0, 1};
    for (double t : r.times) {
      const double eta = f.linear_predictor(x, t).eta;
      Eigen::VectorXd z(f.theta().size());
      for (Eigen::Index j = 0; j < z.size(); ++j) {
        Eigen::VectorXd th = f.theta();
        th[j] += 1.0;
        z[j] = f.linear_predictor(th, x, t).eta - eta;
      }
      const double se = std::exp(eta - std::exp(eta)) * std::sqrt(z.dot(f.vcov() * z));
      const auto& got = s.find("obs", "cause1", t);
      CHECK(got.estimate == doctest::Approx(-std::expm1(-std::exp(eta))).epsilon(1e-12));
      CHECK(std::abs(got.se - se) < 1e-6);
    }
  }

  TEST_CASE("cumulative incidence is monotone and sums with survival to one") {
    std::vector<double> grid;
    for (int i = 0; i <= 24; ++i) grid.push_back(2.5 * i);
    const auto cif = standardize(cif_request(grid), data());
    auto sr = cif_request(grid);
    sr.estimand = Estimand::Survival;
    sr.cause_labels.clear();
    const auto surv = standardize(sr, data());
    for (const char* l : {"at1", "at2"}) {
      double prev_c = -1, prev_o = -1;
      for (double t : grid) {
        const double c = cif.find(l, "prostate", t).estimate;
        const double o = cif.find(l, "other", t).estimate;
        CHECK(c >= prev_c);
        CHECK(o >= prev_o);
        prev_c = c;
        prev_o = o;
        CHECK(std::abs(c + o + surv.find(l, "all", t).estimate - 1.0) < 1e-6);
      }
    }
  }

  TEST_CASE("doubling quadrature nodes barely moves the estimates") {
    auto r = cif_request({12, 36, 60});
    const auto a = standardize(r, data());
    r.nodes = 100;
    const auto b = standardize(r, data());
    for (std::size_t i = 0; i < a.n_scenario_rows(); ++i)
      CHECK(std::abs(a.rows[i].estimate - b.rows[i].estimate) < 1e-6);
  }

  TEST_CASE("swapped RMFT integral equals the nested integral") {
    const double tstar = 60;
    auto r = cif_request({tstar});
    r.estimand = Estimand::Rmft;
    const auto rm = standardize(r, data());
    const auto rule = gauss_legendre_rule(60);
    std::vector<double> nodes;
    for (double v : rule.nodes) nodes.push_back(0.5 * tstar * (v + 1));
    const auto cif = standardize(cif_request(nodes), data());
    for (const char* cause : {"prostate", "other"}) {
      double nested = 0;
      for (std::size_t q = 0; q < nodes.size(); ++q)
        nested += 0.5 * tstar * rule.weights[q] * cif.find("at2", cause, nodes[q]).estimate;
      const double swapped = rm.find("at2", cause, tstar).estimate;
      CHECK(std::abs(nested - swapped) < 1e-6);
      CHECK(swapped >= 0);
      CHECK(swapped <= tstar);
    }
  }

  TEST_CASE("treatment-only models agree with Aalen-Johansen per arm") {
    const auto big = testing::simulate_prostate_like(2000, 5);
    const FpmFit c = fit(spec(1, {"rx"}, 3, false), big);
    const FpmFit o = fit(spec(2, {"rx"}, 3, false), big);
    StandardizeRequest r;
    r.models = {c, o};
    r.estimand = Estimand::Cif;
    r.times = {6, 12, 24, 36, 48, 60};
    r.scenarios = {AtScenario::parse("rx=0", "at1"), AtScenario::parse("rx=1", "at2")};
    const auto s = standardize(r, big);
    const auto aj = aalen_johansen_cif(big, 60, "rx");
    for (const auto& gc : aj.cif) {
      const std::string label = gc.group == 0 ? "at1" : "at2";
      const std::string cause = "cause" + std::to_string(gc.cause);
      for (double t : r.times)
        CHECK(std::abs(s.find(label, cause, t).estimate - gc.curve.at(t)) < 0.02);
    }
  }

  TEST_CASE("contrasts do not depend on scenario order") {
    auto r = cif_request({30, 60});
    r.contrast = ContrastKind::Difference;
    r.scenarios.push_back(AtScenario::parse("rx=1,hx=1", "at3"));
    r.reference = 0;
    const auto a = standardize(r, data());
    std::swap(r.scenarios[0], r.scenarios[2]);
    r.reference = 2;
    const auto b = standardize(r, data());
    for (const char* l : {"at2 - at1", "at3 - at1"})
      for (const char* c : {"prostate", "other"}) {
        CHECK(a.find(l, c, 60).estimate == doctest::Approx(b.find(l, c, 60).estimate).epsilon(1e-12));
        CHECK(a.find(l, c, 60).se == doctest::Approx(b.find(l, c, 60).se).epsilon(1e-6));
      }
  }

  TEST_CASE("non-marginal mode equals direct composition of predictions") {
    auto r = cif_request({20, 50});
    r.row = 3;
    const auto s = standardize(r, data());
    Eigen::MatrixXd Xc(1, 4), Xo(1, 5);
    const auto v = [&](const char* c) { return data().numeric(c)[3]; };
    Xc << 1, v("normalAct"), v("hx"), v("hgBinary");
    Xo << 1, v("normalAct"), v("ageCat2"), v("ageCat3"), v("hx");
    for (double t : r.times) {
      const auto rule = time_rule(t, 400);
      const auto pc = predict(prostate(), Xc, rule.nodes);
      const auto po = predict(other(), Xo, rule.nodes);
      double ic = 0;
      for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
        const auto qq = static_cast<Eigen::Index>(q);
        ic += rule.weights[q] * pc.survival(0, qq) * po.survival(0, qq) * pc.hazard(0, qq);
      }
      CHECK(std::abs(s.find("at2", "prostate", t).estimate - ic) < 1e-7);
    }
  }

  TEST_CASE("lincom with unit weight returns the scenario estimate") {
    auto r = cif_request({60});
    r.estimand = Estimand::Rmft;
    r.lincom = {0, 0, 1, 0};
    const auto s = standardize(r, data());
    const auto& l = s.find("lincom", "all", 60);
    const auto& at2 = s.find("at2", "prostate", 60);
    CHECK(l.estimate == at2.estimate);
    CHECK(l.se == doctest::Approx(at2.se).epsilon(1e-12));
    CHECK(l.uci - l.estimate == doctest::Approx(l.estimate - l.lci));
  }

  TEST_CASE("confidence interval scales") {
    auto r = cif_request({36});
    r.contrast = ContrastKind::Difference;
    const auto s = standardize(r, data());
    const double z = normal_quantile(0.95);
    const auto& p = s.find("at1", "prostate", 36);
    CHECK(p.lci == doctest::Approx(p.estimate * std::exp(-z * p.se / p.estimate)));
    CHECK(p.lci < p.estimate);
    CHECK(p.uci > p.estimate);
    const auto& d = s.find("at2 - at1", "prostate", 36);
    CHECK(d.uci - d.estimate == doctest::Approx(d.estimate - d.lci));
    CHECK(normal_quantile(0.95) == doctest::Approx(1.959963984540054).epsilon(1e-14));
  }

  TEST_CASE("results do not depend on the thread count") {
    const auto r = cif_request({10, 40});
    omp_set_num_threads(1);
    const auto a = standardize(r, data());
    omp_set_num_threads(4);
    const auto b = standardize(r, data());
    omp_set_num_threads(omp_get_num_procs());
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
      CHECK(a.rows[i].estimate == b.rows[i].estimate);
      CHECK(a.rows[i].se == b.rows[i].se);
    }
  }

  TEST_CASE("separable effects require duplicated treatment columns") {
    const auto f = data().with_numeric("rx_c", data().numeric("rx")).with_numeric("rx_o", data().numeric("rx"));
    const FpmFit c = fit(spec(1, {"rx_c", "hx"}, 3, false), f);
    const FpmFit o = fit(spec(2, {"rx_o", "hx"}, 3, false), f);
    std::vector<AtScenario> sc = {AtScenario::parse("rx_c=1,rx_o=1", "at1"),
                                  AtScenario::parse("rx_c=1,rx_o=0", "at2"),
                                  AtScenario::parse("rx_c=0,rx_o=0", "at3")};
    const auto s = separable_effects(c, o, f, {36}, sc);
    CHECK(s.find("at2 - at1", "cause1", 36).estimate ==
          doctest::Approx(s.find("at2", "cause1", 36).estimate - s.find("at1", "cause1", 36).estimate));
    auto bad = sc;
    bad[1] = AtScenario::parse("rx_c=1", "at2");
    CHECK_THROWS_AS(separable_effects(c, o, f, {36}, bad), ValidationError);
    CHECK_THROWS_AS(separable_effects(o, c, f, {36}, sc), ValidationError);
  }

  TEST_CASE("extrapolation beyond the last event is flagged") {
    const auto s = standardize(cif_request({10, 500}), data());
    CHECK_FALSE(s.find("at1", "prostate", 10).extrapolated);
    CHECK(s.find("at1", "prostate", 500).extrapolated);
  }
}
