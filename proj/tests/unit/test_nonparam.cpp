#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "crstd/error.hpp"
#include "crstd/nonparam.hpp"
#include "support/simulate.hpp"

using namespace crstd;

TEST_SUITE("nonparam") {
  TEST_CASE("no events means zero failure") {
    const std::vector<double> t{1, 2, 3};
    const std::vector<int> d{0, 0, 0};
    const auto c = kaplan_meier_failure(t, d, {});
    REQUIRE(c.size() == 1);
    CHECK(c[0].curve.at(10) == 0.0);
  }

  TEST_CASE("single subject with an event jumps to one") {
    const std::vector<double> t{5};
    const std::vector<int> d{1};
    const auto c = kaplan_meier_failure(t, d, {})[0].curve;
    CHECK(c.at(4.999) == 0.0);
    CHECK(c.at(5) == 1.0);
    CHECK(c.at(0) == 0.0);
  }

  TEST_CASE("events precede censorings at tied times") {
    const std::vector<double> t{2, 2, 3};
    const std::vector<int> d{1, 0, 1};
    const auto c = kaplan_meier_failure(t, d, {})[0].curve;
    CHECK(c.at(2) == doctest::Approx(1.0 / 3.0));
    CHECK(c.n_at_risk[1] == 3);
    CHECK(c.at(3) == doctest::Approx(1.0));
  }

  TEST_CASE("groups are estimated separately and empty groups are errors") {
    const std::vector<double> t{1, 2, 3, 4};
    const std::vector<int> d{1, 1, 0, 1};
    const std::vector<double> g{0, 1, 0, 1};
    const auto c = kaplan_meier_failure(t, d, g);
    REQUIRE(c.size() == 2);
    CHECK(c[0].group == 0);
    CHECK(c[0].curve.at(5) == doctest::Approx(0.5));
    CHECK(c[1].curve.at(5) == doctest::Approx(1.0));
    const std::vector<double> expected{0, 1, 2};
    CHECK_THROWS_AS(kaplan_meier_failure(t, d, g, expected), ValidationError);
    CHECK_THROWS_AS(aalen_johansen_cif(t, d, g, expected), ValidationError);
  }

  TEST_CASE("Aalen-Johansen with one cause equals Kaplan-Meier") {
    const auto f = testing::simulate_constant_hazards(300, 0.03, 0.0, 80, 60, 5);
    std::vector<int> d;
    for (double e : f.numeric("eventType")) d.push_back(e != 0);
    const auto km = kaplan_meier_failure(f.numeric("dtime"), d, {})[0].curve;
    const auto aj = aalen_johansen_cif(f.numeric("dtime"), d, {});
    REQUIRE(aj.cif.size() == 1);
    for (double t = 0; t <= 60; t += 0.25) CHECK(std::abs(aj.cif[0].curve.at(t) - km.at(t)) <= 1e-12);
  }

  TEST_CASE("cause curves and survival sum to one at every jump") {
    const auto f = testing::simulate_constant_hazards(500, 0.02, 0.03, 90, 60, 9);
    std::vector<int> c;
    for (double e : f.numeric("eventType")) c.push_back(static_cast<int>(e));
    const auto aj = aalen_johansen_cif(f.numeric("dtime"), c, {});
    REQUIRE(aj.cif.size() == 2);
    const auto& S = aj.survival[0].curve;
    for (double t : S.times) {
      const double total = aj.cif[0].curve.at(t) + aj.cif[1].curve.at(t) + S.at(t);
      CHECK(std::abs(total - 1.0) < 1e-12);
    }
    for (const auto& gc : aj.cif)
      CHECK(std::is_sorted(gc.curve.values.begin(), gc.curve.values.end()));
  }

  TEST_CASE("estimators do not depend on row order") {
    const auto f = testing::simulate_constant_hazards(200, 0.02, 0.03, 90, 60, 12);
    std::vector<std::size_t> perm(f.n_rows());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), std::mt19937(1));
    const auto g = f.select_rows(perm);
    const auto a = aalen_johansen_cif(f, 60, "grp");
    const auto b = aalen_johansen_cif(g, 60, "grp");
    for (std::size_t k = 0; k < 2; ++k) CHECK(a.cif[k].curve.values == b.cif[k].curve.values);
    CHECK(kaplan_meier_failure(f, 60, "grp")[0].curve.values ==
          kaplan_meier_failure(g, 60, "grp")[0].curve.values);
  }

  TEST_CASE("closed-form incidence under constant hazards") {
    const double lc = 0.02, lo = 0.03;
    const auto f = testing::simulate_constant_hazards(6000, lc, lo, 200, 60, 21);
    const auto aj = aalen_johansen_cif(f, 60, "grp");
    for (double t : {10.0, 30.0, 60.0}) {
      const double truth = lc / (lc + lo) * (1 - std::exp(-(lc + lo) * t));
      CHECK(std::abs(aj.cif[0].curve.at(t) - truth) < 0.02);
    }
  }

  TEST_CASE("administrative censoring through the frame helper") {
    const auto f = SurvivalFrame{}
                       .with_numeric("dtime", {10, 70})
                       .with_numeric("eventType", {1, 1})
                       .with_numeric("g", {0, 0});
    const auto c = kaplan_meier_failure(f, 60, "g")[0].curve;
    CHECK(c.at(100) == doctest::Approx(0.5));
  }

  TEST_CASE("Greenwood variance") {
    const std::vector<double> t{1, 2, 3, 4};
    const std::vector<int> d{1, 0, 1, 0};
    const auto c = kaplan_meier_failure(t, d, {})[0].curve;
    // S(1) = 3/4, var = S^2 * 1/(4*3)
    CHECK(c.variance[1] == doctest::Approx(0.5625 / 12));
  }

  TEST_CASE("curve export") {
    const std::vector<double> t{1, 2};
    const std::vector<int> d{1, 0};
    const auto c = kaplan_meier_failure(t, d, {});
    std::ostringstream os;
    write_curves_csv(c, os);
    CHECK(os.str() == "time,estimate,n_at_risk,group,cause\n0,0,2,0,0\n1,0.5,2,0,0\n");
  }
}
