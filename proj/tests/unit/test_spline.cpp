#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "crstd/error.hpp"
#include "crstd/spline.hpp"

using namespace crstd;

namespace {

std::vector<double> sample_points(std::size_t n, double lo, double hi, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> x(n);
  for (auto& v : x) v = u(rng);
  return x;
}

}  // namespace

TEST_SUITE("spline") {
  TEST_CASE("knot vector invariants") {
    CHECK_THROWS_AS(KnotVector({1.0}), ValidationError);
    CHECK_THROWS_AS(KnotVector({1.0, 1.0}), ValidationError);
    CHECK_THROWS_AS(KnotVector({2.0, 1.0}), ValidationError);
    CHECK_NOTHROW(KnotVector({0.0, 1.0, 2.0}));
  }

  TEST_CASE("lambda reproduces the direct formula") {
    SplineBasis b(KnotVector({0.0, 1.0, 2.0}));
    CHECK(b.lambda(1) == doctest::Approx(0.5).epsilon(1e-15));
    SplineBasis c(KnotVector({0.0, 1.0, 3.0, 4.0}));
    CHECK(c.lambda(1) == doctest::Approx(0.75));
    CHECK(c.lambda(2) == doctest::Approx(0.25));
  }

  TEST_CASE("centile rule") {
    const std::vector<double> s{1, 2, 3, 4};
    // rank (n+1)p/100 = 2.5 at the median
    CHECK(centile(s, 50) == doctest::Approx(2.5));
    CHECK(centile(s, 25) == doctest::Approx(1.25));
    CHECK(centile(s, 0) == 1);
    CHECK(centile(s, 100) == 4);
  }

  TEST_CASE("centile knots on log event times") {
    const std::vector<double> t{1, 2, 4, 8, 16, 32, 64};
    const std::vector<bool> mask_v{true, false, true, true, true, false, true};
    bool mask[7];
    for (int i = 0; i < 7; ++i) mask[i] = mask_v[static_cast<std::size_t>(i)];
    const auto k1 = centile_knots(t, 1, mask);
    REQUIRE(k1.size() == 2);
    CHECK(k1.front() == doctest::Approx(0.0));
    CHECK(k1.back() == doctest::Approx(std::log(64.0)));
    const auto k2 = centile_knots(t, 2, mask);
    REQUIRE(k2.size() == 3);
    // selected log times: ln1, ln4, ln8, ln16, ln64; median = ln 8
    CHECK(k2[1] == doctest::Approx(std::log(8.0)));
    CHECK_THROWS_AS(centile_knots(std::vector<double>{1, 1, 2}, 3), ValidationError);
  }

  TEST_CASE("raw basis below the first knot is linear") {
    SplineBasis b(KnotVector({0.0, 1.0, 2.0, 3.0}));
    const std::vector<double> x{-2.0, -0.5};
    const auto B = b.eval(x);
    for (Eigen::Index i = 0; i < 2; ++i) {
      CHECK(B(i, 0) == x[static_cast<std::size_t>(i)]);
      CHECK(B(i, 1) == 0.0);
      CHECK(B(i, 2) == 0.0);
    }
  }

  TEST_CASE("derivatives match central differences") {
    const KnotVector k({-1.0, 0.3, 1.1, 2.5});
    const auto x = sample_points(50, -3.0, 5.0, 1);
    for (bool ortho : {false, true}) {
      const SplineBasis b = ortho ? SplineBasis::orthogonalized_on(k, x) : SplineBasis(k);
      const double h = 1e-5;
      std::vector<double> xp(x), xm(x);
      for (std::size_t i = 0; i < x.size(); ++i) {
        xp[i] += h;
        xm[i] -= h;
      }
      const Eigen::MatrixXd fd = (b.eval(xp) - b.eval(xm)) / (2 * h);
      const Eigen::MatrixXd d = b.deriv(x);
      CHECK((fd - d).cwiseAbs().maxCoeff() < 1e-6);
    }
  }

  TEST_CASE("basis is linear outside the boundary knots") {
    const SplineBasis b(KnotVector({0.0, 0.4, 0.9, 2.0}));
    for (double x0 : {-4.0, -1.0, 2.5, 7.0}) {
      const double h = 0.1;
      const std::vector<double> pts{x0 - h, x0, x0 + h};
      const auto B = b.eval(pts);
      for (Eigen::Index j = 0; j < B.cols(); ++j)
        CHECK(std::abs(B(0, j) - 2 * B(1, j) + B(2, j)) < 1e-8);
    }
  }

  TEST_CASE("orthogonalised columns are centred, unit-variance and orthogonal") {
    const KnotVector k({0.0, 1.0, 2.0, 3.0});
    const auto x = sample_points(200, -0.5, 3.5, 2);
    const SplineBasis b = SplineBasis::orthogonalized_on(k, x);
    const Eigen::MatrixXd O = b.eval(x);
    const double n = static_cast<double>(x.size());
    for (Eigen::Index j = 0; j < O.cols(); ++j) {
      CHECK(std::abs(O.col(j).mean()) < 1e-10);
      CHECK(O.col(j).squaredNorm() / (n - 1) == doctest::Approx(1.0).epsilon(1e-10));
      for (Eigen::Index l = 0; l < j; ++l) CHECK(std::abs(O.col(j).dot(O.col(l))) < 1e-8);
    }
    // [raw, 1] = [ortho, 1] R
    Eigen::MatrixXd raw1(O.rows(), O.cols() + 1), orth1(O.rows(), O.cols() + 1);
    raw1 << b.eval_raw(x), Eigen::VectorXd::Ones(O.rows());
    orth1 << O, Eigen::VectorXd::Ones(O.rows());
    CHECK((orth1 * *b.R() - raw1).cwiseAbs().maxCoeff() < 1e-10);
  }

  TEST_CASE("orthonormal centred input is a fixed point") {
    Eigen::MatrixXd raw(4, 2);
    raw << 1, 1, -1, 1, 1, -1, -1, -1;
    raw *= std::sqrt(3.0 / 4.0);  // unit (n-1) variance
    const auto o = orthogonalize(raw);
    CHECK((o.ortho - raw).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((o.R.topLeftCorner(2, 2) - Eigen::Matrix2d::Identity()).cwiseAbs().maxCoeff() < 1e-12);
  }

  TEST_CASE("rank deficiency is reported") {
    Eigen::MatrixXd raw(5, 2);
    raw.col(0) << 1, 2, 3, 4, 5;
    raw.col(1) = 2 * raw.col(0);
    CHECK_THROWS_AS(orthogonalize(raw), NumericalError);
  }

  TEST_CASE("scalar evaluation with the stored R reproduces construction rows") {
    std::vector<double> ages;
    for (int a = 48; a <= 89; ++a) ages.push_back(a);
    ages.push_back(65);
    const auto knots = centile_knots(ages, 3, {}, false);
    const SplineBasis b = SplineBasis::orthogonalized_on(knots, ages);
    const Eigen::MatrixXd B = b.eval(ages);
    const SplineBasis reloaded(knots, *b.R());
    double c[3];
    reloaded.eval_point(65.0, c);
    for (int j = 0; j < 3; ++j) CHECK(c[j] == doctest::Approx(B(17, j)).epsilon(1e-14));
  }
}
