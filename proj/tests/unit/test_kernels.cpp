#include <doctest.h>

#include <random>
#include <vector>

#include <omp.h>

#include "crstd/kernels.hpp"

using namespace crstd;
using namespace crstd::kernels;

namespace {

struct Problem {
  std::vector<RowTerms> rows;
  std::vector<TimeTerms> at;
  std::vector<double> u, w;
};

Problem make_problem(Eigen::Index n, Eigen::Index q, std::size_t models, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> z(0.0, 0.3);
  Problem p;
  for (std::size_t m = 0; m < models; ++m) {
    RowTerms r;
    r.lin = Eigen::VectorXd::NullaryExpr(n, [&] { return z(rng) - 3.0; });
    r.tvc_x = Eigen::MatrixXd::NullaryExpr(n, m == 0 ? 1 : 0, [&] { return z(rng) > 0 ? 1.0 : 0.0; });
    TimeTerms t;
    t.g = Eigen::VectorXd::LinSpaced(q, -1.0, 1.5);
    t.dg = Eigen::VectorXd::Constant(q, 1.1);
    t.gt = Eigen::MatrixXd::Constant(q, r.tvc_x.cols(), 0.05);
    t.dgt = Eigen::MatrixXd::Constant(q, r.tvc_x.cols(), 0.01);
    p.rows.push_back(r);
    p.at.push_back(t);
  }
  for (Eigen::Index k = 0; k < q; ++k) {
    p.u.push_back(0.5 + k);
    p.w.push_back(0.1);
  }
  return p;
}

}  // namespace

TEST_SUITE("kernels") {
  TEST_CASE("likelihood rows: parallel equals serial bitwise") {
    const Eigen::Index n = 5000;
    std::mt19937 rng(3);
    std::normal_distribution<double> z;
    Eigen::VectorXd eta = Eigen::VectorXd::NullaryExpr(n, [&] { return z(rng); });
    Eigen::VectorXd deta = Eigen::VectorXd::NullaryExpr(n, [&] { return 1.0 + 0.1 * z(rng); });
    Eigen::VectorXd lt = Eigen::VectorXd::NullaryExpr(n, [&] { return z(rng); });
    Eigen::VectorXi d = Eigen::VectorXi::NullaryExpr(n, [&] { return z(rng) > 0 ? 1 : 0; });
    for (int threads : {1, 2, 4}) {
      omp_set_num_threads(threads);
      const auto a = likelihood_rows(eta, deta, lt, d);
      const auto b = likelihood_rows_serial(eta, deta, lt, d);
      CHECK(a.contribution == b.contribution);
      CHECK(a.cumhaz == b.cumhaz);
      CHECK(a.inv_deta == b.inv_deta);
      CHECK(a.finite == b.finite);
      CHECK(ordered_sum(a.contribution) == ordered_sum(b.contribution));
    }
  }

  TEST_CASE("non-positive slope on an event row is flagged") {
    Eigen::VectorXd eta(2), deta(2), lt(2);
    Eigen::VectorXi d(2);
    eta << 0, 0;
    deta << -0.1, -0.1;
    lt << 0, 0;
    d << 0, 1;
    CHECK_FALSE(likelihood_rows(eta, deta, lt, d).finite);
    d << 0, 0;
    CHECK(likelihood_rows(eta, deta, lt, d).finite);
  }

  TEST_CASE("standardisation kernels: parallel equals serial bitwise") {
    for (std::size_t models : {1u, 2u}) {
      const auto p = make_problem(3000, 40, models, 5);
      for (int threads : {1, 3}) {
        omp_set_num_threads(threads);
        CHECK(mean_survival(p.rows, p.at, 7) == mean_survival_serial(p.rows, p.at, 7));
        std::vector<double> a(models), b(models);
        mean_incidence(p.rows, p.at, p.u, p.w, a);
        mean_incidence_serial(p.rows, p.at, p.u, p.w, b);
        CHECK(a == b);
      }
    }
    omp_set_num_threads(omp_get_num_procs());
  }

  TEST_CASE("model count limits") {
    const auto p = make_problem(10, 3, 1, 1);
    std::vector<RowTerms> none;
    std::vector<TimeTerms> none_t;
    CHECK_THROWS(mean_survival(none, none_t, 0));
    std::vector<double> out(2);
    CHECK_THROWS(mean_incidence(p.rows, p.at, p.u, p.w, out));
  }
}
