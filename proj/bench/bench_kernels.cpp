#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "crstd/kernels.hpp"
#include "crstd/quadrature.hpp"

using namespace crstd;
using namespace crstd::kernels;

namespace {

struct Setup {
  std::vector<RowTerms> rows;
  std::vector<TimeTerms> at;
  QuadratureRule rule;
  Eigen::VectorXd eta, deta, log_t;
  Eigen::VectorXi d;
};

Setup make(Eigen::Index n) {
  std::mt19937 rng(1);
  std::normal_distribution<double> z(0.0, 0.3);
  Setup s;
  s.rule = time_rule(60.0, 50);
  const auto q = static_cast<Eigen::Index>(s.rule.nodes.size());
  for (int m = 0; m < 2; ++m) {
    RowTerms r;
    r.lin = Eigen::VectorXd::NullaryExpr(n, [&] { return z(rng) - 3.0; });
    r.tvc_x = Eigen::MatrixXd::NullaryExpr(n, m == 0 ? 1 : 0, [&] { return z(rng) > 0 ? 1.0 : 0.0; });
    TimeTerms t;
    t.g.resize(q);
    t.dg = Eigen::VectorXd::Constant(q, 1.1);
    for (Eigen::Index k = 0; k < q; ++k) t.g[k] = 1.1 * std::log(s.rule.nodes[static_cast<std::size_t>(k)]);
    t.gt = Eigen::MatrixXd::Constant(q, r.tvc_x.cols(), 0.05);
    t.dgt = Eigen::MatrixXd::Constant(q, r.tvc_x.cols(), 0.01);
    s.rows.push_back(r);
    s.at.push_back(t);
  }
  s.eta = Eigen::VectorXd::NullaryExpr(n, [&] { return z(rng); });
  s.deta = Eigen::VectorXd::NullaryExpr(n, [&] { return 1.0 + 0.1 * z(rng); });
  s.log_t = Eigen::VectorXd::NullaryExpr(n, [&] { return z(rng); });
  s.d = Eigen::VectorXi::NullaryExpr(n, [&] { return z(rng) > 0 ? 1 : 0; });
  return s;
}

void BM_Incidence(benchmark::State& state) {
  const auto s = make(state.range(0));
  std::vector<double> out(2);
  for (auto _ : state) {
    mean_incidence(s.rows, s.at, s.rule.nodes, s.rule.weights, out);
    benchmark::DoNotOptimize(out.data());
  }
}

void BM_IncidenceSerial(benchmark::State& state) {
  const auto s = make(state.range(0));
  std::vector<double> out(2);
  for (auto _ : state) {
    mean_incidence_serial(s.rows, s.at, s.rule.nodes, s.rule.weights, out);
    benchmark::DoNotOptimize(out.data());
  }
}

void BM_Likelihood(benchmark::State& state) {
  const auto s = make(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(likelihood_rows(s.eta, s.deta, s.log_t, s.d));
}

void BM_LikelihoodSerial(benchmark::State& state) {
  const auto s = make(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(likelihood_rows_serial(s.eta, s.deta, s.log_t, s.d));
}

}  // namespace

BENCHMARK(BM_Incidence)->Arg(252)->Arg(5000)->Arg(50000);
BENCHMARK(BM_IncidenceSerial)->Arg(252)->Arg(5000)->Arg(50000);
BENCHMARK(BM_Likelihood)->Arg(252)->Arg(5000)->Arg(50000);
BENCHMARK(BM_LikelihoodSerial)->Arg(252)->Arg(5000)->Arg(50000);

BENCHMARK_MAIN();
