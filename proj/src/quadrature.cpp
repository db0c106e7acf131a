#include "crstd/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>

#include "crstd/error.hpp"

namespace crstd {

namespace {

QuadratureRule compute_rule(int n) {
  QuadratureRule r;
  r.nodes.resize(static_cast<std::size_t>(n));
  r.weights.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0;
      double p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    const auto lo = static_cast<std::size_t>(i);
    const auto hi = static_cast<std::size_t>(n - 1 - i);
    r.nodes[lo] = -x;
    r.nodes[hi] = x;
    r.weights[lo] = w;
    r.weights[hi] = w;
  }
  if (n % 2 == 1) r.nodes[static_cast<std::size_t>(n / 2)] = 0.0;
  return r;
}

}  // namespace

QuadratureRule gauss_legendre_rule(int n) {
  if (n < 2 || n > 1000) throw ValidationError("quadrature nodes must be between 2 and 1000");
  static std::mutex mutex;
  static std::map<int, QuadratureRule> cache;
  std::lock_guard lock(mutex);
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, compute_rule(n)).first;
  return it->second;
}

double gauss_legendre(const std::function<double(double)>& f, double a, double b, int n) {
  if (!(b >= a)) throw ValidationError("quadrature upper limit below lower limit");
  const auto rule = gauss_legendre_rule(n);
  const double half = 0.5 * (b - a);
  const double mid = 0.5 * (a + b);
  double s = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i)
    s += rule.weights[i] * f(mid + half * rule.nodes[i]);
  return half * s;
}

QuadratureRule time_rule(double t, int n) {
  if (!(t > 0)) throw ValidationError("time rule needs t > 0");
  auto rule = gauss_legendre_rule(n);
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
    const double v = 0.5 * (rule.nodes[i] + 1.0);
    rule.nodes[i] = t * v * v * v;
    rule.weights[i] *= 0.5 * 3.0 * t * v * v;
  }
  return rule;
}

QuadratureRule panel_rule(double t, std::span<const double> breaks, int n) {
  if (!(t > 0)) throw ValidationError("panel rule needs t > 0");
  std::vector<double> cuts;
  for (double b : breaks)
    if (b > 0 && b < t) cuts.push_back(b);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  cuts.push_back(t);
  QuadratureRule out = time_rule(cuts.front(), n);
  const auto& gl = gauss_legendre_rule(n);
  for (std::size_t k = 1; k < cuts.size(); ++k) {
    const double a = cuts[k - 1], half = 0.5 * (cuts[k] - a);
    for (std::size_t i = 0; i < gl.nodes.size(); ++i) {
      out.nodes.push_back(a + half * (gl.nodes[i] + 1.0));
      out.weights.push_back(half * gl.weights[i]);
    }
  }
  return out;
}

}  // namespace crstd
