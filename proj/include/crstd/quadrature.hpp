#pragma once

#include <functional>
#include <span>
#include <vector>

namespace crstd {

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

// Gauss-Legendre rule on [-1, 1].
QuadratureRule gauss_legendre_rule(int n);

// Integral of f over [a, b] with an n-point Gauss-Legendre rule.
double gauss_legendre(const std::function<double(double)>& f, double a, double b, int n);

// Rule for integrals over [0, t] of integrands that behave like a power of u
// near zero: u = t v^3 with v on [0, 1] and weights carrying 3 t v^2.
QuadratureRule time_rule(double t, int n);

// Composite rule over [0, t] split at the breakpoints inside (0, t): time_rule
// on the first panel, n-point Gauss-Legendre on each later panel.
QuadratureRule panel_rule(double t, std::span<const double> breaks, int n);

}  // namespace crstd
