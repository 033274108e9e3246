#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace sfpe {

/// Gauss-Legendre nodes and weights on [-1, 1].
struct GaussLegendreRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

/// Builds an n-point Gauss-Legendre rule by Newton iteration on P_n.
GaussLegendreRule gauss_legendre(std::size_t n);

/// Cached 256-point rule (built once, then read-only).
const GaussLegendreRule& gauss_legendre_256();

/// Globally adaptive 7/15-point Gauss-Kronrod integration of f over [a, b].
///
/// Bisects the interval with the largest error estimate until the summed
/// estimate is below max(abs_tol, rel_tol * |result|) or max_intervals is hit.
double adaptive_gauss_kronrod(const std::function<double(double)>& f, double a, double b,
                              double abs_tol, double rel_tol, std::size_t max_intervals = 2000);

}  // namespace sfpe
