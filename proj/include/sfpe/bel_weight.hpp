#pragma once

#include <vector>

#include "sfpe/coefficients.hpp"
#include "sfpe/linalg.hpp"
#include "sfpe/sde_engine.hpp"

namespace sfpe {

/// Weight vector Z at time s > t: z[0] = 1, z[1..d] = Y_s / (s - t).
struct ZSample {
    double s = 0.0;
    Vec z;
};

/// Solves sigma y = rhs with a pivoted factorization (never forming an
/// inverse). Diagonal sigma is solved directly.
///
/// Throws IllConditionedSigma when |sigma y - rhs| > 1e-8 |rhs| or the
/// result is not finite.
void solve_sigma(const Mat& sigma, const Vec& rhs, Vec& y, bool diagonal_hint = false);

/// Fills path.Y with the left-point Ito sum
///   Y[k+1] = Y[k] + sigma(t_k, X_k)^{-1} (J_k dW_k),  Y[0] = 0.
/// Diverged paths are filled up to their divergence node.
void accumulate_Y(PathBundle& path, const CoefficientSet& coeffs);

/// Z at grid node k (> 0) of a path started at grid.t0().
ZSample z_at_node(const PathBundle& path, std::size_t k);

/// Z at time s, which must be a grid node strictly after t.
ZSample z_at(const PathBundle& path, double t, double s);

struct ZMomentRow {
    double s = 0.0;
    double emp_y2 = 0.0;
    double se_y2 = 0.0;
    double bound_iii = 0.0;
    double emp_z2 = 0.0;  ///< E |z[1..d]|^2
    double se_z2 = 0.0;
    double bound_iv = 0.0;
    bool pass = false;
};

struct ZMomentReport {
    std::size_t n_paths = 0;
    std::size_t diverged = 0;
    std::vector<ZMomentRow> rows;  ///< one per node strictly after t

    bool all_pass() const;
};

/// (d / (alpha (s-t)^2)) * int_t^s exp(2 (r - t) c) dr.
double z_second_moment_bound(int d, double alpha, double c, double gap);

/// Per-node E|Y_s|^2 against (d T / alpha) exp(2 c T) and E|z[1..d]|^2
/// against the bound above, each with 3-SE slack.
ZMomentReport z_moment_report(const NodeMomentAccumulator& moments, const CoefficientSet& coeffs,
                              const TimeGrid& grid);

/// Convenience overload over in-memory paths with Y filled (at least 1000 paths).
ZMomentReport z_moment_report(const std::vector<PathBundle>& paths, const CoefficientSet& coeffs,
                              double t);

}  // namespace sfpe
