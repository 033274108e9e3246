#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "sfpe/box.hpp"
#include "sfpe/coefficients.hpp"
#include "sfpe/linalg.hpp"
#include "sfpe/parallel.hpp"
#include "sfpe/rng.hpp"
#include "sfpe/stats.hpp"
#include "sfpe/time_grid.hpp"

namespace sfpe {

/// One simulated trajectory of the state X, its Jacobian J = dX/dx, the
/// Brownian increments and the running weight integral Y.
///
/// Storage is flat: X and Y hold n_nodes * d values, J holds n_nodes * d * d
/// (column-major per node), dW holds n_steps * d.
struct PathBundle {
    std::shared_ptr<const TimeGrid> grid;
    int dim = 0;
    std::vector<double> X;
    std::vector<double> J;
    std::vector<double> dW;
    std::vector<double> Y;
    bool y_filled = false;
    SeedTag seed_tag;
    /// Node index at which the path left the domain or became non-finite.
    std::optional<std::size_t> diverged_at;

    std::size_t n_nodes() const { return grid ? grid->n_nodes() : 0; }
    bool diverged() const { return diverged_at.has_value(); }

    ConstVecMap x(std::size_t k) const { return {X.data() + k * dim, dim}; }
    ConstMatMap j(std::size_t k) const { return {J.data() + k * dim * dim, dim, dim}; }
    ConstVecMap dw(std::size_t k) const { return {dW.data() + k * dim, dim}; }
    ConstVecMap y(std::size_t k) const { return {Y.data() + k * dim, dim}; }

    VecMap x(std::size_t k) { return {X.data() + k * dim, dim}; }
    MatMap j(std::size_t k) { return {J.data() + k * dim * dim, dim, dim}; }
    VecMap dw(std::size_t k) { return {dW.data() + k * dim, dim}; }
    VecMap y(std::size_t k) { return {Y.data() + k * dim, dim}; }

    /// Sizes the buffers for `g` and dimension d, reusing capacity.
    void reset(std::shared_ptr<const TimeGrid> g, int d);
};

struct SimulationOptions {
    /// Replace mu by mu / (1 + h |mu|) in the state and variational updates.
    bool tamed = false;
    /// Paths leaving this box are flagged like divergence (not stopped at the face).
    std::optional<Box> domain;
};

/// Random stream for a family of paths: all paths share base_seed and stream
/// and are distinguished by their index.
struct RngSpec {
    std::uint64_t base_seed = 0;
    std::uint64_t stream = 0;
};

/// Euler-Maruyama for X jointly with the variational equation for J, started
/// at (grid.t0(), x0). A pure function of (coeffs, grid, seed tag, options).
void simulate_path(const CoefficientSet& coeffs, const Vec& x0,
                   const std::shared_ptr<const TimeGrid>& grid, const SeedTag& tag,
                   const SimulationOptions& options, PathBundle& out);

/// n_paths independent paths from (t, x0); grid must start at t.
std::vector<PathBundle> simulate_paths(const CoefficientSet& coeffs, double t, const Vec& x0,
                                       const std::shared_ptr<const TimeGrid>& grid,
                                       std::size_t n_paths, const RngSpec& rng,
                                       const SimulationOptions& options = {},
                                       unsigned threads = 1);

/// Simulates n_paths paths and folds them into an accumulator.
///
/// Paths are processed in fixed blocks; each block folds into its own copy of
/// `init` and the blocks are merged in index order, so the result does not
/// depend on the worker count. `fold(acc, path)` may mutate the path (e.g. to
/// fill Y); `acc.merge(other)` must be associative.
template <class Acc, class Fold>
Acc reduce_paths(const CoefficientSet& coeffs, const Vec& x0,
                 const std::shared_ptr<const TimeGrid>& grid, std::size_t n_paths,
                 const RngSpec& rng, const SimulationOptions& options, unsigned threads,
                 const Acc& init, Fold fold) {
    constexpr std::size_t kBlock = 512;
    const std::size_t n_blocks = (n_paths + kBlock - 1) / kBlock;
    std::vector<Acc> partial(n_blocks, init);
    parallel_for(n_blocks, threads, [&](std::size_t b) {
        PathBundle path;
        const std::size_t end = std::min(n_paths, (b + 1) * kBlock);
        for (std::size_t p = b * kBlock; p < end; ++p) {
            simulate_path(coeffs, x0, grid, SeedTag{rng.base_seed, rng.stream, p}, options, path);
            fold(partial[b], path);
        }
    });
    Acc total = init;
    for (const auto& part : partial) {
        total.merge(part);
    }
    return total;
}

/// Per-node second moments of X, J, Y and the spatial part of Z.
struct NodeMomentAccumulator {
    std::vector<RunningMoments> x2;
    std::vector<RunningMoments> j2;
    std::vector<RunningMoments> y2;
    std::vector<RunningMoments> z2;
    std::size_t diverged = 0;

    explicit NodeMomentAccumulator(std::size_t n_nodes = 0)
        : x2(n_nodes), j2(n_nodes), y2(n_nodes), z2(n_nodes) {}

    /// Adds |X|^2 and |J|_F^2 and, when the path carries Y, |Y|^2 and |Y/(s-t)|^2.
    void add(const PathBundle& path);
    void merge(const NodeMomentAccumulator& other);
};

struct MomentBoundRow {
    double s = 0.0;
    double emp_x2 = 0.0;
    double se_x2 = 0.0;
    double bound_i = 0.0;
    double emp_j2 = 0.0;
    double se_j2 = 0.0;
    double bound_ii = 0.0;
    bool pass = false;
};

struct MomentBoundReport {
    double m = 0.0;  ///< max_s [ 0.5 |mu(s,0)|^2 + |sigma(s,0)|_F^2 ] over the grid
    std::size_t n_paths = 0;
    std::size_t diverged = 0;
    std::vector<MomentBoundRow> rows;

    bool all_pass() const;
};

/// max_s [ 0.5 |mu(s,0)|^2 + |sigma(s,0)|_F^2 ], sampled on the grid nodes.
double growth_constant_m(const CoefficientSet& coeffs, const TimeGrid& grid);

/// Empirical E|X_s|^2 and E|J_s|_F^2 per node against
///   exp((2c+1)T)(|x|^2 + m/(2c+1))   and   d exp(2c(T-t)),
/// passing when (empirical - 3 SE) does not exceed the bound.
MomentBoundReport moment_bound_report_X_J(const NodeMomentAccumulator& moments,
                                          const CoefficientSet& coeffs, const TimeGrid& grid,
                                          const Vec& x0);

/// Convenience overload over an in-memory collection (at least 1000 paths).
MomentBoundReport moment_bound_report_X_J(const std::vector<PathBundle>& paths,
                                          const CoefficientSet& coeffs);

}  // namespace sfpe
