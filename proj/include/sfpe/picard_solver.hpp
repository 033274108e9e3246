#pragma once

#include <memory>
#include <optional>
#include <stdexcept>
#include <vector>

#include "sfpe/problem.hpp"
#include "sfpe/time_grid.hpp"
#include "sfpe/value_function.hpp"

namespace sfpe {

/// Simulation nodes on [t, T] with weights for int_t^T h(r) dr. The weight at
/// r = t is always zero (the weight process is undefined there) and the
/// weights sum to T - t.
struct SingularQuadrature {
    std::shared_ptr<const TimeGrid> grid;
    std::vector<double> weights;
};

SingularQuadrature singular_quadrature(double t, double T, std::size_t n_steps, SingularRule rule);

/// Result of one Monte-Carlo application of the fixed-point map.
struct PhiEstimate {
    ValueGrid value;
    ValueGrid std_error;  ///< per-node standard error of each component
    std::size_t diverged = 0;
};

/// Phi(vf)(t, x) = E[ g(X_T) Z_T + int_t^T f(r, X_r, vf(r, X_r)) Z_r dr ] at every
/// grid node, with vf read at min(r, t_max) in the terminal window.
///
/// Paths for node (ti, si) use stream ti * n_space + si under mc.base_seed, so
/// repeated sweeps share their random numbers.
/// Throws FailedSweep when more than 0.1% of a node's paths diverge or an
/// estimate is not finite.
PhiEstimate apply_phi(const ValueGrid& vf, const Problem& problem, const McConfig& mc);

/// Phi applied to two inputs on the same paths.
struct PairedPhi {
    PhiEstimate first;
    PhiEstimate second;
    ValueGrid diff_std_error;  ///< standard error of Phi(w1) - Phi(w2) per node
};

PairedPhi apply_phi_paired(const ValueGrid& w1, const ValueGrid& w2, const Problem& problem,
                           const McConfig& mc);

/// Plain weight-one Feynman-Kac estimate of the value slot from the same paths
/// as apply_phi (single-component grid).
ValueGrid feynman_kac_estimate(const ValueGrid& vf, const Problem& problem, const McConfig& mc);

/// c_V^2 L^2 pi^3. Throws InvalidArgument unless both inputs are > 0.
double lambda_star(double c_V, double L);

/// Contraction factor c L sqrt(pi^3 / (4 lambda)); requires lambda > 0.
double contraction_factor(double c_V, double L, double lambda);

struct ContractionProbeResult {
    double ratio = 0.0;        ///< |Phi w1 - Phi w2|_lambda / |w1 - w2|_lambda
    double noise = 0.0;        ///< |SE(Phi w1 - Phi w2)|_lambda / |w1 - w2|_lambda
    double numerator = 0.0;
    double denominator = 0.0;
};

/// Throws InvalidArgument when |w1 - w2|_lambda == 0.
ContractionProbeResult contraction_probe(const Problem& problem, const ValueGrid& w1,
                                         const ValueGrid& w2, double lambda, const McConfig& mc);

/// c_V from the Lyapunov probe: 1.25 x the largest upper confidence limit over
/// the box center and mid-points toward each face, at s - t in {T/8, T/4, T/2, T}.
double estimate_c_V(const Problem& problem, const McConfig& mc);

struct SweepRecord {
    std::size_t iteration = 0;     ///< k, producing v_k from v_{k-1}
    double distance = 0.0;         ///< |v_k - v_{k-1}|_lambda
    double ratio = 0.0;            ///< distance / previous distance (0 for k = 1)
    double noise_floor = 0.0;      ///< 3 |SE(v_k)|_lambda
    double max_std_error = 0.0;    ///< largest per-node standard error
    std::size_t diverged = 0;
    double wall_seconds = 0.0;
};

struct SolveDiagnostics {
    double lambda = 0.0;
    double c_V = 0.0;
    double tol = 0.0;
    bool converged = false;
    std::vector<SweepRecord> sweeps;
};

struct SolveResult {
    ValueGrid v;
    ValueGrid std_error;
    SolveDiagnostics diagnostics;
};

/// Raised when the distance ratio exceeds 1 for three consecutive sweeps whose
/// distances sit above the noise floor.
class DivergingIteration : public std::runtime_error {
public:
    DivergingIteration(const std::string& what, SolveDiagnostics diagnostics)
        : std::runtime_error(what), diagnostics_(std::move(diagnostics)) {}

    const SolveDiagnostics& diagnostics() const noexcept { return diagnostics_; }

private:
    SolveDiagnostics diagnostics_;
};

/// Picard iteration v_{k+1} = Phi(v_k) from v_0 = 0 until
/// |v_{k+1} - v_k|_lambda <= tol or max_iters sweeps. lambda defaults to
/// lambda_star(c_V, L) (0 when L == 0); c_V defaults to problem.c_V or the probe.
SolveResult solve(const Problem& problem, const McConfig& mc, double tol, std::size_t max_iters,
                  std::optional<double> lambda = std::nullopt);

struct IntegrabilityReport {
    double sup_terminal_ratio = 0.0;      ///< sup |g(x)| / V(T, x)
    double sup_nonlinearity_ratio = 0.0;  ///< sup |f(t, x, 0)| sqrt(T - t) / V(t, x)
    std::size_t n_samples = 0;
    bool finite = true;
};

/// Sampled sups of the growth ratios that make Phi well defined.
IntegrabilityReport integrability_guard(const Problem& problem,
                                        const std::vector<std::pair<double, Vec>>& samples);

/// Largest |f(t,x,v) - f(t,x,w)| / |v - w| over n random triples drawn in the
/// grid box with |v|, |w| <= scale.
double sampled_lipschitz_constant(const Problem& problem, std::size_t n, std::uint64_t seed,
                                  double scale = 5.0);

}  // namespace sfpe
