#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sfpe/box.hpp"
#include "sfpe/coefficients.hpp"
#include "sfpe/problem.hpp"
#include "sfpe/value_function.hpp"

namespace sfpe {

/// u and its derivatives at one point.
struct SolutionJet {
    double u = 0.0;
    double du_dt = 0.0;
    Vec grad;
    Mat hessian;
};

/// Analytic solution family u(t, x) with the derivatives needed to build a
/// manufactured nonlinearity. u, du_dt, grad and hessian are required; `jet`
/// optionally evaluates all of them at once, sharing transcendental calls.
struct SolutionSpec {
    std::string name;
    std::function<double(double, const Vec&)> u;
    std::function<double(double, const Vec&)> du_dt;
    std::function<Vec(double, const Vec&)> grad;
    std::function<Mat(double, const Vec&)> hessian;
    std::function<SolutionJet(double, const Vec&)> jet;

    SolutionJet evaluate(double t, const Vec& x) const;
};

/// u = sum_i q_i x_i^2 + k (T - t).
SolutionSpec quadratic_solution(std::vector<double> q, double k, double T);
/// u = A sin(omega . x) exp(-beta (T - t)).
SolutionSpec trig_solution(double amplitude, std::vector<double> omega, double beta, double T);
/// u = A exp(-|x - c|^2 / (2 w^2)) exp(-beta (T - t)).
SolutionSpec gaussian_bump_solution(double amplitude, std::vector<double> center, double width,
                                    double beta, double T);

/// Lipschitz coupling ell(y, z) used to inject v-dependence into f.
struct Coupling {
    std::string name = "zero";
    std::function<double(double y, std::span<const double> z)> ell;
    double lipschitz = 0.0;
};

Coupling zero_coupling();
/// ell(y, z) = a0 y + a . z, Lipschitz constant |(a0, a)|_2.
Coupling linear_coupling(double a0, std::vector<double> a);
/// ell(y, z) = a sin(y), Lipschitz constant |a|.
Coupling sine_coupling(double a);

struct ReferenceSolution {
    std::string provenance;  ///< "closed-form" or "manufactured"
    std::function<double(double, const Vec&)> u;
    std::function<Vec(double, const Vec&)> grad;

    /// (u, grad u) stacked into d + 1 components.
    Vec value(double t, const Vec& x) const;
};

/// Grid layout and weight shared by the problem built around a solution.
struct ProblemLayout {
    double T = 1.0;
    std::vector<SpaceAxis> axes;
    std::size_t n_time = 11;
    double delta_T = 0.0;
    LyapunovV V;
    std::optional<double> c_V;
};

struct ManufacturedProblem {
    Problem problem;
    ReferenceSolution reference;
};

/// f(t,x,v) = -[du/dt + grad u . mu + 0.5 tr(sigma sigma^T Hess u)](t,x)
///            - ell(u, grad u)(t,x) + ell(v_1, v_2..v_{d+1}),
/// g = u(T, .), L = Lip(ell). Throws InvalidArgument when a derivative is missing.
ManufacturedProblem manufactured_problem(const SolutionSpec& spec, CoefficientPtr coeffs,
                                         const Coupling& ell, const ProblemLayout& layout);

/// du/dt + grad u . mu + 0.5 tr(sigma sigma^T Hess u) + f(t, x, (u, grad u)),
/// evaluated from the spec's analytic derivatives.
double pde_residual(const Problem& problem, const SolutionSpec& spec, double t, const Vec& x);

/// Nodes compared: t <= T - t_cut and, when given, x inside `window`.
struct ComparisonRegion {
    double t_cut = 0.0;
    std::optional<Box> window;
};

struct ErrorReport {
    double sup_value = 0.0;
    double sup_grad = 0.0;  ///< sup of the Euclidean norm of the gradient error
    double rms_value = 0.0;
    double rms_grad = 0.0;
    double weighted = 0.0;  ///< weighted-norm error with lambda = 0
    std::size_t n_nodes = 0;
};

/// Throws InvalidArgument when the region holds no grid node.
ErrorReport compare_to_reference(const ValueGrid& vf, const ReferenceSolution& ref,
                                 const ComparisonRegion& region, const LyapunovV& V = {});

/// Grid holding ref.value at every node.
ValueGrid sample_reference(const ValueGrid& layout, const ReferenceSolution& ref);

/// Grid with i.i.d. uniform values in [-amplitude, amplitude], reproducible from (seed, stream).
ValueGrid random_grid(const ValueGrid& layout, std::uint64_t seed, std::uint64_t stream,
                      double amplitude);

struct Benchmark {
    std::string name;
    std::string description;
    Problem problem;
    ReferenceSolution reference;
    ComparisonRegion region;
};

/// heat_linear, heat_quadratic, ou_linear, sine_eigen, sine_coupled, bump_2d.
std::vector<Benchmark> benchmark_suite();
/// Throws InvalidArgument for unknown names.
Benchmark find_benchmark(const std::string& name);

}  // namespace sfpe
