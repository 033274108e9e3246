#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sfpe/box.hpp"
#include "sfpe/coefficients.hpp"
#include "sfpe/linalg.hpp"
#include "sfpe/value_function.hpp"

namespace sfpe {

using TerminalFn = std::function<double(const Vec& x)>;
/// f(t, x, v) with v in R^{d+1} (value first, then the gradient slots).
using NonlinearityFn = std::function<double(double t, const Vec& x, std::span<const double> v)>;

/// A complete fixed-point instance: dynamics, data, Lipschitz constant, weight
/// function and the layout of the grid on which v is represented.
struct Problem {
    std::string name = "problem";
    CoefficientPtr coeffs;
    double T = 1.0;
    /// Space box and node counts of the value grid; reads outside are clamped.
    std::vector<SpaceAxis> axes;
    std::size_t n_time = 11;
    /// Excluded terminal window; 0 selects the default T / 50.
    double delta_T = 0.0;
    /// Optional state domain; paths leaving it are flagged like divergence.
    std::optional<Box> domain;
    TerminalFn g;
    NonlinearityFn f;
    /// Lipschitz constant of f in v. L == 0 declares f independent of v.
    double L = 0.0;
    LyapunovV V;
    /// Constant of the Lyapunov inequality; estimated by probing when absent.
    std::optional<double> c_V;

    int dimension() const { return coeffs ? coeffs->dimension() : 0; }
    double effective_delta_T() const { return delta_T > 0.0 ? delta_T : T / 50.0; }
    /// Zero grid with this problem's layout (d + 1 components).
    ValueGrid zero_grid() const;
    void validate() const;
};

/// Which quadrature handles the r -> t singularity of the time integral.
enum class SingularRule {
    /// r = t + u^2 (trapezoid in u) on the first 10% of [t, T], left rectangles after.
    SqrtSubstitution,
    /// Uniform right rectangles; never touches r = t.
    RightRectangle,
};

std::string to_string(SingularRule rule);
SingularRule parse_singular_rule(const std::string& tag);

/// Monte-Carlo parameters of one application of the fixed-point map.
struct McConfig {
    std::size_t n_paths = 1000;
    std::size_t n_steps = 50;
    std::uint64_t base_seed = 0;
    bool tamed = false;
    SingularRule rule = SingularRule::SqrtSubstitution;
    /// Subtract g(x) and f(r, x, v(r, x)) from the gradient-slot integrands.
    /// Unbiased because the spatial weight has mean zero; the value slot is untouched.
    bool control_variate = true;
    /// 0 resolves via SFPE_THREADS / hardware concurrency.
    unsigned threads = 0;

    void validate() const;
};

}  // namespace sfpe
