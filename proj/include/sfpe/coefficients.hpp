#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "sfpe/linalg.hpp"

namespace sfpe {

/// Drift mu(t, x), diffusion sigma(t, x) and their spatial derivatives, together
/// with the ellipticity constant alpha and the one-sided Lipschitz constant c.
///
/// Implementations must be reentrant: the engine calls them concurrently.
class CoefficientSet {
public:
    CoefficientSet(int dimension, double alpha, double c_mono);
    virtual ~CoefficientSet() = default;

    int dimension() const { return dim_; }
    double alpha() const { return alpha_; }
    double c_mono() const { return c_mono_; }

    virtual std::string name() const = 0;

    virtual void drift(double t, const Vec& x, Vec& out) const = 0;
    virtual void diffusion(double t, const Vec& x, Mat& out) const = 0;
    /// (d mu / d x)(t, x), entry (i, k) = d mu_i / d x_k.
    virtual void drift_jacobian(double t, const Vec& x, Mat& out) const = 0;
    /// (d sigma / d x_j)(t, x) for j in [0, d).
    virtual void diffusion_derivative(double t, const Vec& x, int j, Mat& out) const = 0;

    /// True when sigma does not depend on x; lets the engine skip the
    /// diffusion term of the variational equation.
    virtual bool diffusion_state_independent() const { return false; }
    /// True when sigma(t, x) is always diagonal.
    virtual bool diffusion_diagonal() const { return false; }
    /// True when sigma depends on neither t nor x (evaluated once per path).
    virtual bool diffusion_constant() const { return false; }
    /// True when d mu / d x depends on neither t nor x (affine drift).
    virtual bool drift_jacobian_constant() const { return false; }

private:
    int dim_;
    double alpha_;
    double c_mono_;
};

using CoefficientPtr = std::shared_ptr<const CoefficientSet>;

/// mu = 0, sigma = scale * I.
CoefficientPtr make_brownian(int d, double scale, double c_mono);

/// mu = -theta (x - mean), sigma = scale * I.
CoefficientPtr make_ornstein_uhlenbeck(int d, double theta, double mean, double scale,
                                       double c_mono);

/// mu = A x + b, sigma = S (constant). alpha is the smallest eigenvalue of S S^T.
CoefficientPtr make_linear(const Mat& A, const Vec& b, const Mat& S, double c_mono);

/// Componentwise polynomials: mu_i = sum_k drift[k] x_i^k,
/// sigma = diag(sum_k diffusion[k] x_i^k). Covers Black-Scholes-type and
/// cubic-drift models. alpha and c are supplied by the caller.
CoefficientPtr make_diagonal_polynomial(int d, std::vector<double> drift,
                                        std::vector<double> diffusion, double alpha,
                                        double c_mono);

/// One sampled tuple for the coefficient condition checks.
struct ConditionSample {
    double t = 0.0;
    Vec x;
    Vec y;
    Vec v;
};

struct CoefficientConditionReport {
    /// max <x-y, mu(x)-mu(y)> / |x-y|^2 over the cloud.
    double worst_monotonicity_ratio = 0.0;
    /// max 0.5 |sigma(x)-sigma(y)|_F^2 / |x-y|^2 over the cloud.
    double worst_frobenius_ratio = 0.0;
    /// min v^T sigma sigma^T v / |v|^2 over the sampled (x, v).
    double worst_ellipticity_ratio = 0.0;
    /// min over sampled x of the smallest eigenvalue of sigma sigma^T.
    double min_eigenvalue = 0.0;
    bool monotonicity_ok = false;
    bool ellipticity_ok = false;
    /// Index of the sample that attains the worst monotonicity/Frobenius ratio.
    std::optional<std::size_t> witness;

    bool ok() const { return monotonicity_ok && ellipticity_ok; }
};

/// Empirical check of the one-sided Lipschitz and ellipticity conditions.
CoefficientConditionReport check_coefficient_conditions(const CoefficientSet& coeffs,
                                                        const std::vector<ConditionSample>& cloud);

/// Largest deviation between the analytic derivatives and central differences
/// with step h over the given points (time t).
double derivative_consistency_error(const CoefficientSet& coeffs, double t,
                                    const std::vector<Vec>& points, double h);

}  // namespace sfpe
