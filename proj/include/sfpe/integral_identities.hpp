#pragma once

namespace sfpe {

/// Query for the singular exponential integral
///   I(a, b, lambda) = int_a^b exp(-lambda x) / sqrt((b - x)(x - a)) dx.
struct SingularIntegralQuery {
    double a = 0.0;
    double b = 1.0;
    double lambda = 0.0;

    /// Throws InvalidArgument unless b > a, lambda >= 0 and all fields are finite.
    void validate() const;
};

/// int_0^pi exp(c cos(theta)) d theta  (= pi * I_0(c)), for finite c >= 0.
///
/// Uses the I_0 power series for c <= 30 and a 256-node Gauss-Legendre rule
/// above that.
double theta_integral(double c);

/// exp(-c) * theta_integral(c), finite for every c >= 0.
double theta_integral_scaled(double c);

/// Exact value of the singular integral through the angle substitution:
///   exp(-lambda (a + b) / 2) * theta_integral(lambda (b - a) / 2).
double singular_exp_integral(const SingularIntegralQuery& q);

/// Closed-form upper bound sqrt(pi^3 / (4 lambda (b - a))) * exp(-lambda a); requires lambda > 0.
double singular_exp_integral_bound(const SingularIntegralQuery& q);

/// Upper bound sqrt(pi^3 / (8 c)) * exp(c) on theta_integral(c), for c > 0.
double theta_integral_bound(double c);

/// Independent reference for the singular integral: adaptive Gauss-Kronrod on
/// the original integrand after x = a + (b - a) sin^2(phi / 2), which removes
/// both endpoint singularities.
double singular_exp_integral_oracle(const SingularIntegralQuery& q, double rel_tol = 1e-13);

}  // namespace sfpe
