#include "sfpe/integral_identities.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "sfpe/errors.hpp"
#include "sfpe/quadrature.hpp"

namespace sfpe {

namespace {

constexpr double kSeriesCutoff = 30.0;

void require_finite_nonnegative(double c, const char* who) {
    if (!std::isfinite(c) || c < 0.0) {
        throw InvalidArgument(std::string(who) + ": argument must be finite and >= 0");
    }
}

// exp(-c) * pi * sum_k (c/2)^{2k} / (k!)^2; all terms positive.
double scaled_series(double c) {
    const double q = 0.25 * c * c;
    double term = 1.0;
    double sum = 1.0;
    for (int k = 1; k < 500; ++k) {
        term *= q / (static_cast<double>(k) * static_cast<double>(k));
        sum += term;
        if (term < 1e-17 * sum) {
            break;
        }
    }
    return std::numbers::pi * sum * std::exp(-c);
}

// int_0^pi exp(c (cos(theta) - 1)) d theta by Gauss-Legendre on [0, pi].
double scaled_gauss_legendre(double c) {
    const auto& rule = gauss_legendre_256();
    const double half = 0.5 * std::numbers::pi;
    double sum = 0.0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
        const double theta = half * (rule.nodes[i] + 1.0);
        // cos(theta) - 1 = -2 sin^2(theta / 2) avoids cancellation near 0.
        const double s = std::sin(0.5 * theta);
        sum += rule.weights[i] * std::exp(-2.0 * c * s * s);
    }
    return half * sum;
}

}  // namespace

void SingularIntegralQuery::validate() const {
    if (!std::isfinite(a) || !std::isfinite(b) || !std::isfinite(lambda)) {
        throw InvalidArgument("SingularIntegralQuery: non-finite field");
    }
    if (!(b > a)) {
        throw InvalidArgument("SingularIntegralQuery: requires b > a");
    }
    if (lambda < 0.0) {
        throw InvalidArgument("SingularIntegralQuery: requires lambda >= 0");
    }
}

double theta_integral_scaled(double c) {
    require_finite_nonnegative(c, "theta_integral");
    if (c <= kSeriesCutoff) {
        return scaled_series(c);
    }
    return scaled_gauss_legendre(c);
}

double theta_integral(double c) {
    require_finite_nonnegative(c, "theta_integral");
    if (c <= kSeriesCutoff) {
        return std::exp(c) * scaled_series(c);
    }
    return std::exp(c) * scaled_gauss_legendre(c);
}

double theta_integral_bound(double c) {
    if (!std::isfinite(c) || c <= 0.0) {
        throw InvalidArgument("theta_integral_bound: requires finite c > 0");
    }
    constexpr double pi3 = std::numbers::pi * std::numbers::pi * std::numbers::pi;
    return std::sqrt(pi3 / (8.0 * c)) * std::exp(c);
}

double singular_exp_integral(const SingularIntegralQuery& q) {
    q.validate();
    const double c = 0.5 * q.lambda * (q.b - q.a);
    // exp(-lambda (a+b)/2) exp(c) = exp(-lambda a)
    return std::exp(-q.lambda * q.a) * theta_integral_scaled(c);
}

double singular_exp_integral_bound(const SingularIntegralQuery& q) {
    q.validate();
    if (!(q.lambda > 0.0)) {
        throw InvalidArgument("singular_exp_integral_bound: requires lambda > 0");
    }
    constexpr double pi3 = std::numbers::pi * std::numbers::pi * std::numbers::pi;
    return std::sqrt(pi3 / (4.0 * q.lambda * (q.b - q.a))) * std::exp(-q.lambda * q.a);
}

double singular_exp_integral_oracle(const SingularIntegralQuery& q, double rel_tol) {
    q.validate();
    const double width = q.b - q.a;
    // dx / sqrt((b-x)(x-a)) = d phi under x = a + width sin^2(phi/2).
    auto integrand = [&](double phi) {
        const double s = std::sin(0.5 * phi);
        return std::exp(-q.lambda * (q.a + width * s * s));
    };
    return adaptive_gauss_kronrod(integrand, 0.0, std::numbers::pi, 0.0, rel_tol);
}

}  // namespace sfpe
