#include "sfpe/problem.hpp"

#include <cmath>

#include "sfpe/errors.hpp"

namespace sfpe {

ValueGrid Problem::zero_grid() const {
    return ValueGrid::uniform(T, effective_delta_T(), n_time, axes, dimension() + 1);
}

void Problem::validate() const {
    if (!coeffs) {
        throw InvalidArgument("problem: coefficients missing");
    }
    if (!(T > 0.0) || !std::isfinite(T)) {
        throw InvalidArgument("problem: T must be finite and > 0");
    }
    if (static_cast<int>(axes.size()) != dimension()) {
        throw InvalidArgument("problem: number of grid axes must equal the dimension");
    }
    if (!(effective_delta_T() < T)) {
        throw InvalidArgument("problem: delta_T must be smaller than T");
    }
    if (!g || !f) {
        throw InvalidArgument("problem: terminal function and nonlinearity are required");
    }
    if (!(L >= 0.0) || !std::isfinite(L)) {
        throw InvalidArgument("problem: L must be finite and >= 0");
    }
    if (c_V && !(*c_V > 0.0)) {
        throw InvalidArgument("problem: c_V must be > 0");
    }
    if (domain) {
        domain->validate();
        if (domain->dimension() != dimension()) {
            throw InvalidArgument("problem: domain dimension mismatch");
        }
    }
    V.validate();
    zero_grid();  // validates the grid layout
}

std::string to_string(SingularRule rule) {
    switch (rule) {
        case SingularRule::SqrtSubstitution:
            return "sqrt_substitution";
        case SingularRule::RightRectangle:
            return "right_rectangle";
    }
    return "unknown";
}

SingularRule parse_singular_rule(const std::string& tag) {
    if (tag == "sqrt_substitution") {
        return SingularRule::SqrtSubstitution;
    }
    if (tag == "right_rectangle") {
        return SingularRule::RightRectangle;
    }
    throw InvalidArgument("unknown quadrature rule '" + tag + "'");
}

void McConfig::validate() const {
    if (n_paths < 100) {
        throw InvalidArgument("mc: n_paths must be >= 100");
    }
    if (n_steps < 10) {
        throw InvalidArgument("mc: n_steps must be >= 10");
    }
}

}  // namespace sfpe
