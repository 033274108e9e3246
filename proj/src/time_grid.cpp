#include "sfpe/time_grid.hpp"

#include <cmath>

#include "sfpe/errors.hpp"

namespace sfpe {

TimeGrid::TimeGrid(std::vector<double> nodes) : nodes_(std::move(nodes)) {
    if (nodes_.size() < 2) {
        throw InvalidArgument("TimeGrid: need at least two nodes");
    }
    for (std::size_t k = 0; k < nodes_.size(); ++k) {
        if (!std::isfinite(nodes_[k])) {
            throw InvalidArgument("TimeGrid: non-finite node");
        }
        if (k > 0 && !(nodes_[k] > nodes_[k - 1])) {
            throw InvalidArgument("TimeGrid: nodes must be strictly increasing");
        }
    }
}

TimeGrid TimeGrid::uniform(double t0, double T, std::size_t n_steps) {
    if (n_steps == 0 || !(T > t0)) {
        throw InvalidArgument("TimeGrid::uniform: need n_steps >= 1 and T > t0");
    }
    std::vector<double> nodes(n_steps + 1);
    const double h = (T - t0) / static_cast<double>(n_steps);
    for (std::size_t k = 0; k < n_steps; ++k) {
        nodes[k] = t0 + static_cast<double>(k) * h;
    }
    nodes[n_steps] = T;
    return TimeGrid(std::move(nodes));
}

TimeGrid TimeGrid::refined_toward_end(double t0, double T, std::size_t n_steps, double ratio) {
    if (!(ratio > 0.0) || ratio > 1.0) {
        throw InvalidArgument("TimeGrid::refined_toward_end: ratio must be in (0, 1]");
    }
    if (ratio == 1.0) {
        return uniform(t0, T, n_steps);
    }
    if (n_steps == 0 || !(T > t0)) {
        throw InvalidArgument("TimeGrid::refined_toward_end: need n_steps >= 1 and T > t0");
    }
    // Step k has length h0 * ratio^k; the steps sum to T - t0.
    const double n = static_cast<double>(n_steps);
    const double h0 = (T - t0) * (1.0 - ratio) / (1.0 - std::pow(ratio, n));
    std::vector<double> nodes(n_steps + 1);
    nodes[0] = t0;
    double h = h0;
    for (std::size_t k = 1; k < n_steps; ++k) {
        nodes[k] = nodes[k - 1] + h;
        h *= ratio;
    }
    nodes[n_steps] = T;
    return TimeGrid(std::move(nodes));
}

}  // namespace sfpe
