#pragma once

#include <cstddef>
#include <vector>

namespace sfpe {

/// Strictly increasing simulation nodes from t0 to T.
class TimeGrid {
public:
    /// Validates: at least two nodes, strictly increasing, all finite.
    explicit TimeGrid(std::vector<double> nodes);

    static TimeGrid uniform(double t0, double T, std::size_t n_steps);

    /// Steps shrink geometrically toward T by `ratio` (0 < ratio <= 1) so that
    /// nodes cluster where the value function is singular.
    static TimeGrid refined_toward_end(double t0, double T, std::size_t n_steps, double ratio);

    double t0() const { return nodes_.front(); }
    double T() const { return nodes_.back(); }
    std::size_t n_steps() const { return nodes_.size() - 1; }
    std::size_t n_nodes() const { return nodes_.size(); }
    double operator[](std::size_t k) const { return nodes_[k]; }
    double step(std::size_t k) const { return nodes_[k + 1] - nodes_[k]; }
    const std::vector<double>& nodes() const { return nodes_; }

    bool operator==(const TimeGrid&) const = default;

private:
    std::vector<double> nodes_;
};

}  // namespace sfpe
