#pragma once

#include <cstddef>
#include <vector>

#include "sfpe/linalg.hpp"

namespace sfpe {

/// Axis-aligned box [lo_1, hi_1] x ... x [lo_d, hi_d].
struct Box {
    std::vector<double> lo;
    std::vector<double> hi;

    int dimension() const { return static_cast<int>(lo.size()); }

    /// Throws InvalidArgument unless lo/hi match in size and lo < hi per axis.
    void validate() const;

    bool contains(const Vec& x) const {
        for (std::size_t i = 0; i < lo.size(); ++i) {
            if (!(x[static_cast<Eigen::Index>(i)] >= lo[i] &&
                  x[static_cast<Eigen::Index>(i)] <= hi[i])) {
                return false;
            }
        }
        return true;
    }

    bool operator==(const Box&) const = default;
};

}  // namespace sfpe
