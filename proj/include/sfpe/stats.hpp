#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>

namespace sfpe {

/// Sum / sum-of-squares accumulator. Merging in a fixed order keeps results
/// independent of how the samples were split across workers.
struct RunningMoments {
    std::size_t count = 0;
    double sum = 0.0;
    double sum_sq = 0.0;

    void add(double v) {
        ++count;
        sum += v;
        sum_sq += v * v;
    }

    void merge(const RunningMoments& other) {
        count += other.count;
        sum += other.sum;
        sum_sq += other.sum_sq;
    }

    double mean() const {
        return count ? sum / static_cast<double>(count) : std::numeric_limits<double>::quiet_NaN();
    }

    /// Unbiased sample variance.
    double variance() const {
        if (count < 2) {
            return 0.0;
        }
        const double n = static_cast<double>(count);
        const double m = sum / n;
        return std::max(0.0, (sum_sq - n * m * m) / (n - 1.0));
    }

    double std_error() const {
        return count ? std::sqrt(variance() / static_cast<double>(count)) : 0.0;
    }
};

}  // namespace sfpe
