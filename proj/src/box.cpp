#include "sfpe/box.hpp"

#include <cmath>

#include "sfpe/errors.hpp"

namespace sfpe {

void Box::validate() const {
    if (lo.size() != hi.size() || lo.empty()) {
        throw InvalidArgument("Box: lo and hi must be non-empty and of equal length");
    }
    for (std::size_t i = 0; i < lo.size(); ++i) {
        if (!(lo[i] < hi[i]) || !std::isfinite(lo[i]) || !std::isfinite(hi[i])) {
            throw InvalidArgument("Box: need finite lo < hi on every axis");
        }
    }
}

}  // namespace sfpe
