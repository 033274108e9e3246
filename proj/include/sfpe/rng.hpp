#pragma once

#include <array>
#include <cstdint>
#include <span>

namespace sfpe {

/// Philox4x32-10 block function (Salmon et al., Random123).
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

/// SplitMix64 finalizer, used to derive keys.
std::uint64_t splitmix64(std::uint64_t x);

/// Identifies one reproducible sample path: (base_seed, stream, path_index).
///
/// `stream` separates independent families drawn under the same seed (e.g. one
/// per grid node); `path_index` enumerates paths within a family.
struct SeedTag {
    std::uint64_t base_seed = 0;
    std::uint64_t stream = 0;
    std::uint64_t path_index = 0;

    bool operator==(const SeedTag&) const = default;
};

/// Stateless counter-based generator: every draw is a pure function of
/// (seed tag, step, component), so results never depend on scheduling.
class CounterRng {
public:
    CounterRng(std::uint64_t base_seed, std::uint64_t stream);

    /// Fills `out` with independent standard normals for (path, step).
    void normals(std::uint64_t path, std::uint32_t step, std::span<double> out) const;

    /// Fills `out` with independent uniforms in (0, 1) for (path, step).
    void uniforms(std::uint64_t path, std::uint32_t step, std::span<double> out) const;

private:
    std::array<std::uint32_t, 4> block(std::uint64_t path, std::uint32_t step,
                                       std::uint32_t index) const;

    std::array<std::uint32_t, 2> key_;
};

/// Maps 64 random bits to a double in the open interval (0, 1).
inline double bits_to_unit(std::uint64_t bits) {
    return (static_cast<double>(bits >> 12) + 0.5) * 0x1.0p-52;
}

}  // namespace sfpe
