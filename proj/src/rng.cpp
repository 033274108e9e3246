#include "sfpe/rng.hpp"

#include <cmath>
#include <numbers>

namespace sfpe {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
    const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(p >> 32);
    lo = static_cast<std::uint32_t>(p);
}

inline std::uint64_t join(std::uint32_t hi, std::uint32_t lo) {
    return (static_cast<std::uint64_t>(hi) << 32) | lo;
}

}  // namespace

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                        std::array<std::uint32_t, 2> key) {
    for (int round = 0; round < 10; ++round) {
        std::uint32_t hi0, lo0, hi1, lo1;
        mulhilo(kMul0, ctr[0], hi0, lo0);
        mulhilo(kMul1, ctr[2], hi1, lo1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        key[0] += kWeyl0;
        key[1] += kWeyl1;
    }
    return ctr;
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

CounterRng::CounterRng(std::uint64_t base_seed, std::uint64_t stream) {
    const std::uint64_t k = splitmix64(splitmix64(base_seed) ^ (stream * 0xD1342543DE82EF95ull + 1));
    key_ = {static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k >> 32)};
}

std::array<std::uint32_t, 4> CounterRng::block(std::uint64_t path, std::uint32_t step,
                                               std::uint32_t index) const {
    return philox4x32({step, index, static_cast<std::uint32_t>(path),
                       static_cast<std::uint32_t>(path >> 32)},
                      key_);
}

void CounterRng::uniforms(std::uint64_t path, std::uint32_t step, std::span<double> out) const {
    // Uniform draws live in the upper half of the index space, disjoint from normals.
    constexpr std::uint32_t kUniformOffset = 0x80000000u;
    for (std::size_t i = 0; i < out.size(); i += 2) {
        const auto r = block(path, step, kUniformOffset + static_cast<std::uint32_t>(i / 2));
        out[i] = bits_to_unit(join(r[0], r[1]));
        if (i + 1 < out.size()) {
            out[i + 1] = bits_to_unit(join(r[2], r[3]));
        }
    }
}

void CounterRng::normals(std::uint64_t path, std::uint32_t step, std::span<double> out) const {
    // Box-Muller: each Philox block yields two uniforms and hence two normals.
    for (std::size_t i = 0; i < out.size(); i += 2) {
        const auto r = block(path, step, static_cast<std::uint32_t>(i / 2));
        const double u1 = bits_to_unit(join(r[0], r[1]));
        const double u2 = bits_to_unit(join(r[2], r[3]));
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        out[i] = radius * std::cos(angle);
        if (i + 1 < out.size()) {
            out[i + 1] = radius * std::sin(angle);
        }
    }
}

}  // namespace sfpe
