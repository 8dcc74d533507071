#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <utility>

#include "grbm/types.hpp"

// Counter-based random streams. Every value is a pure function of
// (base_seed, stream index, counter), so paths can be generated in any order
// and on any number of workers with identical results.
namespace grbm::rng {

/// SplitMix64 finalizer; a bijection on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

/// Key for stream `stream` under `base_seed`.
constexpr std::uint64_t stream_key(std::uint64_t base_seed, std::uint64_t stream) noexcept {
    return mix64(base_seed ^ mix64(stream * kGolden + 0x632BE59BD9B4E019ULL));
}

/// Child seed for an independent experiment component.
constexpr std::uint64_t derive_seed(std::uint64_t base_seed, std::uint64_t tag) noexcept {
    return mix64(mix64(base_seed + kGolden) ^ (tag * 0xD1B54A32D192ED03ULL + 1));
}

constexpr std::uint64_t bits_at(std::uint64_t key, std::uint64_t counter) noexcept {
    return mix64(key ^ mix64(counter * kGolden + 0x2545F4914F6CDD1DULL));
}

/// Uniform on the open interval (0, 1) with 53 random bits.
constexpr double uniform_at(std::uint64_t key, std::uint64_t counter) noexcept {
    return (static_cast<double>(bits_at(key, counter) >> 11) + 0.5) * 0x1.0p-53;
}

/// Box-Muller pair number `pair` of a stream.
inline std::pair<double, double> normal_pair(std::uint64_t key, std::uint64_t pair) noexcept {
    const double u1 = uniform_at(key, 2 * pair);
    const double u2 = uniform_at(key, 2 * pair + 1);
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    return {radius * std::cos(theta), radius * std::sin(theta)};
}

/// Normal number `index` of a stream: even indices take the cosine branch of
/// pair index/2, odd indices the sine branch.
inline double normal_at(std::uint64_t key, std::uint64_t index) noexcept {
    const auto [a, b] = normal_pair(key, index >> 1);
    return (index & 1) ? b : a;
}

/// Standard normal vector for (path, step): entries are normals
/// step*d .. step*d + d - 1 of the path's stream.
void gaussian_step_stream(std::uint64_t base_seed, std::uint64_t path, std::uint64_t step, std::span<double> out) noexcept;
Vector gaussian_step_stream(std::uint64_t base_seed, std::uint64_t path, std::uint64_t step, int d);

/// Sequential reader over one path's normal stream; yields exactly the values
/// of gaussian_step_stream in step-major order while computing each
/// Box-Muller pair once.
class GaussianStream {
public:
    GaussianStream(std::uint64_t base_seed, std::uint64_t path) noexcept : key_(stream_key(base_seed, path)) {}

    double next() noexcept {
        if (index_ & 1) {
            ++index_;
            return spare_;
        }
        const auto [a, b] = normal_pair(key_, index_ >> 1);
        spare_ = b;
        ++index_;
        return a;
    }

    void fill(std::span<double> out) noexcept {
        for (double& v : out) v = next();
    }

    std::uint64_t position() const noexcept { return index_; }

private:
    std::uint64_t key_;
    std::uint64_t index_ = 0;
    double spare_ = 0.0;
};

}  // namespace grbm::rng
