#include "grbm/rng.hpp"

namespace grbm::rng {

void gaussian_step_stream(std::uint64_t base_seed, std::uint64_t path, std::uint64_t step, std::span<double> out) noexcept {
    const std::uint64_t key = stream_key(base_seed, path);
    const std::uint64_t first = step * out.size();
    std::size_t c = 0;
    if ((first & 1) && c < out.size()) {
        out[c] = normal_at(key, first);
        ++c;
    }
    for (; c + 1 < out.size(); c += 2) {
        const auto [a, b] = normal_pair(key, (first + c) >> 1);
        out[c] = a;
        out[c + 1] = b;
    }
    if (c < out.size()) out[c] = normal_at(key, first + c);
}

Vector gaussian_step_stream(std::uint64_t base_seed, std::uint64_t path, std::uint64_t step, int d) {
    Vector out(d);
    gaussian_step_stream(base_seed, path, step, std::span<double>(out.data(), out.size()));
    return out;
}

}  // namespace grbm::rng
