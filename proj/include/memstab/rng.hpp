#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "memstab/vec.hpp"

namespace memstab {

// All randomness in the project flows through these two helpers, seeded with
// explicit 64-bit seeds. The engine is std::mt19937_64 (bit-exact sequence by
// the standard); the normal transform is an explicit Box-Muller so the stream
// does not depend on the standard library's normal_distribution.
class GaussianSource {
public:
    explicit GaussianSource(std::uint64_t seed) : engine_(seed) {}

    double next() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = uniform_open();
        const double u2 = uniform_open();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * M_PI * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

    Vec vector(std::size_t dim) {
        Vec v(dim);
        for (double& x : v) x = next();
        return v;
    }

    std::uint64_t next_u64() { return engine_(); }

private:
    // uniform on (0, 1]: never 0, so log() is safe
    double uniform_open() {
        const std::uint64_t x = engine_() >> 11;  // 53 random bits
        return (static_cast<double>(x) + 1.0) * 0x1p-53;
    }

    std::mt19937_64 engine_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

inline Vec gaussian_vector(std::uint64_t seed, std::size_t dim) {
    return GaussianSource(seed).vector(dim);
}

// Fisher-Yates with an explicit index draw; std::shuffle is implementation-defined.
template <typename T>
void deterministic_shuffle(std::vector<T>& items, std::uint64_t seed) {
    std::mt19937_64 engine(seed);
    for (std::size_t i = items.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(engine() % i);
        std::swap(items[i - 1], items[j]);
    }
}

}  // namespace memstab
