#pragma once

#include <array>
#include <cstdint>

namespace cpq {

/**
 * @brief xoshiro256** seeded through splitmix64.
 *
 * Doubles are built from the top 53 bits so streams are identical on every
 * platform; std distributions are avoided for the same reason.
 */
class Rng {
public:
    explicit Rng(std::uint64_t seed = 42);

    std::uint64_t next();
    /// Uniform on [0, 1).
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

private:
    std::array<std::uint64_t, 4> s_{};
};

}  // namespace cpq
