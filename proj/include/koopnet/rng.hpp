#pragma once

#include <cstdint>
#include <random>

namespace koopnet {

/// Seeded uniform source shared by both simulators.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the
/// standard. Doubles are built from the top 53 bits of each draw, so a given
/// seed yields the same stream on every conforming toolchain (unlike
/// std::uniform_real_distribution, whose algorithm is unspecified).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Independent stream derived from (seed, stream) through std::seed_seq.
    static Rng stream(std::uint64_t seed, std::uint64_t stream) {
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
        return Rng(std::mt19937_64(seq));
    }

    /// Uniform draw on [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform draw on [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    std::uint64_t next_u64() { return engine_(); }

private:
    explicit Rng(std::mt19937_64 engine) : engine_(engine) {}

    std::mt19937_64 engine_;
};

}  // namespace koopnet
