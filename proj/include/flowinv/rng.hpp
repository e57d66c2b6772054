#pragma once

#include <cstdint>

namespace flowinv {

// Counter-based splittable generator. Every draw is a pure function of
// (key, counter), so a stream can be split into independent child streams
// by tag without consuming state from the parent. Results do not depend on
// the order in which sibling streams are consumed.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    // Child stream derived from this stream's key and `tag`; does not
    // advance this stream.
    Rng split(std::uint64_t tag) const;

    std::uint64_t next_u64();

    // Uniform in [0, 1) with 53 random bits.
    double uniform();

    // Uniform in (0, 1].
    double uniform_open_low();

    // Standard normal via Box-Muller. Uses two uniforms per draw.
    double normal();

    // Uniform integer in [0, n). n must be > 0.
    std::uint64_t below(std::uint64_t n);

    std::uint64_t key() const noexcept { return key_; }
    std::uint64_t counter() const noexcept { return counter_; }

private:
    Rng(std::uint64_t key, bool) : key_(key) {}

    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x) noexcept;

}  // namespace flowinv
