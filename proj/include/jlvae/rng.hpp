#pragma once

#include <cstdint>
#include <random>

namespace jlvae {

// Seedable deterministic generator used everywhere randomness is needed.
// Built on mt19937_64 (sequence pinned by the C++ standard) with uniforms
// mapped from raw 64-bit output and normals via Box-Muller, so identical
// seeds give identical streams on any platform. Streams are split by
// hashing (seed, stream id) rather than by jumping the engine.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    // Independent child stream, e.g. one per epoch or per row.
    Rng child(std::uint64_t stream) const;

    std::uint64_t next_u64();

    // Uniform on [0, 1) with 53-bit resolution.
    double uniform();
    double uniform(double lo, double hi);

    // Integer in [0, n), n > 0. Rejection-sampled, no modulo bias.
    std::uint64_t uniform_index(std::uint64_t n);

    // Standard normal via Box-Muller on two uniforms; second value cached.
    double normal();

    std::uint64_t seed() const noexcept { return seed_; }

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

// SplitMix64 finalizer; used for seed derivation and fingerprinting.
std::uint64_t mix64(std::uint64_t x);

}  // namespace jlvae
