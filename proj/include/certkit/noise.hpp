#pragma once

#include <array>
#include <cstdint>

#include "certkit/matops.hpp"

namespace certkit {

/// Reproducible standard-normal stream. Draw k of stream s is a pure function of
/// (seed, s, k): uniforms are splitmix64 of the counter, and normal k is the cos (even k) or
/// sin (odd k) branch of Box–Muller on uniforms 2⌊k/2⌋ and 2⌊k/2⌋+1.
class NoiseSource {
public:
    NoiseSource(std::uint64_t seed, std::uint64_t stream);

    double uniform(); // (0, 1)
    double normal();
    Vector normal_vector(Eigen::Index n);

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream() const { return stream_; }
    std::uint64_t draws() const { return counter_; }

private:
    double uniform_at(std::uint64_t k) const;

    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    std::uint64_t cached_pair_ = ~std::uint64_t{0};
    std::array<double, 2> cached_{};
};

} // namespace certkit
