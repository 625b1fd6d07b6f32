#include "certkit/noise.hpp"

#include <cmath>
#include <numbers>

namespace certkit {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30U)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27U)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31U);
}

} // namespace

NoiseSource::NoiseSource(std::uint64_t seed, std::uint64_t stream)
    : seed_(seed), stream_(stream), key_(splitmix64(splitmix64(seed) ^ (stream * 0xd1b54a32d192ed03ULL))) {}

double NoiseSource::uniform_at(std::uint64_t k) const {
    // 53 random bits, shifted by half an ulp so 0 is never produced
    const std::uint64_t bits = splitmix64(key_ ^ splitmix64(k)) >> 11U;
    return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

double NoiseSource::uniform() { return uniform_at(counter_++); }

double NoiseSource::normal() {
    const std::uint64_t k = counter_++;
    const std::uint64_t pair = k & ~std::uint64_t{1};
    if (pair != cached_pair_) {
        const double r = std::sqrt(-2.0 * std::log(uniform_at(pair)));
        const double phi = 2.0 * std::numbers::pi * uniform_at(pair + 1);
        cached_ = {r * std::cos(phi), r * std::sin(phi)};
        cached_pair_ = pair;
    }
    return cached_[k & 1U];
}

Vector NoiseSource::normal_vector(Eigen::Index n) {
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        v(i) = normal();
    }
    return v;
}

} // namespace certkit
