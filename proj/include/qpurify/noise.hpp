#ifndef QPURIFY_NOISE_HPP
#define QPURIFY_NOISE_HPP

#include <cmath>
#include <cstdint>
#include <random>

#include "errors.hpp"

namespace qpurify {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) noexcept
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace detail

// Innovation increments for one trajectory. The pair (seed, index) fully
// determines the sequence; uniforms come from a separate engine so drawing
// them never shifts the Gaussian sequence.
class NoiseStream
{
public:
    NoiseStream(std::uint64_t seed, std::uint64_t index)
        : seed_(seed), index_(index),
          gauss_(detail::splitmix64(detail::splitmix64(seed) ^ detail::splitmix64(index + 1))),
          unif_(detail::splitmix64(detail::splitmix64(seed) ^ ~detail::splitmix64(index + 1)))
    {
    }

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t index() const noexcept { return index_; }

    // dW ~ N(0, dt)
    double increment(double dt)
    {
        detail::require(dt > 0.0, "increment requires dt > 0");
        return std::sqrt(dt) * normal_(gauss_);
    }

    double standard_normal() { return normal_(gauss_); }

    // U[0, 1)
    double uniform() { return uniform_(unif_); }

private:
    std::uint64_t seed_;
    std::uint64_t index_;
    std::mt19937_64 gauss_;
    std::mt19937_64 unif_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace qpurify

#endif
