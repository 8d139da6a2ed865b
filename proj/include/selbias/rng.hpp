#pragma once

#include <cstdint>
#include <random>

#include "selbias/normal.hpp"

namespace selbias {

// SplitMix64 finalizer; used to spread (seed, stream index) pairs into
// well-separated engine seeds so replication substreams are independent of
// execution order.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

inline std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t stream) {
    return mix64(mix64(seed) ^ mix64(stream + 0x6a09e667f3bcc909ull));
}

inline std::mt19937_64 substream_engine(std::uint64_t seed, std::uint64_t stream) {
    return std::mt19937_64(substream_seed(seed, stream));
}

// Uniform on (0,1), strictly open; 53-bit resolution offset by half an ulp so
// norm_quantile never sees 0 or 1.
inline double uniform01(std::mt19937_64& rng) {
    return (static_cast<double>(rng() >> 11) + 0.5) * 0x1p-53;
}

// Standard normal via the quantile function. Slower than ziggurat-style
// samplers but gives the same stream on every platform for a given engine.
inline double normal01(std::mt19937_64& rng) {
    return norm_quantile(uniform01(rng));
}

// Welford running mean/variance.
class RunningStat {
public:
    void add(double x) {
        ++count_;
        const double d = x - mean_;
        mean_ += d / static_cast<double>(count_);
        m2_ += d * (x - mean_);
    }
    std::int64_t count() const { return count_; }
    double mean() const { return mean_; }
    double variance() const { return count_ > 1 ? m2_ / static_cast<double>(count_ - 1) : 0.0; }
    double std_dev() const { return std::sqrt(variance()); }
    double std_error() const {
        return count_ > 1 ? std_dev() / std::sqrt(static_cast<double>(count_)) : 0.0;
    }

private:
    std::int64_t count_ = 0;
    double mean_ = 0.0;
    double m2_ = 0.0;
};

}  // namespace selbias
