#pragma once

#include <cstdint>
#include <random>

namespace cesmark {

/// splitmix64 mix; used to derive independent substream seeds by counter so
/// that results do not depend on scheduling or worker counts.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

inline std::uint64_t substream_seed(std::uint64_t master, std::uint64_t index) {
    return splitmix64(master ^ splitmix64(index + 1));
}

class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    double normal(double mean = 0.0, double sd = 1.0) {
        return std::normal_distribution<double>(mean, sd)(engine_);
    }
    double uniform(double lo = 0.0, double hi = 1.0) {
        return std::uniform_real_distribution<double>(lo, hi)(engine_);
    }
    double lognormal(double mu, double sigma) { return std::exp(normal(mu, sigma)); }
    int rademacher() { return uniform() < 0.5 ? -1 : 1; }
    bool bernoulli(double p) { return uniform() < p; }
    std::uint64_t integer(std::uint64_t n) {  // in [0, n)
        return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(engine_);
    }

    std::mt19937_64& engine() { return engine_; }

  private:
    std::mt19937_64 engine_;
};

}  // namespace cesmark
