#pragma once

#include <cstdint>
#include <algorithm>
#include <iterator>
#include <random>

namespace fzr {

// Seeded generator; every random draw in a run flows from one of these.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : seed_(seed), engine_(seed) {}

    std::uint64_t seed() const { return seed_; }
    std::mt19937_64& engine() { return engine_; }

    double uniform(double lo, double hi) {
        if (!(hi > lo)) return lo;
        return std::uniform_real_distribution<double>(lo, hi)(engine_);
    }

    template <typename Range>
    void shuffle(Range& r) {
        std::shuffle(std::begin(r), std::end(r), engine_);
    }

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
};

}  // namespace fzr
