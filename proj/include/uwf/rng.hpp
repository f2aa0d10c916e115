#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace uwf {

/// Seeded uniform generator with a fully specified output sequence.
/// std::mt19937_64 is bit-stable across implementations, but the standard
/// distributions are not, so the mapping to doubles lives here: 53 random
/// bits scaled into [0, 1).
class UnitRng {
  public:
    explicit UnitRng(std::uint64_t seed) : rng_(seed) {}

    /// Uniform double in [0, 1).
    double unit() { return double(rng_() >> 11) * 0x1.0p-53; }

    /// Uniform double in [lo, hi).
    double range(double lo, double hi) { return lo + (hi - lo) * unit(); }

    /// Uniform integer in [0, n), unbiased via rejection.
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do {
            x = rng_();
        } while (x >= limit);
        return x % n;
    }

  private:
    std::mt19937_64 rng_;
};

/// Fisher-Yates shuffle driven by UnitRng, so shuffles are reproducible
/// everywhere a seed is.
template <class T>
void shuffle(std::vector<T>& v, UnitRng& rng) {
    for (std::size_t i = v.size(); i > 1; --i)
        std::swap(v[i - 1], v[rng.below(i)]);
}

} // namespace uwf
