#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "uwf/sdf.hpp"

using namespace uwf;

namespace {

BuildingMask random_mask(int nx, int ny, double fill, std::uint64_t seed, double dx = 1.0) {
    BuildingMask m(GridSpec(nx, ny, dx), 0);
    std::mt19937_64 rng(seed);
    for (auto& v : m.values) v = (double(rng()) / double(rng.max()) < fill) ? 1 : 0;
    return m;
}

} // namespace

TEST_CASE("two-pass transform equals the all-pairs oracle exactly") {
    std::mt19937_64 seeds(2024);
    for (int trial = 0; trial < 40; ++trial) {
        int nx = trial % 3 == 0 ? 13 : 9;
        int ny = trial % 3 == 1 ? 7 : 9;
        double fill = 0.05 + 0.9 * double(trial) / 40.0;
        BuildingMask m = random_mask(nx, ny, fill, seeds(), 2.0);
        SdfGrid fast = compute_sdf(m);
        auto ref = oracle::sdf_brute(
            std::vector<std::uint8_t>(m.values.data(), m.values.data() + m.values.size()), nx,
            ny, 2.0);
        for (int i = 0; i < nx * ny; ++i) {
            CAPTURE(trial);
            CAPTURE(i);
            CHECK(std::abs(fast.distance.values[i] - ref[size_t(i)]) <= 1e-12);
        }
    }
}

TEST_CASE("single inside cell in a 5x5 grid") {
    const double dx = 2.0;
    BuildingMask m(GridSpec(5, 5, dx), 0);
    m(2, 2) = 1;
    SdfGrid sdf = compute_sdf(m);
    CHECK(sdf.distance(2, 2) == -dx);                                // nearest outside is adjacent
    CHECK(sdf.distance(0, 0) == doctest::Approx(2.0 * std::sqrt(2.0) * dx)); // corner, radius 2*sqrt(2)
    CHECK(sdf.distance(2, 0) == 2.0 * dx);
    CHECK(sdf.cap == 5.0 * dx);
}

TEST_CASE("empty and full masks saturate at the cap") {
    BuildingMask empty(GridSpec(6, 4, 3.0), 0);
    SdfGrid s1 = compute_sdf(empty);
    CHECK(s1.cap == 18.0);
    for (auto v : s1.distance.values) CHECK(v == 18.0);

    BuildingMask full(GridSpec(6, 4, 3.0), 1);
    SdfGrid s2 = compute_sdf(full);
    for (auto v : s2.distance.values) CHECK(v == -18.0);
}

TEST_CASE("sign partitions cells exactly like the mask") {
    BuildingMask m = random_mask(16, 12, 0.3, 77);
    SdfGrid sdf = compute_sdf(m);
    for (int i = 0; i < 16 * 12; ++i) {
        if (m.values[i])
            CHECK(sdf.distance.values[i] < 0.0);
        else {
            CHECK(sdf.distance.values[i] > 0.0);
            CHECK(!std::signbit(sdf.distance.values[i]));
        }
    }
}

TEST_CASE("distance obeys the eikonal-style growth bounds") {
    BuildingMask m = random_mask(12, 12, 0.25, 31, 0.5);
    const double dx = 0.5;
    SdfGrid sdf = compute_sdf(m);

    // Same-sign pairs: plain 1-Lipschitz in the Euclidean cell distance.
    // Pairs that straddle the boundary pick up the one-cell offset baked
    // into the two-sided definition, bounded by sqrt(2)*dx.
    for (int y1 = 0; y1 < 12; ++y1)
        for (int x1 = 0; x1 < 12; ++x1)
            for (int y2 = 0; y2 < 12; ++y2)
                for (int x2 = 0; x2 < 12; ++x2) {
                    double a = sdf.distance(x1, y1), b = sdf.distance(x2, y2);
                    double sep = dx * std::hypot(double(x1 - x2), double(y1 - y2));
                    if ((a < 0.0) == (b < 0.0))
                        CHECK(std::abs(a - b) <= sep + 1e-9);
                    else
                        CHECK(std::abs(a - b) <= sep + dx * std::sqrt(2.0) + 1e-9);
                }

    // Neighbor form: |d| never jumps by more than sqrt(2)*dx per step.
    for (int y = 0; y < 12; ++y)
        for (int x = 0; x + 1 < 12; ++x)
            CHECK(std::abs(std::abs(sdf.distance(x, y)) - std::abs(sdf.distance(x + 1, y))) <=
                  dx * std::sqrt(2.0) + 1e-9);
}

TEST_CASE("normalize_sdf lands in [-1, 1] and clamps the far corner") {
    BuildingMask m(GridSpec(8, 8, 1.0), 0);
    m(0, 0) = 1;
    SdfGrid sdf = compute_sdf(m);
    // Far corner is sqrt(98) ~ 9.9 away, past the cap of 8.
    CHECK(sdf.distance(7, 7) > sdf.cap);
    ScalarField n = normalize_sdf(sdf);
    CHECK(n(7, 7) == 1.0);
    CHECK(n(0, 0) == doctest::Approx(-1.0 / 8.0));
    CHECK((n.values >= -1.0).all());
    CHECK((n.values <= 1.0).all());
}
