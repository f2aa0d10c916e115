#include "uwf/sdf.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace uwf {

namespace {

// One-dimensional squared-distance lower envelope (Felzenszwalb &
// Huttenlocher). With integer-valued f the outputs (q - v)^2 + f(v) are
// exact integers, which is what lets the two-pass transform match the
// all-pairs definition bit for bit.
void lower_envelope(const std::vector<double>& f, int n, std::vector<double>& d,
                    std::vector<int>& v, std::vector<double>& z) {
    const double kInf = std::numeric_limits<double>::infinity();
    int k = 0;
    v[0] = 0;
    z[0] = -kInf;
    z[1] = kInf;
    for (int q = 1; q < n; ++q) {
        double s = ((f[q] + double(q) * q) - (f[v[k]] + double(v[k]) * v[k])) /
                   (2.0 * q - 2.0 * v[k]);
        while (s <= z[k]) {
            --k;
            s = ((f[q] + double(q) * q) - (f[v[k]] + double(v[k]) * v[k])) /
                (2.0 * q - 2.0 * v[k]);
        }
        ++k;
        v[k] = q;
        z[k] = s;
        z[k + 1] = kInf;
    }
    k = 0;
    for (int q = 0; q < n; ++q) {
        while (z[k + 1] < double(q)) ++k;
        d[q] = double(q - v[k]) * (q - v[k]) + f[v[k]];
    }
}

// Squared cell-count distance from every cell to the nearest seed.
// Entries >= sentinel^2 mean "no seed anywhere".
std::vector<double> edt_squared(const BuildingMask& mask, bool seed_value, double sentinel) {
    const int nx = mask.nx(), ny = mask.ny();
    std::vector<double> row(size_t(nx) * ny);

    // Row scan: in-row distance to the nearest seed, left-to-right then
    // right-to-left.
    for (int y = 0; y < ny; ++y) {
        double run = sentinel;
        for (int x = 0; x < nx; ++x) {
            run = ((mask(x, y) != 0) == seed_value) ? 0.0 : std::min(run + 1.0, sentinel);
            row[size_t(y) * nx + x] = run;
        }
        run = row[size_t(y) * nx + (nx - 1)];
        for (int x = nx - 2; x >= 0; --x) {
            run = std::min(run + 1.0, sentinel);
            double& r = row[size_t(y) * nx + x];
            r = std::min(r, run);
            run = r;
        }
    }

    // Column pass: lower envelope over squared in-row distances.
    std::vector<double> out(size_t(nx) * ny);
    std::vector<double> f(ny), d(ny), z(ny + 1);
    std::vector<int> v(ny);
    for (int x = 0; x < nx; ++x) {
        for (int y = 0; y < ny; ++y) {
            double r = row[size_t(y) * nx + x];
            f[y] = r * r;
        }
        lower_envelope(f, ny, d, v, z);
        for (int y = 0; y < ny; ++y) out[size_t(y) * nx + x] = d[y];
    }
    return out;
}

} // namespace

SdfGrid compute_sdf(const BuildingMask& mask) {
    const int nx = mask.nx(), ny = mask.ny();
    const double dx = mask.spec.dx;
    const double cap = double(std::max(nx, ny)) * dx;
    // Any true squared distance is at most (nx-1)^2 + (ny-1)^2 < sentinel^2.
    const double sentinel = double(nx) + double(ny) + 10.0;
    const double no_seed = sentinel * sentinel;

    auto d2_to_inside = edt_squared(mask, true, sentinel);
    auto d2_to_outside = edt_squared(mask, false, sentinel);

    SdfGrid out;
    out.spec = mask.spec;
    out.cap = cap;
    out.distance = ScalarField(mask.spec);
    for (int y = 0; y < ny; ++y) {
        for (int x = 0; x < nx; ++x) {
            const std::int64_t i = std::int64_t(y) * nx + x;
            if (mask.values[i] != 0) {
                double d2 = d2_to_outside[size_t(i)];
                out.distance.values[i] = d2 >= no_seed ? -cap : -dx * std::sqrt(d2);
            } else {
                double d2 = d2_to_inside[size_t(i)];
                out.distance.values[i] = d2 >= no_seed ? cap : dx * std::sqrt(d2);
            }
        }
    }
    return out;
}

ScalarField normalize_sdf(const SdfGrid& sdf) {
    ScalarField out(sdf.spec);
    out.values = (sdf.distance.values / sdf.cap).max(-1.0).min(1.0);
    return out;
}

} // namespace uwf
