#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <vector>

#include "uwf/errors.hpp"

namespace uwf {

/// Uniform square-cell grid. Cell (x, y) has its center at
/// origin + ((x + 0.5) dx, (y + 0.5) dx).
struct GridSpec {
    int nx = 0;
    int ny = 0;
    double dx = 1.0;                    ///< cell size in meters
    std::array<double, 2> origin{0.0, 0.0};

    GridSpec() = default;
    GridSpec(int nx_, int ny_, double dx_ = 1.0, std::array<double, 2> origin_ = {0.0, 0.0})
        : nx(nx_), ny(ny_), dx(dx_), origin(origin_) {
        if (nx < 1 || ny < 1)
            throw ContractError("GridSpec: nx and ny must be positive");
        if (!(dx > 0.0))
            throw ContractError("GridSpec: dx must be positive");
    }

    std::int64_t cell_count() const { return std::int64_t(nx) * ny; }
    double center_x(int x) const { return origin[0] + (x + 0.5) * dx; }
    double center_y(int y) const { return origin[1] + (y + 0.5) * dx; }

    bool operator==(const GridSpec& o) const {
        return nx == o.nx && ny == o.ny && dx == o.dx && origin == o.origin;
    }
};

/// Dense 2D field over a GridSpec. Storage is row-major with y as the
/// outer index: values[y*nx + x].
template <class Scalar>
struct Field2D {
    GridSpec spec;
    Eigen::Array<Scalar, Eigen::Dynamic, 1> values;

    Field2D() = default;
    explicit Field2D(const GridSpec& s, Scalar fill = Scalar(0))
        : spec(s), values(Eigen::Array<Scalar, Eigen::Dynamic, 1>::Constant(s.cell_count(), fill)) {}

    Scalar& operator()(int x, int y) { return values[std::int64_t(y) * spec.nx + x]; }
    const Scalar& operator()(int x, int y) const { return values[std::int64_t(y) * spec.nx + x]; }

    int nx() const { return spec.nx; }
    int ny() const { return spec.ny; }

    /// ny-by-nx view of the same storage (rows indexed by y).
    auto as_matrix() {
        return Eigen::Map<Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
            values.data(), spec.ny, spec.nx);
    }
    auto as_matrix() const {
        return Eigen::Map<const Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
            values.data(), spec.ny, spec.nx);
    }
};

using ScalarField = Field2D<double>;
using BuildingMask = Field2D<std::uint8_t>;   ///< 1 = inside a building, 0 = fluid

/// Two-component velocity sample on one grid.
struct VelocityField {
    ScalarField u;
    ScalarField v;

    VelocityField() = default;
    explicit VelocityField(const GridSpec& s) : u(s), v(s) {}
};

/// Time-ordered scalar frames (equal specs, uniform frame spacing).
struct FieldSeries {
    GridSpec spec;
    double dt = 0.0;                    ///< seconds between consecutive frames
    std::vector<ScalarField> frames;

    int size() const { return int(frames.size()); }
};

/// Quarter-turn counterclockwise, matching the usual image-rotation
/// convention: the east edge of the input becomes the north edge of the
/// output. Output dimensions are swapped; applying it four times is the
/// identity.
template <class Scalar>
Field2D<Scalar> rotate90_ccw(const Field2D<Scalar>& f) {
    GridSpec out_spec(f.spec.ny, f.spec.nx, f.spec.dx, f.spec.origin);
    Field2D<Scalar> out(out_spec);
    for (int y = 0; y < out_spec.ny; ++y)
        for (int x = 0; x < out_spec.nx; ++x)
            out(x, y) = f(f.spec.nx - 1 - y, x);
    return out;
}

/// Mirror across the horizontal midline: row y swaps with row ny-1-y.
template <class Scalar>
Field2D<Scalar> flip_vertical(const Field2D<Scalar>& f) {
    Field2D<Scalar> out(f.spec);
    for (int y = 0; y < f.spec.ny; ++y)
        for (int x = 0; x < f.spec.nx; ++x)
            out(x, y) = f(x, f.spec.ny - 1 - y);
    return out;
}

/// Pointwise speed sqrt(u^2 + v^2).
ScalarField magnitude(const VelocityField& vel);

/// Frame-by-frame rotate / flip of a whole series.
FieldSeries rotate90_ccw(const FieldSeries& s);
FieldSeries flip_vertical(const FieldSeries& s);

} // namespace uwf
