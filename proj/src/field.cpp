#include "uwf/field.hpp"

namespace uwf {

ScalarField magnitude(const VelocityField& vel) {
    if (!(vel.u.spec == vel.v.spec))
        throw ContractError("magnitude: u and v live on different grids");
    ScalarField out(vel.u.spec);
    out.values = (vel.u.values.square() + vel.v.values.square()).sqrt();
    return out;
}

FieldSeries rotate90_ccw(const FieldSeries& s) {
    FieldSeries out;
    out.dt = s.dt;
    out.frames.reserve(s.frames.size());
    for (const auto& f : s.frames) out.frames.push_back(rotate90_ccw(f));
    out.spec = out.frames.empty() ? GridSpec(s.spec.ny, s.spec.nx, s.spec.dx, s.spec.origin)
                                  : out.frames.front().spec;
    return out;
}

FieldSeries flip_vertical(const FieldSeries& s) {
    FieldSeries out;
    out.spec = s.spec;
    out.dt = s.dt;
    out.frames.reserve(s.frames.size());
    for (const auto& f : s.frames) out.frames.push_back(flip_vertical(f));
    return out;
}

} // namespace uwf
