#pragma once

#include "uwf/field.hpp"

namespace uwf {

/// Signed distances between cell centers: positive outside buildings,
/// strictly negative inside, saturating at +-cap when one side is empty.
struct SdfGrid {
    GridSpec spec;
    ScalarField distance;
    double cap = 0.0;          ///< max(nx, ny) * dx
};

/// Exact Euclidean signed distance transform of a building mask
/// (row scan for in-row distances, then a per-column lower envelope over
/// squared distances). Matches the all-pairs definition exactly.
SdfGrid compute_sdf(const BuildingMask& mask);

/// distance / cap, clamped to [-1, 1] — the model-facing SDF channel.
ScalarField normalize_sdf(const SdfGrid& sdf);

} // namespace uwf
