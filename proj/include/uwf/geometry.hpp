#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "uwf/field.hpp"

namespace uwf {

struct Triangle {
    std::array<std::array<double, 3>, 3> v;   ///< vertices, meters
};

struct TriangleMesh {
    std::vector<Triangle> triangles;
};

/// Uniform scale followed by translation: p' = p * scale + translate.
struct MeshTransform {
    double scale = 1.0;
    std::array<double, 3> translate{0.0, 0.0, 0.0};
};

/// Parse little-endian binary STL (80-byte header, u32 triangle count,
/// 50-byte records). ASCII STL is rejected as unsupported; size/count
/// mismatches are format errors. Facet normals are discarded — footprints
/// only need vertex positions.
TriangleMesh parse_stl(const std::vector<unsigned char>& bytes);
TriangleMesh parse_stl_file(const std::string& path);

TriangleMesh transformed(const TriangleMesh& mesh, const MeshTransform& t);

/// Slice the mesh at z = slice_height: a cell is marked inside when its
/// center lies in the xy-projection of any triangle whose z-range spans the
/// slice. Cell centers exactly on a triangle edge count as inside.
BuildingMask rasterize_footprint(const TriangleMesh& mesh, const GridSpec& spec,
                                 double slice_height);

} // namespace uwf
