#include "uwf/geometry.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>

namespace uwf {

namespace {

constexpr size_t kHeaderBytes = 80;
constexpr size_t kRecordBytes = 50; // 12 floats + u16 attribute

float read_f32(const unsigned char* p) {
    float f;
    std::memcpy(&f, p, 4);
    return f;
}

bool looks_ascii(const std::vector<unsigned char>& bytes) {
    const char tag[] = "solid";
    if (bytes.size() < 5) return false;
    return std::memcmp(bytes.data(), tag, 5) == 0;
}

// Twice the signed area of (a, b, p) in the xy-plane.
double edge_fn(const double* a, const double* b, double px, double py) {
    return (b[0] - a[0]) * (py - a[1]) - (b[1] - a[1]) * (px - a[0]);
}

} // namespace

TriangleMesh parse_stl(const std::vector<unsigned char>& bytes) {
    if (bytes.size() < kHeaderBytes + 4) {
        if (looks_ascii(bytes))
            throw UnsupportedError("stl: ASCII STL is not handled, export binary instead");
        throw FormatError("stl: file shorter than the 84-byte binary preamble");
    }
    std::uint32_t count;
    std::memcpy(&count, bytes.data() + kHeaderBytes, 4);
    const size_t expected = kHeaderBytes + 4 + size_t(count) * kRecordBytes;
    if (bytes.size() != expected) {
        // An ASCII export will nearly always trip this size check; tell the
        // caller which problem they actually have.
        if (looks_ascii(bytes))
            throw UnsupportedError("stl: ASCII STL is not handled, export binary instead");
        throw FormatError("stl: triangle count promises " + std::to_string(expected) +
                          " bytes but file has " + std::to_string(bytes.size()));
    }

    TriangleMesh mesh;
    mesh.triangles.resize(count);
    const unsigned char* p = bytes.data() + kHeaderBytes + 4;
    for (std::uint32_t t = 0; t < count; ++t, p += kRecordBytes) {
        // skip the 12-byte facet normal
        for (int v = 0; v < 3; ++v)
            for (int c = 0; c < 3; ++c)
                mesh.triangles[t].v[v][c] = double(read_f32(p + 12 + v * 12 + c * 4));
    }
    return mesh;
}

TriangleMesh parse_stl_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("stl: cannot open " + path);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    return parse_stl(bytes);
}

TriangleMesh transformed(const TriangleMesh& mesh, const MeshTransform& t) {
    if (!(t.scale > 0.0)) throw ContractError("MeshTransform: scale must be positive");
    TriangleMesh out = mesh;
    for (auto& tri : out.triangles)
        for (auto& v : tri.v)
            for (int c = 0; c < 3; ++c) v[c] = v[c] * t.scale + t.translate[c];
    return out;
}

BuildingMask rasterize_footprint(const TriangleMesh& mesh, const GridSpec& spec,
                                 double slice_height) {
    BuildingMask mask(spec, 0);
    for (const auto& tri : mesh.triangles) {
        double zmin = std::min({tri.v[0][2], tri.v[1][2], tri.v[2][2]});
        double zmax = std::max({tri.v[0][2], tri.v[1][2], tri.v[2][2]});
        if (slice_height < zmin || slice_height > zmax) continue;

        double xmin = std::min({tri.v[0][0], tri.v[1][0], tri.v[2][0]});
        double xmax = std::max({tri.v[0][0], tri.v[1][0], tri.v[2][0]});
        double ymin = std::min({tri.v[0][1], tri.v[1][1], tri.v[2][1]});
        double ymax = std::max({tri.v[0][1], tri.v[1][1], tri.v[2][1]});
        // Candidate cells: those whose centers fall in the bounding box.
        int x0 = std::max(0, int(std::floor((xmin - spec.origin[0]) / spec.dx - 0.5)));
        int x1 = std::min(spec.nx - 1, int(std::ceil((xmax - spec.origin[0]) / spec.dx)));
        int y0 = std::max(0, int(std::floor((ymin - spec.origin[1]) / spec.dx - 0.5)));
        int y1 = std::min(spec.ny - 1, int(std::ceil((ymax - spec.origin[1]) / spec.dx)));

        for (int y = y0; y <= y1; ++y) {
            for (int x = x0; x <= x1; ++x) {
                double px = spec.center_x(x), py = spec.center_y(y);
                double e0 = edge_fn(tri.v[0].data(), tri.v[1].data(), px, py);
                double e1 = edge_fn(tri.v[1].data(), tri.v[2].data(), px, py);
                double e2 = edge_fn(tri.v[2].data(), tri.v[0].data(), px, py);
                // Sign-consistent test; zeros (centers on an edge) count in.
                bool pos = e0 >= 0.0 && e1 >= 0.0 && e2 >= 0.0;
                bool neg = e0 <= 0.0 && e1 <= 0.0 && e2 <= 0.0;
                if (pos || neg) mask(x, y) = 1;
            }
        }
    }
    return mask;
}

} // namespace uwf
