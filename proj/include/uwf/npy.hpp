#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "uwf/field.hpp"

namespace uwf {

/// In-memory .npy payload: row-major float64 plus its shape.
struct NpyArray {
    std::vector<std::int64_t> shape;
    std::vector<double> data;

    std::int64_t element_count() const {
        std::int64_t n = 1;
        for (auto d : shape) n *= d;
        return n;
    }
};

/// Parse a version 1.0 .npy file. Little-endian '<f4' and '<f8' C-order
/// arrays are accepted (float32 is widened to float64); anything else
/// raises UnsupportedError, malformed bytes raise FormatError.
NpyArray read_npy(const std::string& path);

/// Write a version 1.0 .npy file: '<f8', C-order, header padded so the
/// data section starts at a multiple of 64 bytes.
void write_npy(const std::string& path, const NpyArray& array);

/// (T, H, W) series <-> NpyArray. Grid spacing and frame interval are not
/// part of the .npy format, so the caller supplies them on read.
NpyArray npy_from_series(const FieldSeries& series);
FieldSeries series_from_npy(const NpyArray& array, double dx, double dt);

/// Single (H, W) field <-> NpyArray.
NpyArray npy_from_field(const ScalarField& field);
ScalarField field_from_npy(const NpyArray& array, double dx);

} // namespace uwf
