#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "uwf/autodiff.hpp"
#include "uwf/field.hpp"
#include "uwf/sdf.hpp"
#include "uwf/train.hpp"

namespace uwf {

/// Train/test regime matrix: whole frames (T) or 64x64 patches (P), each
/// with or without the signed-distance channel.
enum class Regime { T, TSdf, P, PSdf };

std::string to_string(Regime regime);
Regime regime_from_string(const std::string& name);

bool regime_uses_sdf(Regime regime);
bool regime_uses_patches(Regime regime);

/// One sliding window over a series: frames [start, start+5) in, the next
/// 10 out. Frames are raw magnitudes; normalization happens at assembly.
struct WindowSample {
    int start = 0;
    std::vector<ScalarField> inputs;
    std::vector<ScalarField> targets;
};

/// Windows start at 0, stride, 2*stride, ... while start + in_len + out_len
/// stays within the series. A series shorter than in_len + out_len would
/// produce an empty dataset and raises ContractError instead.
std::vector<WindowSample> slide_windows(const FieldSeries& series, int in_len = 5,
                                        int out_len = 10, int stride = 2);

/// Exact non-overlapping tiling of an H x W frame into patch x patch cells:
/// patch * grid_cols == W and patch * grid_rows == H.
struct PatchLayout {
    int patch = 64;
    int grid_rows = 0;
    int grid_cols = 0;
    GridSpec full;                ///< spec of the stitched-together frame
    std::vector<int> origin_x;    ///< per-patch cell offsets, row-major
    std::vector<int> origin_y;

    int count() const { return grid_rows * grid_cols; }
};

struct TileResult {
    std::vector<ScalarField> patches;  ///< row-major over the patch grid
    PatchLayout layout;
};

/// Split a frame into patch x patch tiles. Dimensions that do not divide
/// evenly raise ContractError naming the offending dimension.
TileResult tile_patches(const ScalarField& frame, int patch = 64);

/// Exact inverse of tile_patches; patch count or dims off the layout raise
/// ContractError.
ScalarField stitch_patches(const std::vector<ScalarField>& patches,
                           const PatchLayout& layout);

/// Coordinate ramps attached to every sample: value x/W in the x channel
/// and y/H in the y channel, so both lie in [0, 1).
ScalarField coord_ramp_x(const GridSpec& spec);
ScalarField coord_ramp_y(const GridSpec& spec);

struct DatasetOptions {
    Regime regime = Regime::PSdf;
    std::uint64_t split_seed = 42;
    /// Fraction of sliding windows kept (evenly strided over the series).
    /// The source experiments quote 50% data coverage without pinning down
    /// what it covers; default keeps everything.
    double coverage = 1.0;
    int patch = 64;
    int in_len = 5;
    int out_len = 10;
    int stride = 2;
    std::string source;  ///< provenance label (series path or description)
};

struct DatasetManifest {
    std::int64_t count = 0;
    double scale = 1.0;  ///< max |magnitude| over the training split (m/s)
    Regime regime = Regime::PSdf;
    std::uint64_t split_seed = 42;
    std::vector<std::int64_t> train_indices;  ///< ascending, disjoint from val
    std::vector<std::int64_t> val_indices;
    std::string source;
    // window/tiling provenance, serialized under the manifest's "source" key
    double coverage = 1.0;
    int patch = 64;
    int in_len = 5;
    int out_len = 10;
    int stride = 2;
};

/// Assembled sample store. Inputs are [N, C, H, W] with channels: the five
/// input frames, then the normalized SDF when the regime carries one, then
/// the x and y coordinate ramps (C = 7 or 8). Targets are [N, 10, H, W].
/// Frames are divided by manifest.scale; SDF and coordinates are not.
struct BuiltDataset {
    Tensor inputs;
    Tensor targets;
    DatasetManifest manifest;
};

/// Build the sample store for one regime. P regimes tile every frame before
/// windowing, so each patch position contributes its own samples (windows x
/// patches, window-major). The 80/20 train/validation split is a
/// deterministic shuffle of sample indices by split_seed; the normalization
/// scale is the max |magnitude| over training-split frames (1.0 when the
/// training split is identically zero). SDF must be present iff the regime
/// uses it and must match the series grid.
BuiltDataset build_dataset(const FieldSeries& series, const SdfGrid* sdf,
                           const DatasetOptions& options);

/// Gather the train or validation rows of a built store into a
/// TensorDataset ready for train().
TensorDataset gather_split(const BuiltDataset& dataset,
                           const std::vector<std::int64_t>& indices);

/// Store layout: <dir>/inputs.npy, <dir>/targets.npy, <dir>/manifest.json.
void save_dataset(const BuiltDataset& dataset, const std::string& dir);
BuiltDataset load_dataset(const std::string& dir);

} // namespace uwf
