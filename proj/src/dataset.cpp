#include "uwf/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "uwf/errors.hpp"
#include "uwf/npy.hpp"
#include "uwf/rng.hpp"

namespace uwf {

namespace {

std::vector<int> window_starts(int n_frames, int in_len, int out_len, int stride) {
    std::vector<int> starts;
    const int span = in_len + out_len;
    for (int s = 0; s + span <= n_frames; s += stride) starts.push_back(s);
    return starts;
}

/// Evenly strided subset of [0, n): index i maps to floor(i * n / keep).
std::vector<int> strided_subset(int n, double coverage) {
    const int keep = std::max<int>(1, int(std::llround(coverage * n)));
    std::vector<int> picked;
    picked.reserve(keep);
    for (int i = 0; i < keep; ++i)
        picked.push_back(int(std::int64_t(i) * n / keep));
    return picked;
}

GridSpec patch_spec(const GridSpec& full, int patch, int x0, int y0) {
    return GridSpec(patch, patch, full.dx,
                    {full.origin[0] + x0 * full.dx, full.origin[1] + y0 * full.dx});
}

void copy_into(ScalarField& dst, const ScalarField& src, int x0, int y0) {
    for (int y = 0; y < src.ny(); ++y)
        for (int x = 0; x < src.nx(); ++x) dst(x0 + x, y0 + y) = src(x, y);
}

NpyArray npy_from_tensor(const Tensor& t) {
    NpyArray a;
    a.shape.assign(t.shape.begin(), t.shape.end());
    a.data.assign(t.data.data(), t.data.data() + t.data.size());
    return a;
}

Tensor tensor_from_npy(const NpyArray& a, const std::string& what) {
    std::vector<int> shape;
    for (auto d : a.shape) {
        if (d < 0 || d > INT32_MAX)
            throw FormatError("load_dataset: " + what + " has an out-of-range dimension");
        shape.push_back(int(d));
    }
    Eigen::ArrayXd data =
        Eigen::Map<const Eigen::ArrayXd>(a.data.data(), Eigen::Index(a.data.size()));
    return Tensor(std::move(shape), std::move(data));
}

nlohmann::json manifest_to_json(const DatasetManifest& m) {
    nlohmann::json src{{"path", m.source},     {"coverage", m.coverage},
                       {"patch", m.patch},     {"in_len", m.in_len},
                       {"out_len", m.out_len}, {"stride", m.stride}};
    return nlohmann::json{{"count", m.count},
                          {"scale", m.scale},
                          {"regime", to_string(m.regime)},
                          {"split_seed", m.split_seed},
                          {"train_indices", m.train_indices},
                          {"val_indices", m.val_indices},
                          {"source", src}};
}

DatasetManifest manifest_from_json(const nlohmann::json& j) {
    DatasetManifest m;
    try {
        m.count = j.at("count").get<std::int64_t>();
        m.scale = j.at("scale").get<double>();
        m.regime = regime_from_string(j.at("regime").get<std::string>());
        m.split_seed = j.at("split_seed").get<std::uint64_t>();
        m.train_indices = j.at("train_indices").get<std::vector<std::int64_t>>();
        m.val_indices = j.at("val_indices").get<std::vector<std::int64_t>>();
        const auto& src = j.at("source");
        m.source = src.at("path").get<std::string>();
        m.coverage = src.at("coverage").get<double>();
        m.patch = src.at("patch").get<int>();
        m.in_len = src.at("in_len").get<int>();
        m.out_len = src.at("out_len").get<int>();
        m.stride = src.at("stride").get<int>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("dataset manifest: ") + e.what());
    }
    return m;
}

}  // namespace

std::string to_string(Regime regime) {
    switch (regime) {
        case Regime::T: return "T";
        case Regime::TSdf: return "T-SDF";
        case Regime::P: return "P";
        case Regime::PSdf: return "P-SDF";
    }
    throw ContractError("to_string: unknown regime");
}

Regime regime_from_string(const std::string& name) {
    if (name == "T") return Regime::T;
    if (name == "T-SDF") return Regime::TSdf;
    if (name == "P") return Regime::P;
    if (name == "P-SDF") return Regime::PSdf;
    throw ContractError("regime_from_string: '" + name +
                        "' is not one of T, T-SDF, P, P-SDF");
}

bool regime_uses_sdf(Regime regime) {
    return regime == Regime::TSdf || regime == Regime::PSdf;
}

bool regime_uses_patches(Regime regime) {
    return regime == Regime::P || regime == Regime::PSdf;
}

std::vector<WindowSample> slide_windows(const FieldSeries& series, int in_len,
                                        int out_len, int stride) {
    if (in_len < 1 || out_len < 1 || stride < 1)
        throw ContractError("slide_windows: in_len, out_len, and stride must be positive");
    const int T = int(series.frames.size());
    if (T < in_len + out_len)
        throw ContractError("slide_windows: series has " + std::to_string(T) +
                            " frames, fewer than in_len + out_len = " +
                            std::to_string(in_len + out_len) +
                            "; the dataset would be empty");
    std::vector<WindowSample> windows;
    for (int s : window_starts(T, in_len, out_len, stride)) {
        WindowSample w;
        w.start = s;
        w.inputs.assign(series.frames.begin() + s, series.frames.begin() + s + in_len);
        w.targets.assign(series.frames.begin() + s + in_len,
                         series.frames.begin() + s + in_len + out_len);
        windows.push_back(std::move(w));
    }
    return windows;
}

TileResult tile_patches(const ScalarField& frame, int patch) {
    if (patch < 1) throw ContractError("tile_patches: patch side must be positive");
    const int nx = frame.nx();
    const int ny = frame.ny();
    if (nx % patch != 0)
        throw ContractError("tile_patches: width " + std::to_string(nx) +
                            " is not divisible by patch " + std::to_string(patch));
    if (ny % patch != 0)
        throw ContractError("tile_patches: height " + std::to_string(ny) +
                            " is not divisible by patch " + std::to_string(patch));

    TileResult out;
    out.layout.patch = patch;
    out.layout.grid_cols = nx / patch;
    out.layout.grid_rows = ny / patch;
    out.layout.full = frame.spec;
    for (int r = 0; r < out.layout.grid_rows; ++r) {
        for (int c = 0; c < out.layout.grid_cols; ++c) {
            const int x0 = c * patch;
            const int y0 = r * patch;
            out.layout.origin_x.push_back(x0);
            out.layout.origin_y.push_back(y0);
            ScalarField p(patch_spec(frame.spec, patch, x0, y0));
            for (int y = 0; y < patch; ++y)
                for (int x = 0; x < patch; ++x) p(x, y) = frame(x0 + x, y0 + y);
            out.patches.push_back(std::move(p));
        }
    }
    return out;
}

ScalarField stitch_patches(const std::vector<ScalarField>& patches,
                           const PatchLayout& layout) {
    if (int(patches.size()) != layout.count())
        throw ContractError("stitch_patches: got " + std::to_string(patches.size()) +
                            " patches, layout expects " + std::to_string(layout.count()));
    ScalarField out(layout.full);
    for (int p = 0; p < layout.count(); ++p) {
        if (patches[p].nx() != layout.patch || patches[p].ny() != layout.patch)
            throw ContractError("stitch_patches: patch " + std::to_string(p) +
                                " is not " + std::to_string(layout.patch) + "^2");
        copy_into(out, patches[p], layout.origin_x[p], layout.origin_y[p]);
    }
    return out;
}

ScalarField coord_ramp_x(const GridSpec& spec) {
    ScalarField f(spec);
    for (int y = 0; y < spec.ny; ++y)
        for (int x = 0; x < spec.nx; ++x) f(x, y) = double(x) / spec.nx;
    return f;
}

ScalarField coord_ramp_y(const GridSpec& spec) {
    ScalarField f(spec);
    for (int y = 0; y < spec.ny; ++y)
        for (int x = 0; x < spec.nx; ++x) f(x, y) = double(y) / spec.ny;
    return f;
}

BuiltDataset build_dataset(const FieldSeries& series, const SdfGrid* sdf,
                           const DatasetOptions& options) {
    const bool uses_sdf = regime_uses_sdf(options.regime);
    const bool uses_patches = regime_uses_patches(options.regime);
    if (uses_sdf && sdf == nullptr)
        throw ContractError("build_dataset: regime " + to_string(options.regime) +
                            " requires an SDF grid");
    if (!uses_sdf && sdf != nullptr)
        throw ContractError("build_dataset: regime " + to_string(options.regime) +
                            " does not take an SDF grid");
    if (uses_sdf && (sdf->spec.nx != series.spec.nx || sdf->spec.ny != series.spec.ny))
        throw ContractError("build_dataset: SDF grid is " + std::to_string(sdf->spec.nx) +
                            "x" + std::to_string(sdf->spec.ny) + ", series frames are " +
                            std::to_string(series.spec.nx) + "x" +
                            std::to_string(series.spec.ny));
    if (!(options.coverage > 0.0) || options.coverage > 1.0)
        throw ContractError("build_dataset: coverage must lie in (0, 1]");

    std::vector<WindowSample> windows =
        slide_windows(series, options.in_len, options.out_len, options.stride);
    if (options.coverage < 1.0) {
        std::vector<WindowSample> kept;
        for (int i : strided_subset(int(windows.size()), options.coverage))
            kept.push_back(std::move(windows[i]));
        windows = std::move(kept);
    }

    // The SDF channel is normalized on the full grid (the cap is a property
    // of the whole domain), then tiled like any other frame.
    std::optional<ScalarField> sdf_norm;
    if (uses_sdf) sdf_norm = normalize_sdf(*sdf);

    PatchLayout layout;  // single "patch" covering the frame for T regimes
    std::vector<ScalarField> sdf_tiles;
    if (uses_patches) {
        TileResult probe = tile_patches(series.frames.front(), options.patch);
        layout = probe.layout;
        if (sdf_norm) sdf_tiles = tile_patches(*sdf_norm, options.patch).patches;
    } else {
        layout.patch = 0;
        layout.grid_rows = layout.grid_cols = 1;
        layout.full = series.spec;
        layout.origin_x = {0};
        layout.origin_y = {0};
        if (sdf_norm) sdf_tiles = {*sdf_norm};
    }

    const int n_patches = layout.count();
    const int W = uses_patches ? options.patch : series.spec.nx;
    const int H = uses_patches ? options.patch : series.spec.ny;
    const std::int64_t hw = std::int64_t(H) * W;
    const int C = options.in_len + (uses_sdf ? 1 : 0) + 2;
    const std::int64_t N = std::int64_t(windows.size()) * n_patches;
    if (N > INT32_MAX) throw ContractError("build_dataset: sample count overflows");

    BuiltDataset ds;
    ds.inputs = Tensor::zeros({int(N), C, H, W});
    ds.targets = Tensor::zeros({int(N), options.out_len, H, W});

    const ScalarField ramp_x = coord_ramp_x(GridSpec(W, H, series.spec.dx));
    const ScalarField ramp_y = coord_ramp_y(GridSpec(W, H, series.spec.dx));

    // First pass stores raw magnitudes and per-sample maxima; frames are
    // divided by the training-split scale once the split is known.
    std::vector<double> sample_max(size_t(N), 0.0);
    auto put = [&](Tensor& t, std::int64_t n, int c, const ScalarField& f) {
        t.data.segment((n * t.dim(1) + c) * hw, hw) = f.values;
    };
    for (std::int64_t w = 0; w < std::int64_t(windows.size()); ++w) {
        std::vector<std::vector<ScalarField>> in_tiles(options.in_len);
        std::vector<std::vector<ScalarField>> out_tiles(options.out_len);
        for (int c = 0; c < options.in_len; ++c)
            in_tiles[c] = uses_patches
                              ? tile_patches(windows[w].inputs[c], options.patch).patches
                              : std::vector<ScalarField>{windows[w].inputs[c]};
        for (int c = 0; c < options.out_len; ++c)
            out_tiles[c] = uses_patches
                               ? tile_patches(windows[w].targets[c], options.patch).patches
                               : std::vector<ScalarField>{windows[w].targets[c]};
        for (int p = 0; p < n_patches; ++p) {
            const std::int64_t n = w * n_patches + p;
            double m = 0.0;
            for (int c = 0; c < options.in_len; ++c) {
                put(ds.inputs, n, c, in_tiles[c][p]);
                m = std::max(m, in_tiles[c][p].values.abs().maxCoeff());
            }
            int c = options.in_len;
            if (uses_sdf) put(ds.inputs, n, c++, sdf_tiles[p]);
            put(ds.inputs, n, c++, ramp_x);
            put(ds.inputs, n, c, ramp_y);
            for (int t = 0; t < options.out_len; ++t) {
                put(ds.targets, n, t, out_tiles[t][p]);
                m = std::max(m, out_tiles[t][p].values.abs().maxCoeff());
            }
            sample_max[size_t(n)] = m;
        }
    }

    std::vector<std::int64_t> order(static_cast<std::size_t>(N));
    for (std::int64_t i = 0; i < N; ++i) order[size_t(i)] = i;
    UnitRng rng(options.split_seed);
    shuffle(order, rng);
    const std::int64_t n_train = std::llround(0.8 * double(N));
    DatasetManifest& m = ds.manifest;
    m.train_indices.assign(order.begin(), order.begin() + n_train);
    m.val_indices.assign(order.begin() + n_train, order.end());
    std::sort(m.train_indices.begin(), m.train_indices.end());
    std::sort(m.val_indices.begin(), m.val_indices.end());

    double scale = 0.0;
    for (std::int64_t i : m.train_indices) scale = std::max(scale, sample_max[size_t(i)]);
    if (scale == 0.0) scale = 1.0;

    for (std::int64_t n = 0; n < N; ++n)
        for (int c = 0; c < options.in_len; ++c)
            ds.inputs.data.segment((n * C + c) * hw, hw) /= scale;
    ds.targets.data /= scale;

    m.count = N;
    m.scale = scale;
    m.regime = options.regime;
    m.split_seed = options.split_seed;
    m.source = options.source;
    m.coverage = options.coverage;
    m.patch = uses_patches ? options.patch : 0;
    m.in_len = options.in_len;
    m.out_len = options.out_len;
    m.stride = options.stride;
    return ds;
}

TensorDataset gather_split(const BuiltDataset& dataset,
                           const std::vector<std::int64_t>& indices) {
    if (dataset.inputs.shape.size() != 4 || dataset.targets.shape.size() != 4)
        throw ContractError("gather_split: expected [N, C, H, W] tensors");
    const std::int64_t N = dataset.inputs.dim(0);
    const std::int64_t in_row = dataset.inputs.size() / std::max<std::int64_t>(N, 1);
    const std::int64_t out_row = dataset.targets.size() / std::max<std::int64_t>(N, 1);
    TensorDataset out;
    out.inputs = Tensor::zeros({int(indices.size()), dataset.inputs.dim(1),
                                dataset.inputs.dim(2), dataset.inputs.dim(3)});
    out.targets = Tensor::zeros({int(indices.size()), dataset.targets.dim(1),
                                 dataset.targets.dim(2), dataset.targets.dim(3)});
    for (std::size_t i = 0; i < indices.size(); ++i) {
        const std::int64_t n = indices[i];
        if (n < 0 || n >= N)
            throw ContractError("gather_split: index " + std::to_string(n) +
                                " outside [0, " + std::to_string(N) + ")");
        out.inputs.data.segment(std::int64_t(i) * in_row, in_row) =
            dataset.inputs.data.segment(n * in_row, in_row);
        out.targets.data.segment(std::int64_t(i) * out_row, out_row) =
            dataset.targets.data.segment(n * out_row, out_row);
    }
    return out;
}

void save_dataset(const BuiltDataset& dataset, const std::string& dir) {
    std::filesystem::create_directories(dir);
    write_npy(dir + "/inputs.npy", npy_from_tensor(dataset.inputs));
    write_npy(dir + "/targets.npy", npy_from_tensor(dataset.targets));
    std::ofstream out(dir + "/manifest.json");
    if (!out) throw FormatError("save_dataset: cannot write " + dir + "/manifest.json");
    out << manifest_to_json(dataset.manifest).dump(2) << "\n";
}

BuiltDataset load_dataset(const std::string& dir) {
    std::ifstream in(dir + "/manifest.json");
    if (!in) throw FormatError("load_dataset: cannot open " + dir + "/manifest.json");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("load_dataset: manifest is not valid JSON: ") +
                          e.what());
    }
    BuiltDataset ds;
    ds.manifest = manifest_from_json(j);
    ds.inputs = tensor_from_npy(read_npy(dir + "/inputs.npy"), "inputs");
    ds.targets = tensor_from_npy(read_npy(dir + "/targets.npy"), "targets");
    if (ds.inputs.shape.size() != 4 || ds.targets.shape.size() != 4)
        throw FormatError("load_dataset: sample tensors must be 4-D");
    if (ds.inputs.dim(0) != ds.manifest.count || ds.targets.dim(0) != ds.manifest.count)
        throw FormatError("load_dataset: manifest count does not match tensors");
    const int C = ds.manifest.in_len + (regime_uses_sdf(ds.manifest.regime) ? 1 : 0) + 2;
    if (ds.inputs.dim(1) != C || ds.targets.dim(1) != ds.manifest.out_len)
        throw FormatError("load_dataset: channel counts do not match the manifest regime");
    return ds;
}

} // namespace uwf
