#include "uwf/rollout.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <vector>

#include <json.hpp>

#include "uwf/errors.hpp"
#include "uwf/hash.hpp"
#include "uwf/npy.hpp"

namespace uwf {

std::uint64_t fnv1a64(const void* data, std::size_t n, std::uint64_t seed) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = seed;
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

std::string fnv1a_hex(std::string_view bytes) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  (unsigned long long)fnv1a64(bytes.data(), bytes.size()));
    return buf;
}

std::string file_fnv1a_hex(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("file_fnv1a_hex: cannot open " + path);
    std::uint64_t h = 14695981039346656037ull;
    char buf[1 << 16];
    while (in.read(buf, sizeof buf) || in.gcount() > 0)
        h = fnv1a64(buf, std::size_t(in.gcount()), h);
    char out[17];
    std::snprintf(out, sizeof out, "%016llx", (unsigned long long)h);
    return out;
}

namespace {

/// Per-patch rollout state: the frames the next model call will see.
struct PatchState {
    std::vector<ScalarField> frames;  // exactly n_in, oldest first
};

Tensor assemble_input(const std::vector<PatchState>& state,
                      const std::vector<ScalarField>* sdf_tiles,
                      const ScalarField& ramp_x, const ScalarField& ramp_y) {
    const int B = int(state.size());
    const int n_in = int(state[0].frames.size());
    const int C = n_in + (sdf_tiles ? 1 : 0) + 2;
    const int H = state[0].frames[0].ny();
    const int W = state[0].frames[0].nx();
    const std::int64_t hw = std::int64_t(H) * W;
    Tensor in = Tensor::zeros({B, C, H, W});
    for (int b = 0; b < B; ++b) {
        std::int64_t base = (std::int64_t(b) * C) * hw;
        for (int c = 0; c < n_in; ++c, base += hw)
            in.data.segment(base, hw) = state[b].frames[c].values;
        if (sdf_tiles) {
            in.data.segment(base, hw) = (*sdf_tiles)[b].values;
            base += hw;
        }
        in.data.segment(base, hw) = ramp_x.values;
        in.data.segment(base + hw, hw) = ramp_y.values;
    }
    return in;
}

}  // namespace

FieldSeries rollout(const FnoParameters& params, const FieldSeries& initial,
                    const RolloutPlan& plan) {
    if (plan.horizon < 1) throw ContractError("rollout: horizon must be at least 1");
    if (!(plan.scale > 0.0)) throw ContractError("rollout: scale must be positive");
    const bool uses_sdf = regime_uses_sdf(plan.regime);
    if (uses_sdf && !plan.sdf)
        throw ContractError("rollout: regime " + to_string(plan.regime) +
                            " requires an SDF in the plan");
    if (!uses_sdf && plan.sdf)
        throw ContractError("rollout: regime " + to_string(plan.regime) +
                            " does not take an SDF");
    if (initial.frames.empty()) throw ContractError("rollout: no initial frames");
    const int n_in = int(initial.frames.size());
    const int expect_c = n_in + (uses_sdf ? 1 : 0) + 2;
    if (params.config.in_channels != expect_c)
        throw ContractError("rollout: model takes " +
                            std::to_string(params.config.in_channels) +
                            " channels, plan assembles " + std::to_string(expect_c));
    if (uses_sdf && (plan.sdf->spec.nx != initial.spec.nx ||
                     plan.sdf->spec.ny != initial.spec.ny))
        throw ContractError("rollout: SDF grid does not match the frames");

    const bool uses_patches = regime_uses_patches(plan.regime);

    // Tile the state once; T regimes are a single whole-frame "patch".
    PatchLayout layout;
    std::vector<PatchState> state;
    if (uses_patches) {
        TileResult probe = tile_patches(initial.frames[0], plan.patch);
        layout = probe.layout;
        state.resize(size_t(layout.count()));
        for (int p = 0; p < layout.count(); ++p)
            state[size_t(p)].frames.push_back(std::move(probe.patches[size_t(p)]));
        for (int c = 1; c < n_in; ++c) {
            TileResult t = tile_patches(initial.frames[size_t(c)], plan.patch);
            for (int p = 0; p < layout.count(); ++p)
                state[size_t(p)].frames.push_back(std::move(t.patches[size_t(p)]));
        }
    } else {
        layout.patch = 0;
        layout.grid_rows = layout.grid_cols = 1;
        layout.full = initial.spec;
        layout.origin_x = {0};
        layout.origin_y = {0};
        state.resize(1);
        state[0].frames = initial.frames;
    }
    const int n_patches = int(state.size());
    const int W = state[0].frames[0].nx();
    const int H = state[0].frames[0].ny();
    const std::int64_t hw = std::int64_t(H) * W;

    std::vector<ScalarField> sdf_tiles;
    if (uses_sdf) {
        ScalarField norm = normalize_sdf(*plan.sdf);
        sdf_tiles = uses_patches ? tile_patches(norm, plan.patch).patches
                                 : std::vector<ScalarField>{std::move(norm)};
    }
    const ScalarField ramp_x = coord_ramp_x(GridSpec(W, H, initial.spec.dx));
    const ScalarField ramp_y = coord_ramp_y(GridSpec(W, H, initial.spec.dx));
    const GridSpec sample_spec(W, H, initial.spec.dx);

    FieldSeries out;
    out.spec = initial.spec;
    out.dt = initial.dt;

    const int out_ch = params.config.out_channels;
    while (int(out.frames.size()) < plan.horizon) {
        Tape tape;
        FnoVars vars = register_parameters(tape, params, false);
        Var in = tape.input(assemble_input(state, uses_sdf ? &sdf_tiles : nullptr,
                                           ramp_x, ramp_y));
        FnoActivations acts = fno_forward(tape, params.config, vars, in);
        const Tensor& pred = tape.value(acts.output);  // [B, out_ch, H, W]

        const int take = std::min(out_ch, plan.horizon - int(out.frames.size()));
        std::vector<ScalarField> emitted(static_cast<std::size_t>(n_patches),
                                         ScalarField(sample_spec));
        for (int t = 0; t < out_ch; ++t) {
            for (int p = 0; p < n_patches; ++p) {
                ScalarField f(sample_spec);
                f.values = pred.data.segment((std::int64_t(p) * out_ch + t) * hw, hw);
                emitted[size_t(p)] = f;
                auto& frames = state[size_t(p)].frames;
                frames.push_back(std::move(f));
                frames.erase(frames.begin());
            }
            if (t < take) {
                ScalarField full = uses_patches ? stitch_patches(emitted, layout)
                                                : emitted[0];
                full.spec = initial.spec;
                full.values *= plan.scale;
                out.frames.push_back(std::move(full));
            }
        }
    }
    return out;
}

PredictResult predict_series(const FnoParameters& params, const FieldSeries& truth,
                             const RolloutPlan& plan, int start_index) {
    if (start_index < 0) throw ContractError("predict_series: negative start index");
    if (plan.horizon < 1)
        throw ContractError("predict_series: horizon must be at least 1");
    if (!(plan.scale > 0.0))
        throw ContractError("predict_series: scale must be positive");
    const int n_in =
        params.config.in_channels - 2 - (regime_uses_sdf(plan.regime) ? 1 : 0);
    if (n_in < 1) throw ContractError("predict_series: model has no frame channels");
    const int needed = start_index + n_in + plan.horizon;
    if (needed > truth.size())
        throw ContractError("predict_series: truth has " +
                            std::to_string(truth.size()) + " frames, start " +
                            std::to_string(start_index) + " with " +
                            std::to_string(n_in) + " initial + horizon " +
                            std::to_string(plan.horizon) + " needs " +
                            std::to_string(needed));

    FieldSeries initial;
    initial.spec = truth.spec;
    initial.dt = truth.dt;
    for (int i = 0; i < n_in; ++i) {
        ScalarField f = truth.frames[size_t(start_index + i)];
        f.values /= plan.scale;
        initial.frames.push_back(std::move(f));
    }

    PredictResult r;
    r.forecast = rollout(params, initial, plan);
    r.truth.spec = truth.spec;
    r.truth.dt = truth.dt;
    r.truth.frames.assign(truth.frames.begin() + start_index + n_in,
                          truth.frames.begin() + needed);
    return r;
}

FieldSeries persistence_forecast(const FieldSeries& initial, int horizon) {
    if (horizon < 1)
        throw ContractError("persistence_forecast: horizon must be at least 1");
    if (initial.frames.empty())
        throw ContractError("persistence_forecast: no frames to persist");
    FieldSeries out;
    out.spec = initial.spec;
    out.dt = initial.dt;
    out.frames.assign(size_t(horizon), initial.frames.back());
    return out;
}

void save_forecast(const FieldSeries& forecast, const RolloutPlan& plan,
                   const std::string& model_hash, const std::string& path_base) {
    write_npy(path_base + ".npy", npy_from_series(forecast));
    nlohmann::json j{{"scale", plan.scale},
                     {"regime", to_string(plan.regime)},
                     {"horizon", forecast.size()},
                     {"model_hash", model_hash}};
    std::ofstream out(path_base + ".json");
    if (!out) throw FormatError("save_forecast: cannot write " + path_base + ".json");
    out << j.dump(2) << "\n";
}

} // namespace uwf
