#pragma once

#include <optional>
#include <string>
#include <utility>

#include "uwf/dataset.hpp"
#include "uwf/field.hpp"
#include "uwf/fno.hpp"
#include "uwf/sdf.hpp"

namespace uwf {

/// How to run an autoregressive forecast: total frames wanted, the train/
/// test regime, the normalization scale the model was trained with (kept
/// for the whole rollout), the SDF when the regime carries one, and the
/// patch side for P regimes.
struct RolloutPlan {
    int horizon = 10;
    Regime regime = Regime::T;
    double scale = 1.0;  ///< m/s per model unit
    std::optional<SdfGrid> sdf;
    int patch = 64;
};

/// Autoregressive forecast. `initial` holds the model's input frames
/// (normally 5), already divided by plan.scale. Each model call emits
/// out_channels frames; the next call feeds back the last emitted frames;
/// the final call is truncated to land exactly on plan.horizon. P regimes
/// roll every patch out independently (no halo exchange) and stitch per
/// frame. The returned series is de-normalized to m/s.
FieldSeries rollout(const FnoParameters& params, const FieldSeries& initial,
                    const RolloutPlan& plan);

/// Slice `truth` at start_index, normalize the initial frames, roll out,
/// and pair the forecast with the matching truth frames (both m/s).
struct PredictResult {
    FieldSeries forecast;
    FieldSeries truth;
};
PredictResult predict_series(const FnoParameters& params, const FieldSeries& truth,
                             const RolloutPlan& plan, int start_index);

/// Reference baseline: repeat the last observed frame for the whole
/// horizon.
FieldSeries persistence_forecast(const FieldSeries& initial, int horizon);

/// Write <path_base>.npy (T, H, W) and a <path_base>.json sidecar with
/// keys {scale, regime, horizon, model_hash}.
void save_forecast(const FieldSeries& forecast, const RolloutPlan& plan,
                   const std::string& model_hash, const std::string& path_base);

} // namespace uwf
