#pragma once

#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "uwf/field.hpp"

namespace uwf {

/// Radial energy spectrum: |x̂|² grouped by integer wave number measured
/// from the spectrum's center, n_bins = min(H,W)/2, bin width 1.
/// Frequencies landing at or beyond n_bins fold into the last bin so the
/// binned total equals Σ|x̂|² exactly (total-energy preservation).
struct RadialSpectrum {
    int n_bins = 0;
    std::vector<double> bin_energy;

    double total() const;
};

/// Square power-of-two fields only; non-square input -> ContractError.
RadialSpectrum radial_spectrum(const ScalarField& field);

/// |a - b| per requested wave number. A wave number equal to n_bins reads
/// the last (folded) bin; anything above that, or negative, is out of
/// range. Mismatched bin counts -> ContractError.
std::vector<double> spectrum_abs_diff(const RadialSpectrum& a, const RadialSpectrum& b,
                                      const std::vector<int>& wave_numbers);

/// Per-patch RMS of (pred - truth) at one frame, reported as (max, mean)
/// over the patch population. T-regime frames get the same virtual tiling
/// so both regimes report comparable statistics; the side is capped at the
/// frame dims, so frames no larger than `patch` form a single patch.
std::pair<double, double> rms_stats(const FieldSeries& pred, const FieldSeries& truth,
                                    int at_frame, int patch = 64);

/// Mean |pred - truth| over cells, one entry per rollout step (m/s).
/// With running_sum the curve is the cumulative sum of those means — kept
/// as a separate view since the source plots plain per-step values.
std::vector<double> accumulated_abs_error(const FieldSeries& pred,
                                          const FieldSeries& truth,
                                          bool running_sum = false);

/// Global SSIM with population moments over the whole field and
/// C1 = (0.01 L)², C2 = (0.03 L)², L = joint max - joint min (floored at
/// 1e-12). Symmetric, 1 at equality, invariant under a -> αa+β (α > 0).
double ssim(const ScalarField& a, const ScalarField& b);

struct EvalOptions {
    int at_frame = 0;               ///< frame for RMS / SSIM / spectra / flag
    int patch = 64;                 ///< RMS patch side
    std::vector<int> wave_numbers;  ///< empty -> skip the spectrum block
    double threshold = 0.5;         ///< m/s, the usability cutoff
};

/// The evaluation battery for one forecast/truth pair.
struct EvaluationReport {
    std::vector<double> mae;              ///< per-step mean absolute error, m/s
    std::vector<double> accumulated_mae;  ///< running sum of the above
    double frame_dt = 0.0;                ///< seconds between rollout steps
    int at_frame = 0;
    double at_time_seconds = 0.0;         ///< (at_frame + 1) * frame_dt
    double max_rms = 0.0;
    double mean_rms = 0.0;
    int rms_patch = 64;
    std::string rms_interpretation;       ///< the patch-statistics reading
    std::vector<int> wave_numbers;
    std::vector<double> spectrum_diffs;   ///< at wave_numbers, at at_frame
    double ssim_value = 0.0;
    double threshold_mps = 0.5;
    bool exceeds_threshold = false;       ///< mae[at_frame] > threshold
};

/// Run the battery. Series must be aligned (same grid, dt, length); the
/// spectrum block needs square power-of-two frames and is skipped when no
/// wave numbers are requested. All report entries are checked finite.
EvaluationReport evaluate_forecast(const FieldSeries& pred, const FieldSeries& truth,
                                   const EvalOptions& options);

/// Stable-key JSON view (byte-identical for identical inputs).
nlohmann::json report_to_json(const EvaluationReport& report);
void save_report(const EvaluationReport& report, const std::string& path);

/// CSV exports for plotting: the MAE curve (step, time, mae, accumulated)
/// and a pair of spectra with their absolute difference (k, pred, truth,
/// abs_diff).
void write_mae_csv(const EvaluationReport& report, const std::string& path);
void write_spectrum_csv(const RadialSpectrum& pred, const RadialSpectrum& truth,
                        const std::string& path);

} // namespace uwf
