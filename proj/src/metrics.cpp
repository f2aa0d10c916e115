#include "uwf/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "uwf/dataset.hpp"
#include "uwf/errors.hpp"
#include "uwf/fft.hpp"

namespace uwf {

namespace {

void check_aligned(const FieldSeries& pred, const FieldSeries& truth,
                   const char* who) {
    if (pred.size() != truth.size())
        throw ContractError(std::string(who) + ": series lengths differ (" +
                            std::to_string(pred.size()) + " vs " +
                            std::to_string(truth.size()) + ")");
    if (pred.spec.nx != truth.spec.nx || pred.spec.ny != truth.spec.ny)
        throw ContractError(std::string(who) + ": series grids differ");
    if (pred.frames.empty())
        throw ContractError(std::string(who) + ": empty series");
}

/// Shortest-exact decimal for CSV cells, locale-independent.
std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

double RadialSpectrum::total() const {
    double s = 0.0;
    for (double e : bin_energy) s += e;
    return s;
}

RadialSpectrum radial_spectrum(const ScalarField& field) {
    const int n = field.nx();
    if (field.ny() != n)
        throw ContractError("radial_spectrum: field is " + std::to_string(field.nx()) +
                            "x" + std::to_string(field.ny()) + ", expected square");
    CArray hat = fft2_forward_real(field.values, n, n);

    RadialSpectrum spec;
    spec.n_bins = n / 2;
    spec.bin_energy.assign(size_t(spec.n_bins), 0.0);
    for (int ky = 0; ky < n; ++ky) {
        const double fy = ky <= n / 2 ? ky : ky - n;
        for (int kx = 0; kx < n; ++kx) {
            const double fx = kx <= n / 2 ? kx : kx - n;
            const double r = std::sqrt(fx * fx + fy * fy);
            const int bin = std::min(int(r), spec.n_bins - 1);
            spec.bin_energy[size_t(bin)] += std::norm(hat[std::int64_t(ky) * n + kx]);
        }
    }
    return spec;
}

std::vector<double> spectrum_abs_diff(const RadialSpectrum& a, const RadialSpectrum& b,
                                      const std::vector<int>& wave_numbers) {
    if (a.n_bins != b.n_bins)
        throw ContractError("spectrum_abs_diff: bin counts differ (" +
                            std::to_string(a.n_bins) + " vs " +
                            std::to_string(b.n_bins) + ")");
    std::vector<double> out;
    out.reserve(wave_numbers.size());
    for (int k : wave_numbers) {
        if (k < 0 || k > a.n_bins)
            throw ContractError("spectrum_abs_diff: wave number " + std::to_string(k) +
                                " outside [0, " + std::to_string(a.n_bins) + "]");
        const int bin = std::min(k, a.n_bins - 1);  // k == n_bins reads the folded bin
        out.push_back(std::abs(a.bin_energy[size_t(bin)] - b.bin_energy[size_t(bin)]));
    }
    return out;
}

std::pair<double, double> rms_stats(const FieldSeries& pred, const FieldSeries& truth,
                                    int at_frame, int patch) {
    check_aligned(pred, truth, "rms_stats");
    if (at_frame < 0 || at_frame >= pred.size())
        throw ContractError("rms_stats: frame " + std::to_string(at_frame) +
                            " outside [0, " + std::to_string(pred.size()) + ")");
    ScalarField diff(pred.spec);
    diff.values =
        pred.frames[size_t(at_frame)].values - truth.frames[size_t(at_frame)].values;
    TileResult tiled = tile_patches(diff, std::min({patch, pred.spec.nx, pred.spec.ny}));
    double max_rms = 0.0;
    double sum_rms = 0.0;
    for (const ScalarField& p : tiled.patches) {
        const double rms = std::sqrt(p.values.square().mean());
        max_rms = std::max(max_rms, rms);
        sum_rms += rms;
    }
    return {max_rms, sum_rms / double(tiled.patches.size())};
}

std::vector<double> accumulated_abs_error(const FieldSeries& pred,
                                          const FieldSeries& truth, bool running_sum) {
    check_aligned(pred, truth, "accumulated_abs_error");
    std::vector<double> curve;
    curve.reserve(size_t(pred.size()));
    double acc = 0.0;
    for (int t = 0; t < pred.size(); ++t) {
        const double mae =
            (pred.frames[size_t(t)].values - truth.frames[size_t(t)].values)
                .abs()
                .mean();
        acc += mae;
        curve.push_back(running_sum ? acc : mae);
    }
    return curve;
}

double ssim(const ScalarField& a, const ScalarField& b) {
    if (a.nx() != b.nx() || a.ny() != b.ny())
        throw ContractError("ssim: field dims differ");
    const double mu_a = a.values.mean();
    const double mu_b = b.values.mean();
    const double var_a = a.values.square().mean() - mu_a * mu_a;
    const double var_b = b.values.square().mean() - mu_b * mu_b;
    const double cov = (a.values * b.values).mean() - mu_a * mu_b;
    const double lo = std::min(a.values.minCoeff(), b.values.minCoeff());
    const double hi = std::max(a.values.maxCoeff(), b.values.maxCoeff());
    const double L = std::max(hi - lo, 1e-12);
    const double c1 = (0.01 * L) * (0.01 * L);
    const double c2 = (0.03 * L) * (0.03 * L);
    return ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)) /
           ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
}

EvaluationReport evaluate_forecast(const FieldSeries& pred, const FieldSeries& truth,
                                   const EvalOptions& options) {
    check_aligned(pred, truth, "evaluate_forecast");
    if (options.at_frame < 0 || options.at_frame >= pred.size())
        throw ContractError("evaluate_forecast: at_frame " +
                            std::to_string(options.at_frame) + " outside [0, " +
                            std::to_string(pred.size()) + ")");

    EvaluationReport r;
    r.mae = accumulated_abs_error(pred, truth, false);
    r.accumulated_mae = accumulated_abs_error(pred, truth, true);
    r.frame_dt = pred.dt;
    r.at_frame = options.at_frame;
    r.at_time_seconds = (options.at_frame + 1) * pred.dt;
    std::tie(r.max_rms, r.mean_rms) =
        rms_stats(pred, truth, options.at_frame, options.patch);
    r.rms_patch = options.patch;
    r.rms_interpretation =
        "max/mean RMS taken over a " + std::to_string(options.patch) + "x" +
        std::to_string(options.patch) +
        " patch tiling (population statistic is an interpretation)";
    if (!options.wave_numbers.empty()) {
        RadialSpectrum sp = radial_spectrum(pred.frames[size_t(options.at_frame)]);
        RadialSpectrum st = radial_spectrum(truth.frames[size_t(options.at_frame)]);
        r.wave_numbers = options.wave_numbers;
        r.spectrum_diffs = spectrum_abs_diff(sp, st, options.wave_numbers);
    }
    r.ssim_value = ssim(pred.frames[size_t(options.at_frame)],
                        truth.frames[size_t(options.at_frame)]);
    r.threshold_mps = options.threshold;
    r.exceeds_threshold = r.mae[size_t(options.at_frame)] > options.threshold;

    for (double v : r.mae)
        if (!std::isfinite(v))
            throw ContractError("evaluate_forecast: non-finite MAE entry");
    for (double v : r.spectrum_diffs)
        if (!std::isfinite(v))
            throw ContractError("evaluate_forecast: non-finite spectrum entry");
    if (!std::isfinite(r.max_rms) || !std::isfinite(r.mean_rms) ||
        !std::isfinite(r.ssim_value))
        throw ContractError("evaluate_forecast: non-finite report entry");
    return r;
}

nlohmann::json report_to_json(const EvaluationReport& r) {
    return nlohmann::json{{"mae", r.mae},
                          {"accumulated_mae", r.accumulated_mae},
                          {"frame_dt", r.frame_dt},
                          {"at_frame", r.at_frame},
                          {"at_time_seconds", r.at_time_seconds},
                          {"max_rms", r.max_rms},
                          {"mean_rms", r.mean_rms},
                          {"rms_patch", r.rms_patch},
                          {"rms_interpretation", r.rms_interpretation},
                          {"wave_numbers", r.wave_numbers},
                          {"spectrum_abs_diff", r.spectrum_diffs},
                          {"ssim", r.ssim_value},
                          {"threshold_mps", r.threshold_mps},
                          {"exceeds_threshold", r.exceeds_threshold}};
}

void save_report(const EvaluationReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw FormatError("save_report: cannot write " + path);
    out << report_to_json(report).dump(2) << "\n";
}

void write_mae_csv(const EvaluationReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw FormatError("write_mae_csv: cannot write " + path);
    out << "step,time_seconds,mae,accumulated_mae\n";
    for (std::size_t t = 0; t < report.mae.size(); ++t)
        out << t << "," << num((double(t) + 1.0) * report.frame_dt) << ","
            << num(report.mae[t]) << "," << num(report.accumulated_mae[t]) << "\n";
}

void write_spectrum_csv(const RadialSpectrum& pred, const RadialSpectrum& truth,
                        const std::string& path) {
    if (pred.n_bins != truth.n_bins)
        throw ContractError("write_spectrum_csv: bin counts differ");
    std::ofstream out(path);
    if (!out) throw FormatError("write_spectrum_csv: cannot write " + path);
    out << "k,pred_energy,truth_energy,abs_diff\n";
    for (int k = 0; k < pred.n_bins; ++k)
        out << k << "," << num(pred.bin_energy[size_t(k)]) << ","
            << num(truth.bin_energy[size_t(k)]) << ","
            << num(std::abs(pred.bin_energy[size_t(k)] - truth.bin_energy[size_t(k)]))
            << "\n";
}

} // namespace uwf
