#include <doctest.h>

#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "uwf/errors.hpp"
#include "uwf/fft.hpp"
#include "uwf/field.hpp"
#include "uwf/metrics.hpp"
#include "uwf/rng.hpp"

using uwf::ContractError;
using uwf::EvalOptions;
using uwf::EvaluationReport;
using uwf::FieldSeries;
using uwf::GridSpec;
using uwf::RadialSpectrum;
using uwf::ScalarField;

namespace {

ScalarField random_field(const GridSpec& spec, std::uint64_t seed,
                         bool zero_mean = false) {
    uwf::UnitRng rng(seed);
    ScalarField f(spec);
    for (Eigen::Index i = 0; i < f.values.size(); ++i)
        f.values[i] = zero_mean ? rng.unit() - 0.5 : rng.unit();
    return f;
}

FieldSeries series_of(std::vector<ScalarField> frames, double dt = 0.1) {
    FieldSeries s;
    s.spec = frames.front().spec;
    s.dt = dt;
    s.frames = std::move(frames);
    return s;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("radial spectrum: DC, single modes, and folding") {
    // constant field: everything in bin 0
    ScalarField c(GridSpec(32, 32), 2.0);
    RadialSpectrum sc = uwf::radial_spectrum(c);
    REQUIRE(sc.n_bins == 16);
    const double dc = 2.0 * 32 * 32;
    CHECK(sc.bin_energy[0] == doctest::Approx(dc * dc).epsilon(1e-12));
    for (int k = 1; k < 16; ++k) CHECK(sc.bin_energy[size_t(k)] <= 1e-16 * dc * dc);

    // integer wave number along x lands in its own bin
    ScalarField sine(GridSpec(32, 32));
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x) sine(x, y) = std::sin(2.0 * M_PI * 3.0 * x / 32.0);
    RadialSpectrum ss = uwf::radial_spectrum(sine);
    const double total = ss.total();
    CHECK(ss.bin_energy[3] == doctest::Approx(total).epsilon(1e-12));
    for (int k = 0; k < 16; ++k)
        if (k != 3) CHECK(ss.bin_energy[size_t(k)] <= 1e-10 * total);

    // Nyquist column (r = n_bins) folds into the last bin
    ScalarField nyq(GridSpec(16, 16));
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x) nyq(x, y) = (x % 2 == 0) ? 1.0 : -1.0;
    RadialSpectrum sn = uwf::radial_spectrum(nyq);
    REQUIRE(sn.n_bins == 8);
    CHECK(sn.bin_energy[7] == doctest::Approx(sn.total()).epsilon(1e-12));
    CHECK(sn.total() > 0.0);

    CHECK_THROWS_AS(uwf::radial_spectrum(ScalarField(GridSpec(16, 8))), ContractError);
}

TEST_CASE("radial spectrum preserves total energy and quarter-turn symmetry") {
    ScalarField f = random_field(GridSpec(16, 16), 7);
    RadialSpectrum sp = uwf::radial_spectrum(f);

    // direct-summation oracle: sum of |x̂|² over every retained frequency
    uwf::CArray hat = uwf::fft2_forward_real(f.values, 16, 16);
    double direct = 0.0;
    for (Eigen::Index i = 0; i < hat.size(); ++i) direct += std::norm(hat[i]);
    CHECK(sp.total() == doctest::Approx(direct).epsilon(1e-10));

    // binning is symmetric under 90-degree rotation
    RadialSpectrum rot = uwf::radial_spectrum(uwf::rotate90_ccw(f));
    REQUIRE(rot.n_bins == sp.n_bins);
    for (int k = 0; k < sp.n_bins; ++k)
        CHECK(rot.bin_energy[size_t(k)] ==
              doctest::Approx(sp.bin_energy[size_t(k)]).epsilon(1e-10));
}

TEST_CASE("spectrum_abs_diff honors the requested wave numbers") {
    ScalarField a = random_field(GridSpec(256, 256), 3);
    ScalarField b = random_field(GridSpec(256, 256), 4);
    RadialSpectrum sa = uwf::radial_spectrum(a);
    RadialSpectrum sb = uwf::radial_spectrum(b);
    REQUIRE(sa.n_bins == 128);

    std::vector<double> d = uwf::spectrum_abs_diff(sa, sb, {32, 64, 96, 128});
    REQUIRE(d.size() == 4);
    CHECK(d[0] == std::abs(sa.bin_energy[32] - sb.bin_energy[32]));
    // wave number 128 folds to the last bin (127)
    CHECK(d[3] == std::abs(sa.bin_energy[127] - sb.bin_energy[127]));
    for (double v : d) CHECK(v >= 0.0);

    std::vector<double> zero = uwf::spectrum_abs_diff(sa, sa, {32, 64, 96, 128});
    for (double v : zero) CHECK(v == 0.0);

    CHECK_THROWS_AS(uwf::spectrum_abs_diff(sa, sb, {129}), ContractError);
    CHECK_THROWS_AS(uwf::spectrum_abs_diff(sa, sb, {-1}), ContractError);
    RadialSpectrum other = uwf::radial_spectrum(random_field(GridSpec(16, 16), 5));
    CHECK_THROWS_AS(uwf::spectrum_abs_diff(sa, other, {4}), ContractError);
}

TEST_CASE("rms_stats over patches") {
    GridSpec spec(8, 8);
    FieldSeries truth = series_of({random_field(spec, 1), random_field(spec, 2)});
    FieldSeries same = truth;
    auto [mx0, mn0] = uwf::rms_stats(same, truth, 1, 4);
    CHECK(mx0 == 0.0);
    CHECK(mn0 == 0.0);

    // constant offset: every patch reports exactly 1
    FieldSeries off = truth;
    for (auto& f : off.frames) f.values += 1.0;
    auto [mx1, mn1] = uwf::rms_stats(off, truth, 0, 4);
    CHECK(mx1 == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(mn1 == doctest::Approx(1.0).epsilon(1e-14));

    // single 2x2 patch with errors (3, 4, 0, 0): RMS = sqrt(25/4) = 2.5
    ScalarField t2(GridSpec(2, 2), 0.0);
    ScalarField p2 = t2;
    p2(0, 0) = 3.0;
    p2(1, 0) = 4.0;
    auto [mx2, mn2] = uwf::rms_stats(series_of({p2}), series_of({t2}), 0, 2);
    CHECK(mx2 == doctest::Approx(2.5).epsilon(1e-14));
    CHECK(mn2 == doctest::Approx(2.5).epsilon(1e-14));

    // error confined to one patch: max exceeds mean
    FieldSeries one = truth;
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x) one.frames[0](x, y) += 2.0;
    auto [mx3, mn3] = uwf::rms_stats(one, truth, 0, 4);
    CHECK(mx3 == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(mn3 == doctest::Approx(0.5).epsilon(1e-14));

    // misalignment and bad frame index
    FieldSeries shorter = truth;
    shorter.frames.pop_back();
    CHECK_THROWS_AS(uwf::rms_stats(shorter, truth, 0, 4), ContractError);
    FieldSeries other = series_of({random_field(GridSpec(4, 4), 9),
                                   random_field(GridSpec(4, 4), 10)});
    CHECK_THROWS_AS(uwf::rms_stats(other, truth, 0, 4), ContractError);
    CHECK_THROWS_AS(uwf::rms_stats(same, truth, 2, 4), ContractError);
}

TEST_CASE("accumulated_abs_error per step and as a running sum") {
    GridSpec spec(4, 4);
    FieldSeries truth =
        series_of({random_field(spec, 1), random_field(spec, 2), random_field(spec, 3)});
    std::vector<double> zero = uwf::accumulated_abs_error(truth, truth);
    REQUIRE(zero.size() == 3);
    for (double v : zero) CHECK(v == 0.0);

    FieldSeries off = truth;
    for (auto& f : off.frames) f.values += 0.25;
    std::vector<double> per_step = uwf::accumulated_abs_error(off, truth);
    for (double v : per_step) CHECK(v == doctest::Approx(0.25).epsilon(1e-14));
    std::vector<double> running = uwf::accumulated_abs_error(off, truth, true);
    CHECK(running[0] == doctest::Approx(0.25).epsilon(1e-14));
    CHECK(running[2] == doctest::Approx(0.75).epsilon(1e-14));

    FieldSeries shorter = truth;
    shorter.frames.pop_back();
    CHECK_THROWS_AS(uwf::accumulated_abs_error(shorter, truth), ContractError);
}

TEST_CASE("ssim: identity, symmetry, affine invariance, decorrelation") {
    ScalarField a = random_field(GridSpec(16, 16), 21);
    ScalarField b = random_field(GridSpec(16, 16), 22);

    CHECK(uwf::ssim(a, a) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(uwf::ssim(a, b) == doctest::Approx(uwf::ssim(b, a)).epsilon(1e-15));
    CHECK(uwf::ssim(a, b) < 1.0);
    CHECK(uwf::ssim(a, b) >= -1.0);

    // alpha a with alpha > 0 leaves SSIM unchanged (L recomputed); the
    // luminance term quotients out pure scaling
    ScalarField a2 = a;
    ScalarField b2 = b;
    a2.values = 2.7 * a.values;
    b2.values = 2.7 * b.values;
    CHECK(uwf::ssim(a2, b2) == doctest::Approx(uwf::ssim(a, b)).epsilon(1e-9));

    // with matched means the full affine map alpha a + beta is quotiented
    // out too (luminance similarity is 1 on both sides); a shift between
    // fields of unequal means legitimately changes the luminance term
    ScalarField za = a;
    ScalarField zb = b;
    za.values = a.values - a.values.mean();
    zb.values = b.values - b.values.mean();
    ScalarField za2 = za;
    ScalarField zb2 = zb;
    za2.values = 2.7 * za.values - 1.3;
    zb2.values = 2.7 * zb.values - 1.3;
    CHECK(uwf::ssim(za2, zb2) == doctest::Approx(uwf::ssim(za, zb)).epsilon(1e-9));

    // two identical constants are perfectly similar even with zero range
    CHECK(uwf::ssim(ScalarField(GridSpec(4, 4), 3.0), ScalarField(GridSpec(4, 4), 3.0)) ==
          doctest::Approx(1.0).epsilon(1e-15));

    CHECK_THROWS_AS(uwf::ssim(a, ScalarField(GridSpec(8, 8))), ContractError);

    // independent zero-mean fields: |SSIM| stays small across 100 seeds
    for (std::uint64_t s = 0; s < 100; ++s) {
        ScalarField x = random_field(GridSpec(64, 64), 1000 + s, true);
        ScalarField y = random_field(GridSpec(64, 64), 5000 + s, true);
        CHECK(std::abs(uwf::ssim(x, y)) <= 0.2);
    }
}

TEST_CASE("evaluate_forecast assembles the battery and the threshold flag") {
    GridSpec spec(8, 8);
    FieldSeries truth = series_of(
        {random_field(spec, 31), random_field(spec, 32), random_field(spec, 33)}, 0.5);
    FieldSeries pred = truth;
    for (auto& f : pred.frames) f.values += 0.6;

    EvalOptions opt;
    opt.at_frame = 1;
    opt.patch = 4;
    opt.wave_numbers = {0, 1, 4};  // n_bins = 4: includes the folded bin
    EvaluationReport r = uwf::evaluate_forecast(pred, truth, opt);

    REQUIRE(r.mae.size() == 3);
    CHECK(r.mae[1] == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(r.accumulated_mae[2] == doctest::Approx(1.8).epsilon(1e-12));
    CHECK(r.at_time_seconds == doctest::Approx(1.0));  // (1 + 1) * 0.5 s
    CHECK(r.max_rms == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(r.mean_rms == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(r.exceeds_threshold);  // 0.6 > 0.5 m/s
    REQUIRE(r.spectrum_diffs.size() == 3);
    // adding a constant moves only DC energy
    CHECK(r.spectrum_diffs[0] > 0.0);
    CHECK(r.spectrum_diffs[1] <= 1e-9 * r.spectrum_diffs[0]);
    CHECK(r.ssim_value < 1.0);
    CHECK(r.rms_interpretation.find("patch") != std::string::npos);

    EvaluationReport clean = uwf::evaluate_forecast(truth, truth, opt);
    CHECK_FALSE(clean.exceeds_threshold);
    CHECK(clean.ssim_value == doctest::Approx(1.0).epsilon(1e-15));

    EvalOptions bad = opt;
    bad.at_frame = 3;
    CHECK_THROWS_AS(uwf::evaluate_forecast(pred, truth, bad), ContractError);

    // no wave numbers -> spectrum block skipped (works on non-square grids)
    FieldSeries rect_truth = series_of({random_field(GridSpec(8, 4), 41)});
    FieldSeries rect_pred = rect_truth;
    EvalOptions no_spec;
    no_spec.at_frame = 0;
    no_spec.patch = 4;
    EvaluationReport r2 = uwf::evaluate_forecast(rect_pred, rect_truth, no_spec);
    CHECK(r2.spectrum_diffs.empty());
}

TEST_CASE("report serialization is stable and CSVs are well-formed") {
    GridSpec spec(8, 8);
    FieldSeries truth =
        series_of({random_field(spec, 51), random_field(spec, 52)}, 0.1);
    FieldSeries pred = truth;
    for (auto& f : pred.frames) f.values += 0.1;

    EvalOptions opt;
    opt.at_frame = 1;
    opt.patch = 4;
    opt.wave_numbers = {1, 2};
    EvaluationReport r = uwf::evaluate_forecast(pred, truth, opt);

    const std::string dir = "/tmp/uwf_metrics";
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);

    uwf::save_report(r, dir + "/report.json");
    uwf::save_report(r, dir + "/report2.json");
    CHECK(slurp(dir + "/report.json") == slurp(dir + "/report2.json"));

    nlohmann::json j = nlohmann::json::parse(slurp(dir + "/report.json"));
    for (const char* key :
         {"mae", "accumulated_mae", "max_rms", "mean_rms", "ssim", "wave_numbers",
          "spectrum_abs_diff", "threshold_mps", "exceeds_threshold",
          "rms_interpretation", "at_frame", "at_time_seconds"})
        CHECK(j.contains(key));
    CHECK(j["exceeds_threshold"] == false);  // 0.1 < 0.5

    uwf::write_mae_csv(r, dir + "/mae.csv");
    std::string csv = slurp(dir + "/mae.csv");
    CHECK(csv.rfind("step,time_seconds,mae,accumulated_mae\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);  // header + 2 steps

    RadialSpectrum sp = uwf::radial_spectrum(pred.frames[1]);
    RadialSpectrum st = uwf::radial_spectrum(truth.frames[1]);
    uwf::write_spectrum_csv(sp, st, dir + "/spectrum.csv");
    std::string scsv = slurp(dir + "/spectrum.csv");
    CHECK(scsv.rfind("k,pred_energy,truth_energy,abs_diff\n", 0) == 0);
    CHECK(std::count(scsv.begin(), scsv.end(), '\n') == 1 + 4);  // 4 bins
    std::filesystem::remove_all(dir);
}
