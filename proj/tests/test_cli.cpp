#include <doctest.h>

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <vector>

#include "uwf/cli.hpp"
#include "uwf/npy.hpp"

using namespace uwf;
namespace fs = std::filesystem;

namespace {

const fs::path kRoot = fs::temp_directory_path() / "uwf-cli-suite";

std::string at(const std::string& rel) { return (kRoot / rel).string(); }

int cli(std::initializer_list<std::string> args) {
    return run_cli(std::vector<std::string>(args));
}

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    REQUIRE(bool(f));
    std::ostringstream s;
    s << f.rdbuf();
    return s.str();
}

nlohmann::json json_of(const std::string& path) {
    return nlohmann::json::parse(slurp(path));
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    REQUIRE(bool(f));
    f << text;
}

/// 16x16 mask with one rectangular building, x in [5, 9) x y in [6, 9).
void write_block_mask(const std::string& path) {
    NpyArray arr;
    arr.shape = {16, 16};
    arr.data.assign(256, 0.0);
    for (int y = 6; y < 9; ++y)
        for (int x = 5; x < 9; ++x) arr.data[size_t(y * 16 + x)] = 1.0;
    write_npy(path, arr);
}

void write_flow_config(const std::string& path, double reynolds, double dt, double inflow,
                       int iters) {
    nlohmann::json j = {{"reynolds", reynolds},
                        {"grashof", 0.0},
                        {"prandtl", 0.71},
                        {"smagorinsky_cs", 0.17},
                        {"dt", dt},
                        {"inflow_speed_ref", inflow},
                        {"inflow_exponent", 0.25},
                        {"boundary_mode", "channel"},
                        {"projection_iters", iters},
                        {"projection_tol", 1e-3},
                        {"seed", 7}};
    write_text(path, j.dump(2));
}

void write_train_config(const std::string& path, int epochs, double lr) {
    nlohmann::json j = {{"model",
                         {{"modes", 2}, {"width", 4}, {"layers", 2}, {"hidden", 8}, {"seed", 3}}},
                        {"train",
                         {{"epochs", epochs},
                          {"batch_size", 4},
                          {"learning_rate", lr},
                          {"seed", 5},
                          {"loss", "relative_l2"}}}};
    write_text(path, j.dump(2));
}

} // namespace

TEST_CASE("cli: simulate writes frames, diagnostics and a run manifest") {
    fs::remove_all(kRoot);
    fs::create_directories(kRoot);
    write_block_mask(at("mask.npy"));
    write_flow_config(at("flow.json"), 100.0, 0.05, 2.0, 800);

    CHECK(cli({"--config", at("flow.json"), "--out", at("sim"), "--deterministic", "simulate",
               "--mask", at("mask.npy"), "--steps", "40", "--record-every", "2"}) == 0);

    const NpyArray mag = read_npy(at("sim/magnitude.npy"));
    REQUIRE(mag.shape == std::vector<std::int64_t>{20, 16, 16});
    CHECK(read_npy(at("sim/u.npy")).shape == mag.shape);
    CHECK(read_npy(at("sim/v.npy")).shape == mag.shape);

    const nlohmann::json diag = json_of(at("sim/diagnostics.json"));
    CHECK(diag["steps"] == 40);
    CHECK(diag["frames_recorded"] == 20);

    const nlohmann::json run = json_of(at("sim/run.json"));
    CHECK(run["command"] == "simulate");
    CHECK(run["cache_hit"] == false);
    CHECK(run["inputs"].contains(at("mask.npy")));
    CHECK_FALSE(run.contains("timestamp"));   // --deterministic drops it
    CHECK(run["params"]["steps"] == 40);
}

TEST_CASE("cli: sdf command computes distances; global flags fall through") {
    CHECK(cli({"sdf", "--mask", at("mask.npy"), "--cell", "1.0", "--out", at("sdfdir")}) == 0);
    const NpyArray sdf = read_npy(at("sdfdir/sdf.npy"));
    REQUIRE(sdf.shape == std::vector<std::int64_t>{16, 16});
    CHECK(sdf.data[size_t(7 * 16 + 6)] < 0.0);   // inside the block
    CHECK(sdf.data[0] > 0.0);                    // far corner is fluid
    CHECK(json_of(at("sdfdir/run.json"))["command"] == "sdf");
}

TEST_CASE("cli: make-dataset windows, patches and normalizes the series") {
    CHECK(cli({"--out", at("ds"), "make-dataset", "--series", at("sim/magnitude.npy"), "--dx",
               "1", "--dt", "0.1", "--regime", "P-SDF", "--sdf", at("sdfdir/sdf.npy"),
               "--patch", "8"}) == 0);

    // 20 frames -> starts {0, 2, 4}; 16^2 at patch 8 -> 4 patches each
    const nlohmann::json m = json_of(at("ds/manifest.json"));
    CHECK(m["count"] == 12);
    CHECK(m["regime"] == "P-SDF");
    CHECK(m["scale"].get<double>() > 0.0);
    CHECK(read_npy(at("ds/inputs.npy")).shape ==
          std::vector<std::int64_t>{12, 8, 8, 8});   // 5 frames + SDF + 2 ramps
}

TEST_CASE("cli: train runs, caches on identical inputs, retrains on config change") {
    write_train_config(at("train.json"), 2, 1e-3);
    CHECK(cli({"--config", at("train.json"), "--out", at("tr"), "--deterministic", "train",
               "--data", at("ds")}) == 0);
    CHECK(fs::exists(at("tr/model.fno")));
    CHECK(json_of(at("tr/run.json"))["cache_hit"] == false);
    const nlohmann::json result = json_of(at("tr/result.json"));
    CHECK(result["epochs"] == 2);
    CHECK(result["best_epoch"].get<int>() >= 1);

    // byte-stable log under --deterministic (wall clock zeroed)
    const std::string log_before = slurp(at("tr/training_log.jsonl"));
    CHECK(cli({"--config", at("train.json"), "--out", at("tr"), "--deterministic", "train",
               "--data", at("ds")}) == 0);
    CHECK(json_of(at("tr/run.json"))["cache_hit"] == true);
    CHECK(slurp(at("tr/training_log.jsonl")) == log_before);

    write_train_config(at("train3.json"), 3, 1e-3);
    CHECK(cli({"--config", at("train3.json"), "--out", at("tr"), "--deterministic", "train",
               "--data", at("ds")}) == 0);
    CHECK(json_of(at("tr/run.json"))["cache_hit"] == false);
    CHECK(json_of(at("tr/result.json"))["epochs"] == 3);
}

TEST_CASE("cli: evaluate rolls out, scores and reruns byte-identically") {
    const std::initializer_list<std::string> args = {
        "--out", at("ev"), "--deterministic", "evaluate", "--model", at("tr/model.fno"),
        "--case", "W-Blk-P-SDF", "--truth", at("sim/magnitude.npy"), "--dx", "1", "--dt", "0.1",
        "--sdf", at("sdfdir/sdf.npy"), "--data", at("ds"), "--start", "0", "--horizon", "10",
        "--patch", "8", "--at-frame", "9", "--wave-numbers", "2,4"};
    CHECK(cli(args) == 0);

    const nlohmann::json report = json_of(at("ev/report.json"));
    CHECK(report["mae"].size() == 10);
    CHECK(report["at_frame"] == 9);
    CHECK(report["wave_numbers"] == nlohmann::json({2, 4}));
    CHECK(read_npy(at("ev/forecast.npy")).shape == std::vector<std::int64_t>{10, 16, 16});
    const nlohmann::json sidecar = json_of(at("ev/forecast.json"));
    CHECK(sidecar["regime"] == "P-SDF");
    CHECK(sidecar["horizon"] == 10);
    CHECK(fs::exists(at("ev/spectrum.csv")));
    CHECK(fs::exists(at("ev/mae.csv")));

    const std::string bytes = slurp(at("ev/report.json"));
    CHECK(cli(args) == 0);
    CHECK(slurp(at("ev/report.json")) == bytes);   // deterministic rerun

    // a transformed case rotates the truth and the distance field together
    CHECK(cli({"--out", at("ev-rot"), "evaluate", "--model", at("tr/model.fno"), "--case",
               "N-Blk-P-SDF-R", "--truth", at("sim/magnitude.npy"), "--dx", "1", "--dt", "0.1",
               "--sdf", at("sdfdir/sdf.npy"), "--data", at("ds"), "--horizon", "10", "--patch",
               "8"}) == 0);
    CHECK(json_of(at("ev-rot/report.json"))["mae"].size() == 10);
}

TEST_CASE("cli: exit codes classify config, data and divergence failures") {
    // 2 - config problems
    CHECK(cli({"--config", at("nope.json"), "--out", at("x1"), "train", "--data", at("ds")}) == 2);
    CHECK(cli({"--out", at("x2"), "make-dataset", "--series", at("sim/magnitude.npy"),
               "--regime", "Q"}) == 2);
    CHECK(cli({"evaluate"}) == 2);                       // missing required options
    CHECK(cli({}) == 2);                                 // no subcommand
    CHECK(cli({"frobnicate"}) == 2);                     // unknown subcommand
    CHECK(cli({"--out", at("x3"), "evaluate", "--model", at("tr/model.fno"), "--case",
               "X-Blk-P", "--truth", at("sim/magnitude.npy"), "--scale", "1.0"}) == 2);
    CHECK(cli({"--out", at("x4"), "evaluate", "--model", at("tr/model.fno"), "--case",
               "W-Blk-P-SDF", "--truth", at("sim/magnitude.npy"), "--sdf", at("sdfdir/sdf.npy"),
               "--scale", "1.0", "--data", at("ds"), "--patch", "8"}) == 2);  // scale XOR data

    // 3 - data problems
    CHECK(cli({"--out", at("x5"), "make-dataset", "--series", at("missing.npy")}) == 3);
    fs::create_directories(at("empty-ds"));
    CHECK(cli({"--out", at("x6"), "train", "--data", at("empty-ds")}) == 3);
    CHECK(cli({"--out", at("x7"), "evaluate", "--model", at("missing.fno"), "--case",
               "W-Blk-P-SDF", "--truth", at("sim/magnitude.npy"), "--sdf", at("sdfdir/sdf.npy"),
               "--scale", "1.0", "--patch", "8"}) == 3);

    // 4 - training divergence
    write_train_config(at("train-div.json"), 5, 1e200);
    CHECK(cli({"--config", at("train-div.json"), "--out", at("tr-div"), "train", "--data",
               at("ds")}) == 4);

    // 5 - simulation divergence (diffusion far beyond the substep cap)
    write_flow_config(at("flow-hot.json"), 1e-12, 0.1, 1.0, 50);
    CHECK(cli({"--config", at("flow-hot.json"), "--out", at("sim-hot"), "simulate", "--mask",
               at("mask.npy"), "--steps", "5"}) == 5);

    CHECK(cli({"--version"}) == 0);
}

TEST_CASE("cli: matrix trains per regime, tolerates per-case failures") {
    nlohmann::json mj = {
        {"series", at("sim/magnitude.npy")},
        {"dx", 1.0},
        {"dt", 0.1},
        {"mask", at("mask.npy")},
        {"patch", 8},
        {"horizon", 10},
        {"model", {{"modes", 2}, {"width", 4}, {"layers", 2}, {"hidden", 8}, {"seed", 3}}},
        {"train",
         {{"epochs", 1}, {"batch_size", 4}, {"learning_rate", 1e-3}, {"seed", 5}}},
        {"regimes", {"P-SDF", "T"}},
        {"tests",
         {{{"case", "W-Blk-P-SDF"}, {"truth", at("sim/magnitude.npy")}},
          {{"case", "W-Blk-T"}, {"truth", at("sim/magnitude.npy")}},
          {{"case", "E-Blk-T-SDF"}, {"truth", at("sim/magnitude.npy")}},
          {{"case", "N-Blk-P-SDF"}, {"truth", at("missing.npy")}}}}};
    write_text(at("matrix.json"), mj.dump(2));

    CHECK(cli({"--config", at("matrix.json"), "--out", at("mx"), "--deterministic", "matrix"}) ==
          0);

    CHECK(json_of(at("mx/data-P-SDF/manifest.json"))["count"] == 12);
    CHECK(json_of(at("mx/data-T/manifest.json"))["count"] == 3);
    CHECK(fs::exists(at("mx/train-P-SDF/model.fno")));
    CHECK(fs::exists(at("mx/train-T/model.fno")));

    const nlohmann::json rows = json_of(at("mx/summary.json"));
    REQUIRE(rows.size() == 4);
    CHECK(rows[0]["case"] == "W-Blk-P-SDF");
    CHECK_FALSE(rows[0].contains("error"));
    CHECK(rows[0]["max_rms"].get<double>() >= rows[0]["mean_rms"].get<double>());
    CHECK_FALSE(rows[1].contains("error"));
    CHECK(rows[2].contains("error"));   // T-SDF was never trained
    CHECK(rows[2]["error"].get<std::string>().find("T-SDF") != std::string::npos);
    CHECK(rows[3].contains("error"));   // truth file missing
    CHECK(fs::exists(at("mx/cases/W-Blk-P-SDF/report.json")));
    CHECK(fs::exists(at("mx/cases/W-Blk-T/forecast.npy")));

    std::istringstream csv(slurp(at("mx/summary.csv")));
    std::string line;
    int lines = 0;
    while (std::getline(csv, line)) ++lines;
    CHECK(lines == 5);   // header + 4 cases

    // a second run reuses both trained models through the cache
    CHECK(cli({"--config", at("matrix.json"), "--out", at("mx"), "--deterministic", "matrix"}) ==
          0);
    CHECK(json_of(at("mx/train-P-SDF/run.json"))["cache_hit"] == true);
    CHECK(json_of(at("mx/train-T/run.json"))["cache_hit"] == true);

    // an empty test list still produces a (empty) summary and succeeds
    mj["tests"] = nlohmann::json::array();
    mj["regimes"] = {"T"};
    write_text(at("matrix-empty.json"), mj.dump(2));
    CHECK(cli({"--config", at("matrix-empty.json"), "--out", at("mx-empty"), "--deterministic",
               "matrix"}) == 0);
    CHECK(json_of(at("mx-empty/summary.json")) == nlohmann::json::array());
}

TEST_CASE("cli: report collects per-case reports into a summary") {
    CHECK(cli({"--out", at("rs"), "report", "--in", at("mx/cases")}) == 0);
    const nlohmann::json rows = json_of(at("rs/summary.json"));
    REQUIRE(rows.size() == 2);   // the two successful matrix cases
    CHECK(rows[0]["case"] == "W-Blk-P-SDF");
    CHECK(rows[1]["case"] == "W-Blk-T");
    const std::string csv = slurp(at("rs/summary.csv"));
    CHECK(csv.find("W-Blk-T") != std::string::npos);

    CHECK(cli({"--out", at("rs2"), "report", "--in", at("no-such-dir")}) == 3);
}
