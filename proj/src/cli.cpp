#include "uwf/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "uwf/cases.hpp"
#include "uwf/dataset.hpp"
#include "uwf/errors.hpp"
#include "uwf/field.hpp"
#include "uwf/flow.hpp"
#include "uwf/fno.hpp"
#include "uwf/geometry.hpp"
#include "uwf/hash.hpp"
#include "uwf/metrics.hpp"
#include "uwf/npy.hpp"
#include "uwf/rollout.hpp"
#include "uwf/sdf.hpp"
#include "uwf/train.hpp"

namespace fs = std::filesystem;

namespace uwf {
namespace {

struct GlobalOpts {
    std::string config;
    std::string out;
    std::uint64_t seed = 0;
    bool seed_set = false;
    bool deterministic = false;
    std::string preset = "desk";
};

void ensure_out_dir(const std::string& dir) {
    if (dir.empty()) throw ContractError("--out is required for this command");
    fs::create_directories(dir);
}

std::string join_path(const std::string& dir, const std::string& name) {
    return (fs::path(dir) / name).string();
}

/// Config files map to exit code 2, so parse problems surface as ContractError.
nlohmann::json load_config_json(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ContractError("config: cannot open " + path);
    try {
        nlohmann::json j;
        f >> j;
        return j;
    } catch (const nlohmann::json::exception& e) {
        throw ContractError("config: " + path + " is not valid JSON: " + e.what());
    }
}

void write_json_file(const std::string& path, const nlohmann::json& j) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw FormatError("cannot open " + path + " for writing");
    f << j.dump(2) << "\n";
}

std::string utc_timestamp() {
    const std::time_t now = std::time(nullptr);
    std::tm tm_utc{};
    gmtime_r(&now, &tm_utc);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    return buf;
}

/// Content-addressed cache key: tool version + command + resolved
/// parameters + input file hashes. Any change reruns the step.
std::string cache_key(const std::string& command, const nlohmann::json& params,
                      const nlohmann::json& inputs) {
    return fnv1a_hex(std::string(kToolVersion) + "|" + command + "|" + params.dump() + "|" +
                     inputs.dump());
}

void write_run_manifest(const GlobalOpts& g, const std::string& dir, const std::string& command,
                        const nlohmann::json& params, const nlohmann::json& inputs,
                        const std::vector<std::string>& outputs, bool cache_hit) {
    nlohmann::json j;
    j["version"] = kToolVersion;
    j["command"] = command;
    j["preset"] = g.preset;
    j["deterministic"] = g.deterministic;
    if (g.seed_set) j["seed"] = g.seed;
    j["params"] = params;
    j["inputs"] = inputs;
    j["outputs"] = outputs;
    j["key"] = cache_key(command, params, inputs);
    j["cache_hit"] = cache_hit;
    if (!g.deterministic) j["timestamp"] = utc_timestamp();
    write_json_file(join_path(dir, "run.json"), j);
}

/// True when dir/run.json carries the same cache key and every listed
/// output still exists — the precondition for reusing a previous run.
bool cache_valid(const std::string& dir, const std::string& key,
                 const std::vector<std::string>& outputs) {
    const std::string manifest = join_path(dir, "run.json");
    std::ifstream f(manifest);
    if (!f) return false;
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception&) {
        return false;
    }
    if (!j.contains("key") || j["key"] != key) return false;
    for (const std::string& name : outputs)
        if (!fs::exists(join_path(dir, name))) return false;
    return true;
}

BuildingMask mask_from_npy(const std::string& path) {
    const NpyArray arr = read_npy(path);
    if (arr.shape.size() != 2)
        throw FormatError("mask " + path + ": expected a 2-D array, got " +
                          std::to_string(arr.shape.size()) + " dimensions");
    const int ny = int(arr.shape[0]);
    const int nx = int(arr.shape[1]);
    BuildingMask mask(GridSpec(nx, ny));
    for (std::int64_t i = 0; i < arr.element_count(); ++i)
        mask.values[i] = arr.data[size_t(i)] != 0.0 ? 1 : 0;
    return mask;
}

/// Geometry for SDF-aware commands: either a precomputed distance field
/// (--sdf) or a building mask (--mask) run through the exact transform.
std::optional<SdfGrid> load_geometry(const std::string& sdf_path, const std::string& mask_path,
                                     double dx) {
    if (!sdf_path.empty() && !mask_path.empty())
        throw ContractError("pass either --sdf or --mask, not both");
    if (!sdf_path.empty()) {
        ScalarField dist = field_from_npy(read_npy(sdf_path), dx);
        SdfGrid sdf;
        sdf.spec = dist.spec;
        sdf.cap = std::max(dist.spec.nx, dist.spec.ny) * dist.spec.dx;
        sdf.distance = std::move(dist);
        return sdf;
    }
    if (!mask_path.empty()) {
        BuildingMask mask = mask_from_npy(mask_path);
        mask.spec.dx = dx;
        return compute_sdf(mask);
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// model / training configuration

FnoConfig preset_model(const std::string& preset) {
    FnoConfig cfg;                       // header defaults = desk preset
    if (preset == "paper") {
        cfg.modes = 32;
        cfg.width = 64;
    } else if (preset != "desk") {
        throw ContractError("preset: expected \"desk\" or \"paper\", got \"" + preset + "\"");
    }
    return cfg;
}

int config_int(const nlohmann::json& j, const std::string& key) {
    if (!j.is_number_integer())
        throw ContractError("config: " + key + " must be an integer");
    return j.get<int>();
}

double config_num(const nlohmann::json& j, const std::string& key) {
    if (!j.is_number()) throw ContractError("config: " + key + " must be a number");
    return j.get<double>();
}

void apply_model_json(FnoConfig& cfg, const nlohmann::json& j) {
    if (!j.is_object()) throw ContractError("config: \"model\" must be an object");
    for (const auto& item : j.items()) {
        const std::string& k = item.key();
        if (k == "modes") cfg.modes = config_int(item.value(), k);
        else if (k == "width") cfg.width = config_int(item.value(), k);
        else if (k == "layers") cfg.layers = config_int(item.value(), k);
        else if (k == "hidden") cfg.hidden = config_int(item.value(), k);
        else if (k == "seed") cfg.seed = std::uint64_t(config_int(item.value(), k));
        else throw ContractError("config: unknown model key \"" + k + "\"");
    }
}

LossKind loss_from_string(const std::string& s) {
    if (s == "relative_l2") return LossKind::RelativeL2;
    if (s == "mse") return LossKind::Mse;
    throw ContractError("config: loss must be \"relative_l2\" or \"mse\", got \"" + s + "\"");
}

void apply_train_json(TrainConfig& cfg, const nlohmann::json& j) {
    if (!j.is_object()) throw ContractError("config: \"train\" must be an object");
    for (const auto& item : j.items()) {
        const std::string& k = item.key();
        if (k == "epochs") cfg.epochs = config_int(item.value(), k);
        else if (k == "batch_size") cfg.batch_size = config_int(item.value(), k);
        else if (k == "learning_rate") cfg.learning_rate = config_num(item.value(), k);
        else if (k == "beta1") cfg.beta1 = config_num(item.value(), k);
        else if (k == "beta2") cfg.beta2 = config_num(item.value(), k);
        else if (k == "epsilon") cfg.epsilon = config_num(item.value(), k);
        else if (k == "weight_decay") cfg.weight_decay = config_num(item.value(), k);
        else if (k == "seed") cfg.seed = std::uint64_t(config_int(item.value(), k));
        else if (k == "loss") {
            if (!item.value().is_string()) throw ContractError("config: loss must be a string");
            cfg.loss = loss_from_string(item.value().get<std::string>());
        } else {
            throw ContractError("config: unknown train key \"" + k + "\"");
        }
    }
}

nlohmann::json model_to_json(const FnoConfig& cfg) {
    return {{"modes", cfg.modes},       {"width", cfg.width},
            {"layers", cfg.layers},     {"in_channels", cfg.in_channels},
            {"out_channels", cfg.out_channels}, {"hidden", cfg.hidden},
            {"seed", cfg.seed}};
}

nlohmann::json train_to_json(const TrainConfig& cfg) {
    return {{"epochs", cfg.epochs},
            {"batch_size", cfg.batch_size},
            {"learning_rate", cfg.learning_rate},
            {"beta1", cfg.beta1},
            {"beta2", cfg.beta2},
            {"epsilon", cfg.epsilon},
            {"weight_decay", cfg.weight_decay},
            {"seed", cfg.seed},
            {"loss", cfg.loss == LossKind::RelativeL2 ? "relative_l2" : "mse"}};
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateArgs {
    std::string mask;
    int steps = 600;
    int record_every = 1;
};

void cmd_simulate(const GlobalOpts& g, const SimulateArgs& a) {
    ensure_out_dir(g.out);
    FlowConfig cfg;
    if (!g.config.empty()) {
        try {
            cfg = load_flow_config(g.config);
        } catch (const FormatError& e) {
            throw ContractError(e.what());   // unreadable config is a config error
        }
    }
    if (g.seed_set) cfg.seed = g.seed;
    if (a.steps < 1) throw ContractError("simulate: --steps must be positive");
    if (a.record_every < 1) throw ContractError("simulate: --record-every must be positive");

    BuildingMask mask = mask_from_npy(a.mask);
    const SimulationResult result = run_simulation(mask, cfg, a.steps, a.record_every);

    write_npy(join_path(g.out, "magnitude.npy"), npy_from_series(result.magnitude));
    NpyArray comp;
    comp.shape = {std::int64_t(result.velocity.size()), result.magnitude.spec.ny,
                  result.magnitude.spec.nx};
    comp.data.resize(size_t(comp.element_count()));
    for (int c = 0; c < 2; ++c) {
        std::size_t at = 0;
        for (const VelocityField& vel : result.velocity) {
            const ScalarField& f = c == 0 ? vel.u : vel.v;
            std::copy(f.values.data(), f.values.data() + f.values.size(), comp.data.begin() + at);
            at += size_t(f.values.size());
        }
        write_npy(join_path(g.out, c == 0 ? "u.npy" : "v.npy"), comp);
    }

    bool converged = true;
    double max_residual = 0.0;
    for (const StepDiagnostics& d : result.diagnostics) {
        converged = converged && d.projection_converged;
        max_residual = std::max(max_residual, d.projection_residual);
    }
    nlohmann::json diag;
    diag["steps"] = a.steps;
    diag["frames_recorded"] = result.magnitude.size();
    diag["projection_converged"] = converged;
    diag["max_projection_residual"] = max_residual;
    diag["final_correlation"] =
        result.diagnostics.empty() ? 1.0 : result.diagnostics.back().correlation;
    write_json_file(join_path(g.out, "diagnostics.json"), diag);

    nlohmann::json params = flow_config_to_json(cfg);
    params["steps"] = a.steps;
    params["record_every"] = a.record_every;
    nlohmann::json inputs;
    if (!g.config.empty()) inputs[g.config] = file_fnv1a_hex(g.config);
    inputs[a.mask] = file_fnv1a_hex(a.mask);
    write_run_manifest(g, g.out, "simulate", params, inputs,
                       {"magnitude.npy", "u.npy", "v.npy", "diagnostics.json"}, false);
    std::cout << "[simulate] " << result.magnitude.size() << " frames ("
              << result.magnitude.spec.nx << "x" << result.magnitude.spec.ny << ") -> " << g.out
              << "\n";
}

// ---------------------------------------------------------------------------
// sdf

struct SdfArgs {
    std::string mask;
    std::string stl;
    int nx = 0;
    int ny = 0;
    double cell = 1.0;
    double slice_height = 2.0;
};

void cmd_sdf(const GlobalOpts& g, const SdfArgs& a) {
    ensure_out_dir(g.out);
    if (a.mask.empty() == a.stl.empty())
        throw ContractError("sdf: pass exactly one of --mask or --stl");

    BuildingMask mask;
    nlohmann::json inputs;
    std::vector<std::string> outputs = {"sdf.npy"};
    if (!a.stl.empty()) {
        if (a.nx < 1 || a.ny < 1)
            throw ContractError("sdf: --nx and --ny are required with --stl");
        const TriangleMesh mesh = parse_stl_file(a.stl);
        mask = rasterize_footprint(mesh, GridSpec(a.nx, a.ny, a.cell), a.slice_height);
        NpyArray m;
        m.shape = {mask.spec.ny, mask.spec.nx};
        m.data.assign(mask.values.data(), mask.values.data() + mask.values.size());
        write_npy(join_path(g.out, "mask.npy"), m);
        outputs.push_back("mask.npy");
        inputs[a.stl] = file_fnv1a_hex(a.stl);
    } else {
        mask = mask_from_npy(a.mask);
        mask.spec.dx = a.cell;
        inputs[a.mask] = file_fnv1a_hex(a.mask);
    }

    const SdfGrid sdf = compute_sdf(mask);
    write_npy(join_path(g.out, "sdf.npy"), npy_from_field(sdf.distance));

    nlohmann::json params = {{"cell", a.cell}, {"slice_height", a.slice_height}};
    write_run_manifest(g, g.out, "sdf", params, inputs, outputs, false);
    std::cout << "[sdf] " << mask.spec.nx << "x" << mask.spec.ny << " grid, cap " << sdf.cap
              << " m -> " << g.out << "\n";
}

// ---------------------------------------------------------------------------
// make-dataset

struct MakeDatasetArgs {
    std::string series;
    double dx = 1.0;
    double dt = 1.0;
    std::string regime = "P-SDF";
    std::string sdf;
    std::string mask;
    int patch = 64;
    double coverage = 1.0;
    int in_len = 5;
    int out_len = 10;
    int stride = 2;
};

void cmd_make_dataset(const GlobalOpts& g, const MakeDatasetArgs& a) {
    ensure_out_dir(g.out);
    const FieldSeries series = series_from_npy(read_npy(a.series), a.dx, a.dt);
    const std::optional<SdfGrid> sdf = load_geometry(a.sdf, a.mask, a.dx);

    DatasetOptions opt;
    opt.regime = regime_from_string(a.regime);
    opt.split_seed = g.seed_set ? g.seed : 42;
    opt.coverage = a.coverage;
    opt.patch = a.patch;
    opt.in_len = a.in_len;
    opt.out_len = a.out_len;
    opt.stride = a.stride;
    opt.source = a.series;

    const BuiltDataset ds = build_dataset(series, sdf ? &*sdf : nullptr, opt);
    save_dataset(ds, g.out);

    nlohmann::json params = {{"regime", a.regime}, {"dx", a.dx},
                             {"dt", a.dt},         {"patch", a.patch},
                             {"coverage", a.coverage}, {"split_seed", opt.split_seed},
                             {"in_len", a.in_len}, {"out_len", a.out_len},
                             {"stride", a.stride}};
    nlohmann::json inputs;
    inputs[a.series] = file_fnv1a_hex(a.series);
    if (!a.sdf.empty()) inputs[a.sdf] = file_fnv1a_hex(a.sdf);
    if (!a.mask.empty()) inputs[a.mask] = file_fnv1a_hex(a.mask);
    write_run_manifest(g, g.out, "make-dataset", params, inputs,
                       {"inputs.npy", "targets.npy", "manifest.json"}, false);
    std::cout << "[make-dataset] " << ds.manifest.count << " samples (" << a.regime
              << ", scale " << ds.manifest.scale << ") -> " << g.out << "\n";
}

// ---------------------------------------------------------------------------
// train

/// Train an FNO on a stored dataset, reusing out_dir/model.fno when the
/// cache key (configs + dataset content + tool version) already matches.
std::string train_cached(const GlobalOpts& g, const std::string& data_dir,
                         const std::string& out_dir, const nlohmann::json& model_over,
                         const nlohmann::json& train_over) {
    ensure_out_dir(out_dir);
    const std::string model_path = join_path(out_dir, "model.fno");

    nlohmann::json inputs;
    for (const char* name : {"inputs.npy", "targets.npy", "manifest.json"}) {
        const std::string p = join_path(data_dir, name);
        if (!fs::exists(p)) throw FormatError("train: dataset store misses " + p);
        inputs[p] = file_fnv1a_hex(p);
    }

    FnoConfig model_cfg = preset_model(g.preset);
    if (!model_over.is_null()) apply_model_json(model_cfg, model_over);
    TrainConfig train_cfg;
    if (!train_over.is_null()) apply_train_json(train_cfg, train_over);
    if (g.seed_set) {
        model_cfg.seed = g.seed;
        train_cfg.seed = g.seed;
    }

    const BuiltDataset ds = load_dataset(data_dir);
    model_cfg.in_channels = ds.inputs.dim(1);
    model_cfg.out_channels = ds.targets.dim(1);

    const nlohmann::json params = {{"model", model_to_json(model_cfg)},
                                   {"train", train_to_json(train_cfg)}};
    const std::string key = cache_key("train", params, inputs);
    const std::vector<std::string> outputs = {"model.fno", "training_log.jsonl", "result.json"};
    if (cache_valid(out_dir, key, outputs) && fs::exists(model_path)) {
        write_run_manifest(g, out_dir, "train", params, inputs, outputs, true);
        std::cout << "[train] cache hit, reusing " << model_path << "\n";
        return model_path;
    }

    const TensorDataset train_set = gather_split(ds, ds.manifest.train_indices);
    const TensorDataset val_set = gather_split(ds, ds.manifest.val_indices);
    TrainResult result =
        train(train_set, val_set, model_cfg, train_cfg, [&](const EpochLog& e) {
            std::cout << "[train] epoch " << e.epoch << "/" << train_cfg.epochs << " train "
                      << e.train_loss << " val " << e.val_loss << "\n";
        });

    save_params(result.best, model_path);
    if (g.deterministic)
        for (EpochLog& e : result.log) e.wall_seconds = 0.0;
    write_training_log(result.log, join_path(out_dir, "training_log.jsonl"));
    nlohmann::json summary = {{"best_epoch", result.best_epoch},
                              {"best_val", result.best_val},
                              {"epochs", int(result.log.size())},
                              {"parameters", model_cfg.parameter_count()}};
    write_json_file(join_path(out_dir, "result.json"), summary);
    write_run_manifest(g, out_dir, "train", params, inputs, outputs, false);
    std::cout << "[train] best val " << result.best_val << " at epoch " << result.best_epoch
              << " -> " << model_path << "\n";
    return model_path;
}

void cmd_train(const GlobalOpts& g, const std::string& data_dir) {
    nlohmann::json model_over, train_over;
    if (!g.config.empty()) {
        const nlohmann::json j = load_config_json(g.config);
        if (!j.is_object()) throw ContractError("train config: document must be a JSON object");
        for (const auto& item : j.items()) {
            if (item.key() == "model") model_over = item.value();
            else if (item.key() == "train") train_over = item.value();
            else throw ContractError("train config: unknown key \"" + item.key() + "\"");
        }
    }
    train_cached(g, data_dir, g.out, model_over, train_over);
}

// ---------------------------------------------------------------------------
// evaluate

struct EvalJob {
    std::string model_path;
    ExperimentCase kase;
    FieldSeries truth;                 ///< untransformed, physical units
    std::optional<SdfGrid> sdf;        ///< untransformed
    double scale = 0.0;
    int start = 0;
    int horizon = 10;
    int at_frame = -1;                 ///< -1 -> last forecast frame
    int patch = 64;
    std::vector<int> wave_numbers;
    double threshold = 0.5;
    std::string out_dir;
};

SdfGrid transform_sdf(const SdfGrid& sdf, CaseTransform t) {
    SdfGrid out;
    out.distance = apply_case_transform(sdf.distance, t);
    out.spec = out.distance.spec;
    out.cap = sdf.cap;
    return out;
}

/// Shared core of `evaluate` and the matrix runner: transform the truth
/// (and geometry) per the case id, roll the model out, score, and write
/// report.json / mae.csv / spectrum.csv / forecast.* into out_dir.
EvaluationReport run_eval_job(const EvalJob& job) {
    ensure_out_dir(job.out_dir);
    const FnoParameters params = load_params(job.model_path);

    const FieldSeries truth = apply_case_transform(job.truth, job.kase.transform);
    RolloutPlan plan;
    plan.horizon = job.horizon;
    plan.regime = job.kase.regime;
    plan.scale = job.scale;
    plan.patch = job.patch;
    // geometry is ambient context; only SDF regimes consume it
    if (job.sdf && regime_uses_sdf(job.kase.regime))
        plan.sdf = transform_sdf(*job.sdf, job.kase.transform);

    const PredictResult pr = predict_series(params, truth, plan, job.start);

    EvalOptions opt;
    opt.at_frame = job.at_frame < 0 ? job.horizon - 1 : job.at_frame;
    opt.patch = job.patch;
    opt.wave_numbers = job.wave_numbers;
    opt.threshold = job.threshold;
    const EvaluationReport report = evaluate_forecast(pr.forecast, pr.truth, opt);

    save_report(report, join_path(job.out_dir, "report.json"));
    write_mae_csv(report, join_path(job.out_dir, "mae.csv"));
    if (!job.wave_numbers.empty()) {
        const RadialSpectrum ps = radial_spectrum(pr.forecast.frames[size_t(opt.at_frame)]);
        const RadialSpectrum ts = radial_spectrum(pr.truth.frames[size_t(opt.at_frame)]);
        write_spectrum_csv(ps, ts, join_path(job.out_dir, "spectrum.csv"));
    }
    save_forecast(pr.forecast, plan, file_fnv1a_hex(job.model_path),
                  join_path(job.out_dir, "forecast"));

    std::cout << "[evaluate] " << format_case_id(job.kase) << " mae[" << opt.at_frame
              << "]=" << report.mae[size_t(opt.at_frame)] << " max_rms=" << report.max_rms
              << " mean_rms=" << report.mean_rms << " ssim=" << report.ssim_value
              << (report.exceeds_threshold ? "  (exceeds threshold)" : "") << "\n";
    return report;
}

double scale_from_manifest(const std::string& data_dir) {
    const std::string path = join_path(data_dir, "manifest.json");
    std::ifstream f(path);
    if (!f) throw FormatError("evaluate: cannot open " + path);
    nlohmann::json j;
    try {
        f >> j;
        return j.at("scale").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("evaluate: " + path + ": " + e.what());
    }
}

struct EvaluateArgs {
    std::string model;
    std::string case_id;
    std::string truth;
    double dx = 1.0;
    double dt = 1.0;
    std::string sdf;
    std::string mask;
    std::string data;                  ///< dataset dir supplying the scale
    double scale = 0.0;
    int start = 0;
    int horizon = 10;
    int at_frame = -1;
    int patch = 64;
    std::vector<int> wave_numbers;
    double threshold = 0.5;
};

void cmd_evaluate(const GlobalOpts& g, const EvaluateArgs& a) {
    ensure_out_dir(g.out);
    EvalJob job;
    job.model_path = a.model;
    job.kase = parse_case_id(a.case_id);
    job.truth = series_from_npy(read_npy(a.truth), a.dx, a.dt);
    job.sdf = load_geometry(a.sdf, a.mask, a.dx);
    if ((a.scale > 0.0) == !a.data.empty())
        throw ContractError("evaluate: pass exactly one of --scale or --data");
    job.scale = a.scale > 0.0 ? a.scale : scale_from_manifest(a.data);
    job.start = a.start;
    job.horizon = a.horizon;
    job.at_frame = a.at_frame;
    job.patch = a.patch;
    job.wave_numbers = a.wave_numbers;
    job.threshold = a.threshold;
    job.out_dir = g.out;
    run_eval_job(job);

    nlohmann::json params = {{"case", a.case_id},   {"dx", a.dx},
                             {"dt", a.dt},          {"scale", job.scale},
                             {"start", a.start},    {"horizon", a.horizon},
                             {"at_frame", a.at_frame}, {"patch", a.patch},
                             {"wave_numbers", a.wave_numbers}, {"threshold", a.threshold}};
    nlohmann::json inputs;
    inputs[a.model] = file_fnv1a_hex(a.model);
    inputs[a.truth] = file_fnv1a_hex(a.truth);
    if (!a.sdf.empty()) inputs[a.sdf] = file_fnv1a_hex(a.sdf);
    if (!a.mask.empty()) inputs[a.mask] = file_fnv1a_hex(a.mask);
    std::vector<std::string> outputs = {"report.json", "mae.csv", "forecast.npy",
                                        "forecast.json"};
    if (!a.wave_numbers.empty()) outputs.push_back("spectrum.csv");
    write_run_manifest(g, g.out, "evaluate", params, inputs, outputs, false);
}

// ---------------------------------------------------------------------------
// matrix

std::string csv_num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_summary(const nlohmann::json& rows, const std::string& dir) {
    write_json_file(join_path(dir, "summary.json"), rows);
    std::ofstream csv(join_path(dir, "summary.csv"), std::ios::binary);
    if (!csv) throw FormatError("cannot open " + join_path(dir, "summary.csv") + " for writing");
    csv << "case,regime,max_rms,mean_rms,mae_at_frame,ssim,exceeds_threshold,error\n";
    for (const auto& row : rows) {
        csv << row.value("case", std::string()) << "," << row.value("regime", std::string())
            << ",";
        if (row.contains("error")) {
            std::string err = row["error"].get<std::string>();
            std::replace(err.begin(), err.end(), ',', ';');
            std::replace(err.begin(), err.end(), '\n', ' ');
            csv << ",,,,," << err << "\n";
        } else {
            csv << csv_num(row["max_rms"].get<double>()) << ","
                << csv_num(row["mean_rms"].get<double>()) << ","
                << csv_num(row["mae_at_frame"].get<double>()) << ","
                << csv_num(row["ssim"].get<double>()) << ","
                << (row["exceeds_threshold"].get<bool>() ? "true" : "false") << ",\n";
        }
    }
}

void cmd_matrix(const GlobalOpts& g) {
    if (g.config.empty()) throw ContractError("matrix: --config is required");
    ensure_out_dir(g.out);
    const nlohmann::json mj = load_config_json(g.config);
    if (!mj.is_object()) throw ContractError("matrix config: document must be a JSON object");
    static const char* known[] = {"series", "dx",       "dt",      "mask",   "sdf",
                                  "patch",  "coverage", "split_seed", "in_len", "out_len",
                                  "stride", "model",    "train",   "regimes", "tests",
                                  "start",  "horizon",  "at_frame", "wave_numbers", "threshold"};
    for (const auto& item : mj.items()) {
        bool ok = false;
        for (const char* k : known) ok = ok || item.key() == k;
        if (!ok) throw ContractError("matrix config: unknown key \"" + item.key() + "\"");
    }
    if (!mj.contains("series")) throw ContractError("matrix config: missing key \"series\"");
    if (!mj.contains("regimes")) throw ContractError("matrix config: missing key \"regimes\"");

    const std::string series_path = mj["series"].get<std::string>();
    const double dx = mj.value("dx", 1.0);
    const double dt = mj.value("dt", 1.0);
    const std::string sdf_path = mj.value("sdf", std::string());
    const std::string mask_path = mj.value("mask", std::string());
    const FieldSeries series = series_from_npy(read_npy(series_path), dx, dt);
    const std::optional<SdfGrid> sdf = load_geometry(sdf_path, mask_path, dx);

    DatasetOptions dopt;
    dopt.split_seed = g.seed_set ? g.seed : std::uint64_t(mj.value("split_seed", 42));
    dopt.coverage = mj.value("coverage", 1.0);
    dopt.patch = mj.value("patch", 64);
    dopt.in_len = mj.value("in_len", 5);
    dopt.out_len = mj.value("out_len", 10);
    dopt.stride = mj.value("stride", 2);
    dopt.source = series_path;

    const nlohmann::json model_over = mj.value("model", nlohmann::json());
    const nlohmann::json train_over = mj.value("train", nlohmann::json());

    // one dataset + one trained model per requested regime
    std::map<Regime, std::string> model_dirs;
    std::map<Regime, std::string> data_dirs;
    for (const auto& rj : mj["regimes"]) {
        const Regime regime = regime_from_string(rj.get<std::string>());
        const std::string tag = to_string(regime);
        const std::string data_dir = join_path(g.out, "data-" + tag);
        const std::string model_dir = join_path(g.out, "train-" + tag);
        ensure_out_dir(data_dir);

        dopt.regime = regime;
        nlohmann::json dparams = {{"regime", tag},          {"dx", dx},
                                  {"dt", dt},               {"patch", dopt.patch},
                                  {"coverage", dopt.coverage}, {"split_seed", dopt.split_seed},
                                  {"in_len", dopt.in_len},  {"out_len", dopt.out_len},
                                  {"stride", dopt.stride}};
        nlohmann::json dinputs;
        dinputs[series_path] = file_fnv1a_hex(series_path);
        if (!sdf_path.empty()) dinputs[sdf_path] = file_fnv1a_hex(sdf_path);
        if (!mask_path.empty()) dinputs[mask_path] = file_fnv1a_hex(mask_path);
        const std::string dkey = cache_key("make-dataset", dparams, dinputs);
        const std::vector<std::string> douts = {"inputs.npy", "targets.npy", "manifest.json"};
        if (cache_valid(data_dir, dkey, douts)) {
            std::cout << "[matrix] dataset cache hit for " << tag << "\n";
        } else {
            // the shared geometry only enters the SDF-augmented regimes
            const SdfGrid* sdf_ptr = sdf && regime_uses_sdf(regime) ? &*sdf : nullptr;
            const BuiltDataset ds = build_dataset(series, sdf_ptr, dopt);
            save_dataset(ds, data_dir);
            write_run_manifest(g, data_dir, "make-dataset", dparams, dinputs, douts, false);
            std::cout << "[matrix] built dataset " << tag << " (" << ds.manifest.count
                      << " samples)\n";
        }
        train_cached(g, data_dir, model_dir, model_over, train_over);
        data_dirs[regime] = data_dir;
        model_dirs[regime] = model_dir;
    }

    // evaluate every test case; failures become rows, not aborts
    nlohmann::json rows = nlohmann::json::array();
    const nlohmann::json tests = mj.value("tests", nlohmann::json::array());
    for (const auto& tj : tests) {
        std::string case_id = tj.value("case", std::string("?"));
        nlohmann::json row;
        row["case"] = case_id;
        try {
            if (!tj.contains("case") || !tj.contains("truth"))
                throw ContractError("matrix test: needs \"case\" and \"truth\" keys");
            EvalJob job;
            job.kase = parse_case_id(case_id);
            row["regime"] = to_string(job.kase.regime);
            const auto found = model_dirs.find(job.kase.regime);
            if (found == model_dirs.end())
                throw ContractError("matrix: no model trained for regime " +
                                    to_string(job.kase.regime));
            job.model_path = join_path(found->second, "model.fno");
            job.truth = series_from_npy(read_npy(tj["truth"].get<std::string>()), dx, dt);
            job.sdf = load_geometry(tj.value("sdf", sdf_path), tj.value("mask", mask_path), dx);
            job.scale = scale_from_manifest(data_dirs[job.kase.regime]);
            job.start = tj.value("start", mj.value("start", 0));
            job.horizon = tj.value("horizon", mj.value("horizon", 10));
            job.at_frame = tj.value("at_frame", mj.value("at_frame", -1));
            job.patch = dopt.patch;
            job.wave_numbers = tj.value(
                "wave_numbers", mj.value("wave_numbers", std::vector<int>()));
            job.threshold = tj.value("threshold", mj.value("threshold", 0.5));
            job.out_dir = join_path(join_path(g.out, "cases"), case_id);
            const EvaluationReport report = run_eval_job(job);
            row["max_rms"] = report.max_rms;
            row["mean_rms"] = report.mean_rms;
            row["mae_at_frame"] = report.mae.at(size_t(report.at_frame));
            row["ssim"] = report.ssim_value;
            row["exceeds_threshold"] = report.exceeds_threshold;
        } catch (const std::exception& e) {
            row["error"] = e.what();
            std::cout << "[matrix] case " << case_id << " failed: " << e.what() << "\n";
        }
        rows.push_back(row);
    }
    write_summary(rows, g.out);
    std::cout << "[matrix] " << rows.size() << " cases -> " << join_path(g.out, "summary.csv")
              << "\n";
}

// ---------------------------------------------------------------------------
// report

void cmd_report(const GlobalOpts& g, const std::string& in_dir) {
    ensure_out_dir(g.out);
    if (!fs::is_directory(in_dir))
        throw FormatError("report: no such directory " + in_dir);
    std::vector<fs::path> found;
    for (const auto& entry : fs::recursive_directory_iterator(in_dir))
        if (entry.is_regular_file() && entry.path().filename() == "report.json")
            found.push_back(entry.path());
    std::sort(found.begin(), found.end());

    nlohmann::json rows = nlohmann::json::array();
    for (const fs::path& p : found) {
        std::ifstream f(p);
        nlohmann::json j;
        try {
            f >> j;
        } catch (const nlohmann::json::exception& e) {
            throw FormatError("report: " + p.string() + " is not valid JSON: " + e.what());
        }
        nlohmann::json row;
        row["case"] = p.parent_path().filename().string();
        try {
            row["max_rms"] = j.at("max_rms").get<double>();
            row["mean_rms"] = j.at("mean_rms").get<double>();
            row["mae_at_frame"] = j.at("mae").at(j.at("at_frame").get<size_t>()).get<double>();
            row["ssim"] = j.at("ssim").get<double>();
            row["exceeds_threshold"] = j.at("exceeds_threshold").get<bool>();
        } catch (const nlohmann::json::exception& e) {
            throw FormatError("report: " + p.string() + ": " + e.what());
        }
        rows.push_back(row);
    }
    write_summary(rows, g.out);
    std::cout << "[report] " << rows.size() << " reports -> " << join_path(g.out, "summary.csv")
              << "\n";
}

} // namespace

int run_cli(const std::vector<std::string>& args) {
    CLI::App app{"urban wind-field toolkit: simulate, featurize, train, evaluate"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string("uwf ") + kToolVersion);

    GlobalOpts g;
    auto* seed_opt = app.add_option("--seed", g.seed, "override seeds (simulation, split, model, batches)");
    app.add_option("--config,-c", g.config, "JSON config file");
    app.add_option("--out,-o", g.out, "output directory (created if missing)");
    app.add_flag("--deterministic", g.deterministic,
                 "omit timestamps and wall-clock fields from outputs");
    app.add_option("--preset", g.preset, "model size preset")
        ->check(CLI::IsMember({"desk", "paper"}));

    SimulateArgs sim;
    CLI::App* c_sim = app.add_subcommand("simulate", "run the flow solver over a building mask");
    c_sim->fallthrough();
    c_sim->add_option("--mask", sim.mask, "building mask .npy (H, W)")->required();
    c_sim->add_option("--steps", sim.steps, "time steps to integrate");
    c_sim->add_option("--record-every", sim.record_every, "frame recording cadence");

    SdfArgs sdfa;
    CLI::App* c_sdf = app.add_subcommand("sdf", "signed distance field from a mask or STL mesh");
    c_sdf->fallthrough();
    c_sdf->add_option("--mask", sdfa.mask, "building mask .npy");
    c_sdf->add_option("--stl", sdfa.stl, "binary STL file to rasterize");
    c_sdf->add_option("--nx", sdfa.nx, "grid cells in x (with --stl)");
    c_sdf->add_option("--ny", sdfa.ny, "grid cells in y (with --stl)");
    c_sdf->add_option("--cell", sdfa.cell, "cell size in meters");
    c_sdf->add_option("--slice-height", sdfa.slice_height, "footprint slice height (with --stl)");

    MakeDatasetArgs mk;
    CLI::App* c_mk = app.add_subcommand("make-dataset", "window, patch and normalize a series");
    c_mk->fallthrough();
    c_mk->add_option("--series", mk.series, "wind magnitude series .npy (T, H, W)")->required();
    c_mk->add_option("--dx", mk.dx, "cell size in meters");
    c_mk->add_option("--dt", mk.dt, "seconds between frames");
    c_mk->add_option("--regime", mk.regime, "T, T-SDF, P or P-SDF");
    c_mk->add_option("--sdf", mk.sdf, "precomputed distance field .npy");
    c_mk->add_option("--mask", mk.mask, "building mask .npy (distance computed here)");
    c_mk->add_option("--patch", mk.patch, "patch side for P regimes");
    c_mk->add_option("--coverage", mk.coverage, "fraction of windows to keep (0, 1]");
    c_mk->add_option("--in-len", mk.in_len, "input frames per window");
    c_mk->add_option("--out-len", mk.out_len, "target frames per window");
    c_mk->add_option("--stride", mk.stride, "frames between window starts");

    std::string train_data;
    CLI::App* c_tr = app.add_subcommand("train", "train the forecaster on a stored dataset");
    c_tr->fallthrough();
    c_tr->add_option("--data", train_data, "dataset directory from make-dataset")->required();

    EvaluateArgs ev;
    CLI::App* c_ev = app.add_subcommand("evaluate", "roll a model out against a truth series");
    c_ev->fallthrough();
    c_ev->add_option("--model", ev.model, "trained model (.fno)")->required();
    c_ev->add_option("--case", ev.case_id, "case id, e.g. W-Nii-P-SDF-R")->required();
    c_ev->add_option("--truth", ev.truth, "ground-truth series .npy (T, H, W)")->required();
    c_ev->add_option("--dx", ev.dx, "cell size in meters");
    c_ev->add_option("--dt", ev.dt, "seconds between frames");
    c_ev->add_option("--sdf", ev.sdf, "distance field .npy for SDF regimes");
    c_ev->add_option("--mask", ev.mask, "building mask .npy (distance computed here)");
    c_ev->add_option("--data", ev.data, "dataset directory supplying the training scale");
    c_ev->add_option("--scale", ev.scale, "explicit normalization scale (m/s)");
    c_ev->add_option("--start", ev.start, "index of the first conditioning frame");
    c_ev->add_option("--horizon", ev.horizon, "forecast frames");
    c_ev->add_option("--at-frame", ev.at_frame, "frame for RMS/SSIM/spectra (-1 = last)");
    c_ev->add_option("--patch", ev.patch, "patch side for P regimes and the RMS grid");
    c_ev->add_option("--wave-numbers", ev.wave_numbers, "spectrum wave numbers")
        ->delimiter(',');
    c_ev->add_option("--threshold", ev.threshold, "usability MAE threshold (m/s)");

    CLI::App* c_mx = app.add_subcommand("matrix", "train per regime and evaluate a case battery");
    c_mx->fallthrough();

    std::string report_in;
    CLI::App* c_rp = app.add_subcommand("report", "collect report.json files into a summary");
    c_rp->fallthrough();
    c_rp->add_option("--in", report_in, "directory to scan recursively")->required();

    std::vector<std::string> argv_store = args;
    std::vector<char*> argv;
    static char prog[] = "uwf";
    argv.push_back(prog);
    for (std::string& s : argv_store) argv.push_back(s.data());

    try {
        app.parse(int(argv.size()), argv.data());
        g.seed_set = seed_opt->count() > 0;
        if (c_sim->parsed()) cmd_simulate(g, sim);
        else if (c_sdf->parsed()) cmd_sdf(g, sdfa);
        else if (c_mk->parsed()) cmd_make_dataset(g, mk);
        else if (c_tr->parsed()) cmd_train(g, train_data);
        else if (c_ev->parsed()) cmd_evaluate(g, ev);
        else if (c_mx->parsed()) cmd_matrix(g);
        else if (c_rp->parsed()) cmd_report(g, report_in);
        return 0;
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const SimulationDiverged& e) {
        std::cerr << "error: simulation diverged at step " << e.step << ": " << e.what() << "\n";
        return 5;
    } catch (const TrainingDiverged& e) {
        std::cerr << "error: training diverged (epoch " << e.epoch << ", batch " << e.batch
                  << "): " << e.what() << "\n";
        return 4;
    } catch (const FormatError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const UnsupportedError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const ContractError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

} // namespace uwf
