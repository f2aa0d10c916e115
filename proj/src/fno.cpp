#include "uwf/fno.hpp"

#include <json.hpp>

#include <cmath>
#include <cstring>
#include <fstream>

#include "uwf/rng.hpp"

namespace uwf {

namespace {

using nlohmann::json;

int n_ky(int modes) { return 2 * modes - 1; }

Tensor uniform_tensor(std::vector<int> shape, double lo, double hi, UnitRng& rng) {
    Eigen::ArrayXd d(Tensor::element_count(shape));
    for (std::int64_t i = 0; i < d.size(); ++i) d[i] = rng.range(lo, hi);
    return Tensor(std::move(shape), std::move(d));
}

Tensor fan_in_tensor(std::vector<int> shape, int fan_in, UnitRng& rng) {
    const double bound = std::sqrt(1.0 / fan_in);
    return uniform_tensor(std::move(shape), -bound, bound, rng);
}

// Allocate every tensor at its declared shape, zero-filled.
FnoParameters zeros_params(const FnoConfig& cfg) {
    FnoParameters p;
    p.config = cfg;
    const int w = cfg.width;
    p.lift_w = Tensor::zeros({w, cfg.in_channels});
    p.lift_b = Tensor::zeros({w});
    p.layers.resize(size_t(cfg.layers));
    const std::vector<int> wshape = {n_ky(cfg.modes), cfg.modes, w, w};
    for (SpectralLayer& l : p.layers) {
        l.t_re = Tensor::zeros(wshape);
        l.t_im = Tensor::zeros(wshape);
        l.m = Tensor::zeros({w, w});
        l.bias = Tensor::zeros({w});
    }
    p.proj1_w = Tensor::zeros({cfg.hidden, w});
    p.proj1_b = Tensor::zeros({cfg.hidden});
    p.proj2_w = Tensor::zeros({cfg.out_channels, cfg.hidden});
    p.proj2_b = Tensor::zeros({cfg.out_channels});
    return p;
}

bool same_architecture(const FnoConfig& a, const FnoConfig& b) {
    return a.modes == b.modes && a.width == b.width && a.layers == b.layers &&
           a.in_channels == b.in_channels && a.out_channels == b.out_channels &&
           a.hidden == b.hidden;
}

} // namespace

void FnoConfig::validate() const {
    if (modes < 1 || width < 1 || layers < 1 || hidden < 1)
        throw ContractError("FnoConfig: modes, width, layers, hidden must be positive");
    if (in_channels < 1 || out_channels < 1)
        throw ContractError("FnoConfig: channel counts must be positive");
}

std::int64_t FnoConfig::parameter_count() const {
    const std::int64_t w = width;
    const std::int64_t spectral = 2 * std::int64_t(n_ky(modes)) * modes * w * w;
    const std::int64_t per_layer = spectral + w * w + w;
    return (w * in_channels + w) + layers * per_layer + (std::int64_t(hidden) * w + hidden) +
           (std::int64_t(out_channels) * hidden + out_channels);
}

std::vector<Tensor*> FnoParameters::tensors() {
    std::vector<Tensor*> out = {&lift_w, &lift_b};
    for (SpectralLayer& l : layers) {
        out.push_back(&l.t_re);
        out.push_back(&l.t_im);
        out.push_back(&l.m);
        out.push_back(&l.bias);
    }
    out.push_back(&proj1_w);
    out.push_back(&proj1_b);
    out.push_back(&proj2_w);
    out.push_back(&proj2_b);
    return out;
}

std::vector<const Tensor*> FnoParameters::tensors() const {
    auto mut = const_cast<FnoParameters*>(this)->tensors();
    return std::vector<const Tensor*>(mut.begin(), mut.end());
}

std::int64_t FnoParameters::parameter_count() const {
    std::int64_t n = 0;
    for (const Tensor* t : tensors()) n += t->size();
    return n;
}

FnoParameters init_fno(const FnoConfig& cfg) {
    cfg.validate();
    UnitRng rng(cfg.seed);
    FnoParameters p;
    p.config = cfg;
    const int w = cfg.width;
    const double spectral_scale = 1.0 / (double(w) * w);
    p.lift_w = fan_in_tensor({w, cfg.in_channels}, cfg.in_channels, rng);
    p.lift_b = fan_in_tensor({w}, cfg.in_channels, rng);
    p.layers.resize(size_t(cfg.layers));
    const std::vector<int> wshape = {n_ky(cfg.modes), cfg.modes, w, w};
    for (SpectralLayer& l : p.layers) {
        l.t_re = uniform_tensor(wshape, 0.0, spectral_scale, rng);
        l.t_im = uniform_tensor(wshape, 0.0, spectral_scale, rng);
        l.m = fan_in_tensor({w, w}, w, rng);
        l.bias = fan_in_tensor({w}, w, rng);
    }
    p.proj1_w = fan_in_tensor({cfg.hidden, w}, w, rng);
    p.proj1_b = fan_in_tensor({cfg.hidden}, w, rng);
    p.proj2_w = fan_in_tensor({cfg.out_channels, cfg.hidden}, cfg.hidden, rng);
    p.proj2_b = fan_in_tensor({cfg.out_channels}, cfg.hidden, rng);
    return p;
}

std::vector<Var> FnoVars::ordered() const {
    std::vector<Var> out = {lift_w, lift_b};
    for (const Layer& l : layers) {
        out.push_back(l.t_re);
        out.push_back(l.t_im);
        out.push_back(l.m);
        out.push_back(l.bias);
    }
    out.push_back(proj1_w);
    out.push_back(proj1_b);
    out.push_back(proj2_w);
    out.push_back(proj2_b);
    return out;
}

FnoVars register_parameters(Tape& tape, const FnoParameters& params, bool requires_grad) {
    FnoVars v;
    v.lift_w = tape.input(params.lift_w, requires_grad);
    v.lift_b = tape.input(params.lift_b, requires_grad);
    for (const SpectralLayer& l : params.layers)
        v.layers.push_back({tape.input(l.t_re, requires_grad), tape.input(l.t_im, requires_grad),
                            tape.input(l.m, requires_grad), tape.input(l.bias, requires_grad)});
    v.proj1_w = tape.input(params.proj1_w, requires_grad);
    v.proj1_b = tape.input(params.proj1_b, requires_grad);
    v.proj2_w = tape.input(params.proj2_w, requires_grad);
    v.proj2_b = tape.input(params.proj2_b, requires_grad);
    return v;
}

FnoActivations fno_forward(Tape& tape, const FnoConfig& cfg, const FnoVars& vars, Var input) {
    const Tensor& in = tape.value(input);
    if (in.shape.size() != 4) throw ContractError("fno_forward: input must be [B,C,H,W]");
    if (in.dim(1) != cfg.in_channels)
        throw ContractError("fno_forward: expected " + std::to_string(cfg.in_channels) +
                            " input channels, got " + std::to_string(in.dim(1)));
    if (int(vars.layers.size()) != cfg.layers)
        throw ContractError("fno_forward: layer count disagrees with the config");
    const ModeSet ms = cfg.mode_set(in.dim(2), in.dim(3));

    FnoActivations act;
    Var w = tape.channel_affine(input, vars.lift_w, vars.lift_b);
    for (const FnoVars::Layer& l : vars.layers) {
        Var pre = tape.add(tape.channel_affine(w, l.m, l.bias),
                           tape.spectral_conv(w, l.t_re, l.t_im, ms));
        act.pre_activations.push_back(pre);
        w = tape.gelu(pre);
    }
    Var h = tape.gelu(tape.channel_affine(w, vars.proj1_w, vars.proj1_b));
    act.output = tape.channel_affine(h, vars.proj2_w, vars.proj2_b);
    return act;
}

// --- FNO1 container ---------------------------------------------------------

void save_params(const FnoParameters& params, const std::string& path) {
    json header = {{"modes", params.config.modes},
                   {"width", params.config.width},
                   {"layers", params.config.layers},
                   {"in_channels", params.config.in_channels},
                   {"out_channels", params.config.out_channels},
                   {"hidden", params.config.hidden},
                   {"seed", params.config.seed}};
    const std::string head = header.dump();
    std::ofstream f(path, std::ios::binary);
    if (!f) throw FormatError("save_params: cannot open " + path);
    f.write("FNO1", 4);
    std::uint64_t n = head.size();
    f.write(reinterpret_cast<const char*>(&n), 8);
    f.write(head.data(), std::streamsize(head.size()));
    for (const Tensor* t : params.tensors())
        f.write(reinterpret_cast<const char*>(t->data.data()),
                std::streamsize(t->size() * std::int64_t(sizeof(double))));
    if (!f) throw FormatError("save_params: write failed for " + path);
}

FnoParameters load_params(const std::string& path, const FnoConfig* expect) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw FormatError("load_params: cannot open " + path);
    char magic[4];
    if (!f.read(magic, 4) || std::memcmp(magic, "FNO1", 4) != 0)
        throw FormatError("load_params: not an FNO1 file");
    std::uint64_t n = 0;
    if (!f.read(reinterpret_cast<char*>(&n), 8) || n > (1u << 20))
        throw FormatError("load_params: bad header length");
    std::string head(n, '\0');
    if (!f.read(head.data(), std::streamsize(n)))
        throw FormatError("load_params: truncated header");
    FnoConfig cfg;
    try {
        json h = json::parse(head);
        cfg.modes = h.at("modes").get<int>();
        cfg.width = h.at("width").get<int>();
        cfg.layers = h.at("layers").get<int>();
        cfg.in_channels = h.at("in_channels").get<int>();
        cfg.out_channels = h.at("out_channels").get<int>();
        cfg.hidden = h.at("hidden").get<int>();
        cfg.seed = h.at("seed").get<std::uint64_t>();
    } catch (const json::exception& e) {
        throw FormatError(std::string("load_params: bad header: ") + e.what());
    }
    cfg.validate();
    if (expect && !same_architecture(cfg, *expect))
        throw ContractError("load_params: file header disagrees with the expected model shape");

    // Allocate at the declared shapes, then fill in declaration order.
    FnoParameters p = zeros_params(cfg);
    for (Tensor* t : p.tensors()) {
        if (!f.read(reinterpret_cast<char*>(t->data.data()),
                    std::streamsize(t->size() * std::int64_t(sizeof(double)))))
            throw FormatError("load_params: truncated tensor data");
    }
    f.peek();
    if (!f.eof()) throw FormatError("load_params: trailing bytes after tensor data");
    return p;
}

} // namespace uwf
