#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "uwf/autodiff.hpp"

namespace uwf {

/// Architecture hyperparameters. Desk-scale defaults; the full-size
/// "paper" preset is modes 32, width 64.
struct FnoConfig {
    int modes = 12;          ///< retained frequencies per axis
    int width = 32;          ///< lifted channel count
    int layers = 4;
    int in_channels = 8;     ///< 5 input frames + SDF + 2 coordinate ramps
    int out_channels = 10;   ///< forecast frames per call
    int hidden = 128;        ///< projection hidden width
    std::uint64_t seed = 0;  ///< weight-initialization seed

    void validate() const;
    ModeSet mode_set(int H, int W) const { return ModeSet(W, H, modes, modes); }

    /// Total scalar parameter count for this configuration (spectral
    /// weights count real and imaginary parts separately).
    std::int64_t parameter_count() const;

    bool operator==(const FnoConfig&) const = default;
};

/// One spectral layer: complex mode weights (stored as separate real and
/// imaginary tensors of shape [2*modes-1, modes, width, width], covering
/// columns kx in [0, modes) for every retained row; negative-kx columns
/// follow by conjugate symmetry), the local linear bypass M, and a bias.
struct SpectralLayer {
    Tensor t_re, t_im;   // [2*modes-1, modes, width, width]
    Tensor m;            // [width, width]
    Tensor bias;         // [width]
};

/// All learnable tensors. Declaration order (used by the FNO1 file format
/// and the optimizer) is: lift_w, lift_b, then per layer t_re, t_im, m,
/// bias, then proj1_w, proj1_b, proj2_w, proj2_b.
struct FnoParameters {
    FnoConfig config;
    Tensor lift_w, lift_b;             // [width, in_channels], [width]
    std::vector<SpectralLayer> layers;
    Tensor proj1_w, proj1_b;           // [hidden, width], [hidden]
    Tensor proj2_w, proj2_b;           // [out_channels, hidden], [out_channels]

    std::vector<Tensor*> tensors();
    std::vector<const Tensor*> tensors() const;
    std::int64_t parameter_count() const;
};

/// Seeded initialization: spectral weights uniform in [0, 1/width^2),
/// affine maps uniform in +-sqrt(1/fan_in).
FnoParameters init_fno(const FnoConfig& cfg);

/// Tape handles for every parameter tensor, in declaration order.
struct FnoVars {
    Var lift_w, lift_b;
    struct Layer {
        Var t_re, t_im, m, bias;
    };
    std::vector<Layer> layers;
    Var proj1_w, proj1_b, proj2_w, proj2_b;

    std::vector<Var> ordered() const;
};

/// Copy the parameters onto a tape as leaves.
FnoVars register_parameters(Tape& tape, const FnoParameters& params, bool requires_grad);

/// Forward pass bookkeeping: the network output plus each spectral layer's
/// pre-GeLU tensor (exposed for linearity and divergence diagnostics).
struct FnoActivations {
    Var output;                        // [B, out_channels, H, W]
    std::vector<Var> pre_activations;  // one per spectral layer
};

/// Full forward pass on a [B, C, H, W] input: lift, `layers` rounds of
/// GeLU(M w + K w + bias), then the two-stage projection with GeLU between
/// stages. H and W must be powers of two, at least twice `modes`.
FnoActivations fno_forward(Tape& tape, const FnoConfig& cfg, const FnoVars& vars, Var input);

/// Write parameters in the FNO1 container: magic "FNO1", a little-endian
/// u64 JSON-header length, the header (modes, width, layers, channels,
/// hidden, seed), then each tensor's float64 data in declaration order.
void save_params(const FnoParameters& params, const std::string& path);

/// Read an FNO1 file back; bit-exact inverse of save_params. Bad magic or
/// header -> FormatError; short file or trailing bytes -> FormatError.
/// If `expect` is given, a header disagreeing with it -> ContractError.
FnoParameters load_params(const std::string& path, const FnoConfig* expect = nullptr);

} // namespace uwf
