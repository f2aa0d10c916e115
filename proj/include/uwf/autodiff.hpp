#pragma once

#include <Eigen/Core>

#include <functional>
#include <memory>
#include <vector>

#include "uwf/errors.hpp"

namespace uwf {

/// Dense real tensor: row-major float64 storage plus a shape.
struct Tensor {
    std::vector<int> shape;
    Eigen::ArrayXd data;

    Tensor() = default;
    Tensor(std::vector<int> shape_, Eigen::ArrayXd data_)
        : shape(std::move(shape_)), data(std::move(data_)) {
        if (data.size() != element_count(shape))
            throw ContractError("Tensor: data length does not match shape");
    }

    static std::int64_t element_count(const std::vector<int>& shape) {
        std::int64_t n = 1;
        for (int d : shape) {
            if (d < 0) throw ContractError("Tensor: negative dimension");
            n *= d;
        }
        return n;
    }

    static Tensor zeros(std::vector<int> shape) {
        Eigen::ArrayXd d = Eigen::ArrayXd::Zero(element_count(shape));
        return Tensor(std::move(shape), std::move(d));
    }

    std::int64_t size() const { return data.size(); }
    int dim(size_t i) const { return shape.at(i); }
    bool same_shape(const Tensor& o) const { return shape == o.shape; }
};

/// Handle to a tape node.
struct Var {
    int id = -1;
};

/// Describes which Fourier modes a spectral convolution retains: columns
/// kx in [0, mx) plus rows ky in [0, my) and their negative-frequency
/// mirrors. Conjugate extension supplies the negative-kx half, so the full
/// support is the four low-frequency corner blocks of the spectrum and the
/// operator maps real fields to real fields exactly.
struct ModeSet {
    int W = 0, H = 0;   ///< spectrum columns (kx) and rows (ky)
    int mx = 0, my = 0;

    ModeSet() = default;
    ModeSet(int W_, int H_, int mx_, int my_) : W(W_), H(H_), mx(mx_), my(my_) {
        if (mx < 1 || my < 1) throw ContractError("ModeSet: modes must be at least 1");
        if (W < 2 * mx || H < 2 * my)
            throw ContractError("ModeSet: grid must be at least twice the retained modes, got " +
                                std::to_string(W) + "x" + std::to_string(H) + " for modes " +
                                std::to_string(mx) + "/" + std::to_string(my));
    }

    int n_kx() const { return mx; }
    int n_ky() const { return 2 * my - 1; }
    int n_modes() const { return n_kx() * n_ky(); }
    int kx_of(int a) const { return a; }
    int ky_of(int b) const { return b < my ? b : H - (n_ky() - b); }
    int mirror_b(int b) const { return b == 0 ? 0 : n_ky() - b; }

    /// Spectral weight tensor shape for `width` channels: one complex
    /// coefficient per retained (ky, kx) mode and channel pair, stored as
    /// separate real and imaginary tensors of this shape.
    std::vector<int> weight_shape(int width) const { return {n_ky(), mx, width, width}; }
};

/// Append-only reverse-mode tape over dense tensors. Build the graph by
/// calling ops, run backward(loss) once, then read grads off the leaves.
/// All reductions run in a fixed sequential order, so gradients are
/// bit-reproducible run to run.
class Tape {
  public:
    /// Register a leaf. Only leaves with requires_grad receive gradients.
    Var input(Tensor value, bool requires_grad = false);

    /// Elementwise sum of two same-shape tensors.
    Var add(Var a, Var b);

    /// Pointwise GeLU in the exact Gaussian-CDF form x * Phi(x).
    Var gelu(Var x);

    /// Per-pixel affine map over channels: x [B,Cin,H,W], w [Cout,Cin],
    /// b [Cout] -> [B,Cout,H,W].
    Var channel_affine(Var x, Var w, Var b);

    /// Spectral convolution: FFT, per-mode complex contraction against the
    /// (t_re, t_im) weights, conjugate-symmetric inverse FFT. x is
    /// [B,C,H,W]; weights have modes.weight_shape(C).
    Var spectral_conv(Var x, Var t_re, Var t_im, const ModeSet& modes);

    /// Mean over the batch of ||pred - target||_2 / max(||target||_2, 1e-12),
    /// one norm per leading-dimension sample. Scalar result.
    Var relative_l2(Var pred, Var target);

    /// Plain mean squared error over all elements. Scalar result.
    Var mse(Var pred, Var target);

    /// Reverse sweep from a scalar root. One shot per tape.
    void backward(Var root);

    const Tensor& value(Var v) const { return nodes_.at(v.id).value; }
    const Tensor& grad(Var v) const;
    bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }
    size_t node_count() const { return nodes_.size(); }

  private:
    struct Node {
        Tensor value;
        Tensor grad;                       // allocated on first touch
        bool requires_grad = false;
        bool grad_ready = false;
        std::function<void(Tape&)> backprop;   // empty for leaves
    };

    Var push(Tensor value, bool requires_grad, std::function<void(Tape&)> backprop);
    Eigen::ArrayXd& grad_buf(int id);

    std::vector<Node> nodes_;
    bool backward_done_ = false;
};

} // namespace uwf
