#include "uwf/autodiff.hpp"

#include <unsupported/Eigen/SpecialFunctions>

#include <cmath>

#include "uwf/fft.hpp"

namespace uwf {

namespace {

using RMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapM = Eigen::Map<RMat>;
using CMapM = Eigen::Map<const RMat>;

constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;

// --- staged transforms for the spectral branch ---------------------------
//
// Only Fourier columns kx in [0, mx) and their conjugate mirrors ever carry
// weight, so the 2D transforms run as: full row FFTs, then column FFTs for
// just those 2*mx-1 columns (and the reverse on the way back). Two real
// fields ride in one complex transform.

int kxe_of(const ModeSet& ms, int slot) {
    return slot < ms.mx ? slot : ms.W - (2 * ms.mx - 1) + slot;
}

int mirror_slot(int a, int mx) { return a == 0 ? 0 : 2 * mx - 1 - a; }

// fa/fb -> compact spectrum zc[slot*H + ky] over the retained column set.
void packed_forward_fft(const double* fa, const double* fb, const ModeSet& ms, Complex* zc) {
    const int H = ms.H, W = ms.W;
    const fft::Plan& row_plan = fft::plan_for(W);
    const fft::Plan& col_plan = fft::plan_for(H);
    std::vector<Complex> grid(size_t(H) * W);
    if (fb) {
        for (std::int64_t i = 0; i < std::int64_t(H) * W; ++i) grid[i] = Complex(fa[i], fb[i]);
    } else {
        for (std::int64_t i = 0; i < std::int64_t(H) * W; ++i) grid[i] = Complex(fa[i], 0.0);
    }
    for (int y = 0; y < H; ++y) fft::transform(grid.data() + std::int64_t(y) * W, row_plan, false);
    std::vector<Complex> col(H);
    const int n_slots = 2 * ms.mx - 1;
    for (int s = 0; s < n_slots; ++s) {
        const int kx = kxe_of(ms, s);
        for (int y = 0; y < H; ++y) col[y] = grid[std::int64_t(y) * W + kx];
        fft::transform(col.data(), col_plan, false);
        std::copy(col.begin(), col.end(), zc + std::int64_t(s) * H);
    }
}

// Compact Hermitian spectrum -> adds scale*Re into ya and scale*Im into yb.
void packed_inverse_fft(Complex* zc, const ModeSet& ms, double scale, double* ya, double* yb) {
    const int H = ms.H, W = ms.W;
    const fft::Plan& row_plan = fft::plan_for(W);
    const fft::Plan& col_plan = fft::plan_for(H);
    const int n_slots = 2 * ms.mx - 1;
    for (int s = 0; s < n_slots; ++s)
        fft::transform(zc + std::int64_t(s) * H, col_plan, true);
    std::vector<Complex> grid(size_t(H) * W, Complex(0.0, 0.0));
    for (int s = 0; s < n_slots; ++s) {
        const int kx = kxe_of(ms, s);
        for (int y = 0; y < H; ++y) grid[std::int64_t(y) * W + kx] = zc[std::int64_t(s) * H + y];
    }
    for (int y = 0; y < H; ++y) fft::transform(grid.data() + std::int64_t(y) * W, row_plan, true);
    if (yb) {
        for (std::int64_t i = 0; i < std::int64_t(H) * W; ++i) {
            ya[i] += scale * grid[i].real();
            yb[i] += scale * grid[i].imag();
        }
    } else {
        for (std::int64_t i = 0; i < std::int64_t(H) * W; ++i) ya[i] += scale * grid[i].real();
    }
}

// Retained-mode coefficients of the channel block x[b, :, :, :], written
// into the mode-major re/im buffers at [m*B*C + b*C + c].
void gather_mode_coefficients(const double* x, int b, int B, int C, const ModeSet& ms,
                              double* out_re, double* out_im) {
    const int H = ms.H, W = ms.W;
    const std::int64_t HW = std::int64_t(H) * W;
    std::vector<Complex> zc(size_t(2 * ms.mx - 1) * H);
    for (int c = 0; c < C; c += 2) {
        const double* fa = x + (std::int64_t(b) * C + c) * HW;
        const double* fb = c + 1 < C ? fa + HW : nullptr;
        packed_forward_fft(fa, fb, ms, zc.data());
        for (int b2 = 0; b2 < ms.n_ky(); ++b2) {
            const int ky = ms.ky_of(b2);
            const int kym = (H - ky) % H;
            for (int a = 0; a < ms.mx; ++a) {
                const Complex z1 = zc[std::int64_t(a) * H + ky];
                const Complex z2 = zc[std::int64_t(mirror_slot(a, ms.mx)) * H + kym];
                const Complex f = 0.5 * (z1 + std::conj(z2));
                const std::int64_t m = std::int64_t(b2) * ms.mx + a;
                const std::int64_t at = m * B * C + std::int64_t(b) * C + c;
                out_re[at] = f.real();
                out_im[at] = f.imag();
                if (fb) {
                    const Complex g = Complex(0.0, -0.5) * (z1 - std::conj(z2));
                    out_re[at + 1] = g.real();
                    out_im[at + 1] = g.imag();
                }
            }
        }
    }
}

// Inverse of the gather: place mode coefficients plus their conjugate
// mirrors into the compact column buffer. Bins in the kx = 0 column are
// shared between a mode and its row mirror, so contributions there always
// enter at half weight and sum to the Hermitian-projected value; kx > 0
// bins take `pos_kx_weight` (1 for the forward extension, 1/2 for the
// adjoint, where the two half-placements have equal real inverse parts).
void scatter_hermitian(const double* v_re, const double* v_im, int b, int B, int C, int c,
                       const ModeSet& ms, double pos_kx_weight, Complex* zc) {
    const int H = ms.H;
    const bool pair = c + 1 < C;
    std::fill(zc, zc + std::int64_t(2 * ms.mx - 1) * H, Complex(0.0, 0.0));
    for (int b2 = 0; b2 < ms.n_ky(); ++b2) {
        const int ky = ms.ky_of(b2);
        const int kym = (H - ky) % H;
        for (int a = 0; a < ms.mx; ++a) {
            const double wgt = a == 0 ? 0.5 : pos_kx_weight;
            const std::int64_t m = std::int64_t(b2) * ms.mx + a;
            const std::int64_t at = m * B * C + std::int64_t(b) * C + c;
            const Complex v1(v_re[at], v_im[at]);
            const Complex v2 = pair ? Complex(v_re[at + 1], v_im[at + 1]) : Complex(0.0, 0.0);
            zc[std::int64_t(a) * H + ky] += wgt * (v1 + Complex(0.0, 1.0) * v2);
            zc[std::int64_t(mirror_slot(a, ms.mx)) * H + kym] +=
                wgt * (std::conj(v1) + Complex(0.0, 1.0) * std::conj(v2));
        }
    }
}

} // namespace

// --- tape plumbing --------------------------------------------------------

Var Tape::push(Tensor value, bool requires_grad, std::function<void(Tape&)> backprop) {
    nodes_.push_back(Node{std::move(value), Tensor{}, requires_grad, false, std::move(backprop)});
    return Var{int(nodes_.size()) - 1};
}

Eigen::ArrayXd& Tape::grad_buf(int id) {
    Node& n = nodes_.at(id);
    if (!n.grad_ready) {
        n.grad = Tensor::zeros(n.value.shape);
        n.grad_ready = true;
    }
    return n.grad.data;
}

const Tensor& Tape::grad(Var v) const {
    const Node& n = nodes_.at(v.id);
    if (!n.grad_ready)
        throw ContractError("Tape::grad: no gradient flowed to this node (run backward first)");
    return n.grad;
}

Var Tape::input(Tensor value, bool requires_grad) {
    return push(std::move(value), requires_grad, nullptr);
}

void Tape::backward(Var root) {
    if (backward_done_) throw ContractError("Tape::backward: tape already swept");
    backward_done_ = true;
    const Node& r = nodes_.at(root.id);
    if (r.value.size() != 1)
        throw ContractError("Tape::backward: root must be a scalar");
    grad_buf(root.id).setConstant(1.0);
    for (int id = root.id; id >= 0; --id) {
        Node& n = nodes_[size_t(id)];
        if (n.grad_ready && n.backprop) n.backprop(*this);
    }
}

// --- pointwise ops ---------------------------------------------------------

Var Tape::add(Var a, Var b) {
    const Tensor& va = value(a);
    const Tensor& vb = value(b);
    if (!va.same_shape(vb)) throw ContractError("add: shape mismatch");
    Tensor out(va.shape, va.data + vb.data);
    bool rg = requires_grad(a) || requires_grad(b);
    Var self{int(nodes_.size())};
    return push(std::move(out), rg, [a, b, self](Tape& t) {
        const Eigen::ArrayXd& g = t.grad(self).data;
        if (t.requires_grad(a)) t.grad_buf(a.id) += g;
        if (t.requires_grad(b)) t.grad_buf(b.id) += g;
    });
}

Var Tape::gelu(Var x) {
    const Tensor& vx = value(x);
    auto cdf = std::make_shared<Eigen::ArrayXd>(0.5 * (1.0 + (vx.data * kInvSqrt2).erf()));
    Tensor out(vx.shape, vx.data * (*cdf));
    Var self{int(nodes_.size())};
    return push(std::move(out), requires_grad(x), [x, self, cdf](Tape& t) {
        if (!t.requires_grad(x)) return;
        const Eigen::ArrayXd& g = t.grad(self).data;
        const Eigen::ArrayXd& xv = t.value(x).data;
        // d/dx [x Phi(x)] = Phi(x) + x phi(x)
        t.grad_buf(x.id) += g * (*cdf + xv * (-0.5 * xv.square()).exp() * kInvSqrt2Pi);
    });
}

// --- channel-wise affine ----------------------------------------------------

Var Tape::channel_affine(Var x, Var w, Var b) {
    const Tensor& vx = value(x);
    const Tensor& vw = value(w);
    const Tensor& vb = value(b);
    if (vx.shape.size() != 4) throw ContractError("channel_affine: x must be [B,C,H,W]");
    if (vw.shape.size() != 2 || vb.shape.size() != 1)
        throw ContractError("channel_affine: w must be [Cout,Cin], b [Cout]");
    const int B = vx.dim(0), C = vx.dim(1), H = vx.dim(2), W = vx.dim(3);
    const int Co = vw.dim(0);
    if (vw.dim(1) != C || vb.dim(0) != Co)
        throw ContractError("channel_affine: channel counts disagree");
    const std::int64_t HW = std::int64_t(H) * W;

    Tensor out = Tensor::zeros({B, Co, H, W});
    {
        CMapM Wm(vw.data.data(), Co, C);
        Eigen::Map<const Eigen::VectorXd> bv(vb.data.data(), Co);
        for (int s = 0; s < B; ++s) {
            CMapM X(vx.data.data() + s * C * HW, C, HW);
            MapM Y(out.data.data() + s * Co * HW, Co, HW);
            Y.noalias() = Wm * X;
            Y.colwise() += bv;
        }
    }
    bool rg = requires_grad(x) || requires_grad(w) || requires_grad(b);
    Var self{int(nodes_.size())};
    return push(std::move(out), rg, [x, w, b, self, B, C, Co, HW](Tape& t) {
        const Eigen::ArrayXd& g = t.grad(self).data;
        const Tensor& vx = t.value(x);
        const Tensor& vw = t.value(w);
        CMapM Wm(vw.data.data(), Co, C);
        for (int s = 0; s < B; ++s) {
            CMapM dY(g.data() + s * Co * HW, Co, HW);
            CMapM X(vx.data.data() + s * C * HW, C, HW);
            if (t.requires_grad(x)) {
                MapM dX(t.grad_buf(x.id).data() + s * C * HW, C, HW);
                dX.noalias() += Wm.transpose() * dY;
            }
            if (t.requires_grad(w)) {
                MapM dW(t.grad_buf(w.id).data(), Co, C);
                dW.noalias() += dY * X.transpose();
            }
            if (t.requires_grad(b)) {
                Eigen::Map<Eigen::VectorXd> db(t.grad_buf(b.id).data(), Co);
                db.noalias() += dY.rowwise().sum();
            }
        }
    });
}

// --- spectral convolution ----------------------------------------------------

Var Tape::spectral_conv(Var x, Var t_re, Var t_im, const ModeSet& ms) {
    const Tensor& vx = value(x);
    if (vx.shape.size() != 4) throw ContractError("spectral_conv: x must be [B,C,H,W]");
    const int B = vx.dim(0), C = vx.dim(1), H = vx.dim(2), W = vx.dim(3);
    if (H != ms.H || W != ms.W)
        throw ContractError("spectral_conv: field size disagrees with the mode set");
    const auto wshape = ms.weight_shape(C);
    if (value(t_re).shape != wshape || value(t_im).shape != wshape)
        throw ContractError("spectral_conv: weight tensors have the wrong shape");
    const std::int64_t HW = std::int64_t(H) * W;
    const std::int64_t M = ms.n_modes();
    const std::int64_t BC = std::int64_t(B) * C;

    // Retained coefficients of the input, kept for the weight gradient.
    auto xhat_re = std::make_shared<Eigen::ArrayXd>(M * BC);
    auto xhat_im = std::make_shared<Eigen::ArrayXd>(M * BC);
    for (int s = 0; s < B; ++s)
        gather_mode_coefficients(vx.data.data(), s, B, C, ms, xhat_re->data(), xhat_im->data());

    // Per-mode contraction y = T x as four real GEMMs per mode.
    Eigen::ArrayXd yhat_re(M * BC), yhat_im(M * BC);
    {
        const double* tre = value(t_re).data.data();
        const double* tim = value(t_im).data.data();
        for (std::int64_t m = 0; m < M; ++m) {
            CMapM Tre(tre + m * C * C, C, C);
            CMapM Tim(tim + m * C * C, C, C);
            CMapM Xre(xhat_re->data() + m * BC, B, C);
            CMapM Xim(xhat_im->data() + m * BC, B, C);
            MapM Yre(yhat_re.data() + m * BC, B, C);
            MapM Yim(yhat_im.data() + m * BC, B, C);
            Yre.noalias() = Xre * Tre.transpose();
            Yre.noalias() -= Xim * Tim.transpose();
            Yim.noalias() = Xre * Tim.transpose();
            Yim.noalias() += Xim * Tre.transpose();
        }
    }

    // Back to physical space through the conjugate-symmetric extension; the
    // result is real by construction.
    Tensor out = Tensor::zeros({B, C, H, W});
    {
        std::vector<Complex> zc(size_t(2 * ms.mx - 1) * H);
        for (int s = 0; s < B; ++s) {
            for (int c = 0; c < C; c += 2) {
                scatter_hermitian(yhat_re.data(), yhat_im.data(), s, B, C, c, ms, 1.0, zc.data());
                double* ya = out.data.data() + (std::int64_t(s) * C + c) * HW;
                double* yb = c + 1 < C ? ya + HW : nullptr;
                packed_inverse_fft(zc.data(), ms, 1.0 / double(HW), ya, yb);
            }
        }
    }

    bool rg = requires_grad(x) || requires_grad(t_re) || requires_grad(t_im);
    Var self{int(nodes_.size())};
    return push(std::move(out), rg,
                [x, t_re, t_im, self, ms, B, C, HW, M, BC, xhat_re, xhat_im](Tape& t) {
        const Eigen::ArrayXd& g = t.grad(self).data;
        const int H = ms.H;

        // Mode coefficients of the upstream gradient, with the adjoint
        // weights of the Hermitian extension folded in.
        Eigen::ArrayXd dy_re(M * BC), dy_im(M * BC);
        for (int s = 0; s < B; ++s)
            gather_mode_coefficients(g.data(), s, B, C, ms, dy_re.data(), dy_im.data());
        const double inv_hw = 1.0 / double(HW);
        for (int b2 = 0; b2 < ms.n_ky(); ++b2) {
            for (int a = 0; a < ms.mx; ++a) {
                const std::int64_t m = std::int64_t(b2) * ms.mx + a;
                const double scale = (a > 0 ? 2.0 : 1.0) * inv_hw;
                auto re = dy_re.segment(m * BC, BC);
                auto im = dy_im.segment(m * BC, BC);
                re *= scale;
                if (a == 0 && b2 == 0)
                    im.setZero();   // DC carries a purely real weight path
                else
                    im *= scale;
            }
        }

        const double* tre = t.value(t_re).data.data();
        const double* tim = t.value(t_im).data.data();
        const bool need_dx = t.requires_grad(x);
        const bool need_dt = t.requires_grad(t_re) || t.requires_grad(t_im);
        Eigen::ArrayXd dx_re, dx_im;
        if (need_dx) {
            dx_re.setZero(M * BC);
            dx_im.setZero(M * BC);
        }
        for (std::int64_t m = 0; m < M; ++m) {
            CMapM dYre(dy_re.data() + m * BC, B, C);
            CMapM dYim(dy_im.data() + m * BC, B, C);
            if (need_dt) {
                CMapM Xre(xhat_re->data() + m * BC, B, C);
                CMapM Xim(xhat_im->data() + m * BC, B, C);
                // dT = sum_b dyhat conj(xhat)^T
                if (t.requires_grad(t_re)) {
                    MapM dTre(t.grad_buf(t_re.id).data() + m * C * C, C, C);
                    dTre.noalias() += dYre.transpose() * Xre;
                    dTre.noalias() += dYim.transpose() * Xim;
                }
                if (t.requires_grad(t_im)) {
                    MapM dTim(t.grad_buf(t_im.id).data() + m * C * C, C, C);
                    dTim.noalias() += dYim.transpose() * Xre;
                    dTim.noalias() -= dYre.transpose() * Xim;
                }
            }
            if (need_dx) {
                CMapM Tre(tre + m * C * C, C, C);
                CMapM Tim(tim + m * C * C, C, C);
                MapM dXre(dx_re.data() + m * BC, B, C);
                MapM dXim(dx_im.data() + m * BC, B, C);
                // dxhat = dyhat conj(T) in batch-row form
                dXre.noalias() = dYre * Tre;
                dXre.noalias() += dYim * Tim;
                dXim.noalias() = dYim * Tre;
                dXim.noalias() -= dYre * Tim;
            }
        }
        if (need_dx) {
            Eigen::ArrayXd& dx = t.grad_buf(x.id);
            std::vector<Complex> zc(size_t(2 * ms.mx - 1) * H);
            for (int s = 0; s < B; ++s) {
                for (int c = 0; c < C; c += 2) {
                    scatter_hermitian(dx_re.data(), dx_im.data(), s, B, C, c, ms, 0.5, zc.data());
                    double* da = dx.data() + (std::int64_t(s) * C + c) * HW;
                    double* db = c + 1 < C ? da + HW : nullptr;
                    // Adjoint of the unnormalized forward kernel: no 1/(HW).
                    packed_inverse_fft(zc.data(), ms, 1.0, da, db);
                }
            }
        }
    });
}

// --- losses -------------------------------------------------------------------

Var Tape::relative_l2(Var pred, Var target) {
    const Tensor& vp = value(pred);
    const Tensor& vt = value(target);
    if (!vp.same_shape(vt)) throw ContractError("relative_l2: shape mismatch");
    if (vp.shape.empty() || vp.dim(0) < 1)
        throw ContractError("relative_l2: need a leading batch dimension");
    if (requires_grad(target))
        throw ContractError("relative_l2: gradients w.r.t. the target are not implemented");
    const int B = vp.dim(0);
    const std::int64_t per = vp.size() / B;

    double acc = 0.0;
    for (int s = 0; s < B; ++s) {
        auto d = vp.data.segment(s * per, per) - vt.data.segment(s * per, per);
        double n = std::sqrt(d.square().sum());
        double den = std::max(std::sqrt(vt.data.segment(s * per, per).square().sum()), 1e-12);
        acc += n / den;
    }
    Tensor out({1}, Eigen::ArrayXd::Constant(1, acc / B));
    Var self{int(nodes_.size())};
    return push(std::move(out), requires_grad(pred), [pred, target, self, B, per](Tape& t) {
        if (!t.requires_grad(pred)) return;
        const double g0 = t.grad(self).data[0];
        const Tensor& vp = t.value(pred);
        const Tensor& vt = t.value(target);
        Eigen::ArrayXd& dp = t.grad_buf(pred.id);
        for (int s = 0; s < B; ++s) {
            auto d = vp.data.segment(s * per, per) - vt.data.segment(s * per, per);
            double n = std::sqrt(d.square().sum());
            if (n <= 0.0) continue;   // flat minimum: leave the gradient at zero
            double den = std::max(std::sqrt(vt.data.segment(s * per, per).square().sum()), 1e-12);
            dp.segment(s * per, per) += (g0 / (B * n * den)) * d;
        }
    });
}

Var Tape::mse(Var pred, Var target) {
    const Tensor& vp = value(pred);
    const Tensor& vt = value(target);
    if (!vp.same_shape(vt)) throw ContractError("mse: shape mismatch");
    if (requires_grad(target))
        throw ContractError("mse: gradients w.r.t. the target are not implemented");
    const std::int64_t n = vp.size();
    Tensor out({1}, Eigen::ArrayXd::Constant(1, (vp.data - vt.data).square().sum() / double(n)));
    Var self{int(nodes_.size())};
    return push(std::move(out), requires_grad(pred), [pred, target, self, n](Tape& t) {
        if (!t.requires_grad(pred)) return;
        const double g0 = t.grad(self).data[0];
        t.grad_buf(pred.id) +=
            (2.0 * g0 / double(n)) * (t.value(pred).data - t.value(target).data);
    });
}

} // namespace uwf
