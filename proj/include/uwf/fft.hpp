#pragma once

#include <Eigen/Core>

#include <complex>
#include <vector>

#include "uwf/errors.hpp"

namespace uwf {

using Complex = std::complex<double>;
using CArray = Eigen::ArrayX<Complex>;

namespace fft {

constexpr bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

/// Radix-2 plan for one transform length: bit-reversal table plus
/// exactly-evaluated twiddles exp(-2*pi*i*k/n), k < n/2.
struct Plan {
    int n = 0;
    std::vector<int> bitrev;
    std::vector<Complex> w;

    explicit Plan(int n_);
};

/// Cached plan lookup (plans are immutable once built).
const Plan& plan_for(int n);

/// In-place unnormalized transform of a stride-1 buffer.
/// Forward kernel exp(-2*pi*i*k*j/n); inverse kernel is its conjugate and
/// carries no 1/n factor here.
void transform(Complex* x, const Plan& plan, bool inverse);

} // namespace fft

/// Unnormalized forward 2D DFT of a row-major (ny rows, nx cols) buffer:
///   X(kx, ky) = sum_{x,y} f(x, y) exp(-2*pi*i*(kx*x/nx + ky*y/ny)).
/// Both dimensions must be powers of two.
CArray fft2_forward(const CArray& in, int nx, int ny);

/// Inverse 2D DFT with the 1/(nx*ny) normalization, so
/// fft2_inverse(fft2_forward(f)) == f.
CArray fft2_inverse(const CArray& in, int nx, int ny);

/// Convenience: real field to spectrum and back (imaginary part of the
/// final inverse is discarded by the caller when it is structural noise).
CArray fft2_forward_real(const Eigen::ArrayXd& in, int nx, int ny);

} // namespace uwf
