#include "uwf/fft.hpp"

#include <cmath>
#include <map>
#include <mutex>

namespace uwf {
namespace fft {

Plan::Plan(int n_) : n(n_) {
    if (!is_power_of_two(n))
        throw ContractError("fft: transform length " + std::to_string(n) +
                            " is not a power of two");
    bitrev.resize(n);
    int log2n = 0;
    while ((1 << log2n) < n) ++log2n;
    for (int i = 0; i < n; ++i) {
        int r = 0;
        for (int b = 0; b < log2n; ++b)
            if (i & (1 << b)) r |= 1 << (log2n - 1 - b);
        bitrev[i] = r;
    }
    // Evaluate each twiddle directly instead of accumulating products, to
    // keep round-trip error near machine precision at 256-point lengths.
    w.resize(std::max(1, n / 2));
    for (int k = 0; k < n / 2; ++k) {
        double a = -2.0 * M_PI * double(k) / double(n);
        w[k] = Complex(std::cos(a), std::sin(a));
    }
}

const Plan& plan_for(int n) {
    static std::mutex mu;
    static std::map<int, Plan> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(n, Plan(n)).first;
    return it->second;
}

void transform(Complex* x, const Plan& plan, bool inverse) {
    const int n = plan.n;
    for (int i = 0; i < n; ++i) {
        int j = plan.bitrev[i];
        if (i < j) std::swap(x[i], x[j]);
    }
    for (int len = 2; len <= n; len <<= 1) {
        const int half = len >> 1;
        const int step = n / len;
        for (int base = 0; base < n; base += len) {
            for (int k = 0; k < half; ++k) {
                Complex tw = plan.w[size_t(k) * step];
                if (inverse) tw = std::conj(tw);
                Complex a = x[base + k];
                Complex b = x[base + k + half] * tw;
                x[base + k] = a + b;
                x[base + k + half] = a - b;
            }
        }
    }
}

} // namespace fft

namespace {

void check_dims(std::int64_t size, int nx, int ny) {
    if (!fft::is_power_of_two(nx) || !fft::is_power_of_two(ny))
        throw ContractError("fft2: grid dimensions must be powers of two, got " +
                            std::to_string(nx) + "x" + std::to_string(ny));
    if (size != std::int64_t(nx) * ny)
        throw ContractError("fft2: buffer length does not match nx*ny");
}

void fft2_inplace(CArray& a, int nx, int ny, bool inverse) {
    const fft::Plan& row_plan = fft::plan_for(nx);
    const fft::Plan& col_plan = fft::plan_for(ny);
    for (int y = 0; y < ny; ++y)
        fft::transform(a.data() + std::int64_t(y) * nx, row_plan, inverse);
    std::vector<Complex> col(ny);
    for (int x = 0; x < nx; ++x) {
        for (int y = 0; y < ny; ++y) col[y] = a[std::int64_t(y) * nx + x];
        fft::transform(col.data(), col_plan, inverse);
        for (int y = 0; y < ny; ++y) a[std::int64_t(y) * nx + x] = col[y];
    }
}

} // namespace

CArray fft2_forward(const CArray& in, int nx, int ny) {
    check_dims(in.size(), nx, ny);
    CArray out = in;
    fft2_inplace(out, nx, ny, false);
    return out;
}

CArray fft2_inverse(const CArray& in, int nx, int ny) {
    check_dims(in.size(), nx, ny);
    CArray out = in;
    fft2_inplace(out, nx, ny, true);
    out /= double(nx) * double(ny);
    return out;
}

CArray fft2_forward_real(const Eigen::ArrayXd& in, int nx, int ny) {
    check_dims(in.size(), nx, ny);
    CArray buf(in.size());
    for (std::int64_t i = 0; i < in.size(); ++i) buf[i] = Complex(in[i], 0.0);
    fft2_inplace(buf, nx, ny, false);
    return buf;
}

} // namespace uwf
