#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <numbers>
#include <vector>

namespace magvel::detail {

using cplx = std::complex<double>;

inline bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

// In-place iterative radix-2 transform. sign = -1 forward, +1 inverse.
// No normalization.
inline void dft_radix2(cplx* x, int n, int sign) {
    for (int i = 1, j = 0; i < n; ++i) {
        int bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(x[i], x[j]);
    }
    std::vector<cplx> tw;
    for (int len = 2; len <= n; len <<= 1) {
        const int half = len / 2;
        tw.resize(half);
        for (int j = 0; j < half; ++j)
            tw[j] = std::polar(1.0, sign * 2.0 * std::numbers::pi * j / len);
        for (int i = 0; i < n; i += len) {
            for (int j = 0; j < half; ++j) {
                const cplx u = x[i + j];
                const cplx v = x[i + j + half] * tw[j];
                x[i + j] = u + v;
                x[i + j + half] = u - v;
            }
        }
    }
}

// O(n^2) fallback for even lengths that are not powers of two. The grids this
// library targets are small, so the quadratic cost is acceptable.
inline void dft_naive(cplx* x, int n, int sign) {
    std::vector<cplx> roots(static_cast<std::size_t>(n));
    for (int m = 0; m < n; ++m)
        roots[m] = std::polar(1.0, sign * 2.0 * std::numbers::pi * m / n);
    std::vector<cplx> out(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) {
        cplx acc{0.0, 0.0};
        for (int m = 0; m < n; ++m)
            acc += x[m] * roots[static_cast<std::size_t>(
                       (static_cast<long long>(j) * m) % n)];
        out[static_cast<std::size_t>(j)] = acc;
    }
    for (int j = 0; j < n; ++j) x[j] = out[static_cast<std::size_t>(j)];
}

inline void dft_line(cplx* x, int n, int sign) {
    if (is_power_of_two(n))
        dft_radix2(x, n, sign);
    else
        dft_naive(x, n, sign);
}

// Unnormalized D-dimensional transform of one row-major component block.
template <int D>
inline void dft_nd(cplx* data, const std::array<int, D>& shape, int sign) {
    std::size_t total = 1;
    for (int i = 0; i < D; ++i) total *= static_cast<std::size_t>(shape[i]);
    std::vector<cplx> line;
    for (int axis = 0; axis < D; ++axis) {
        const int n = shape[axis];
        std::size_t stride = 1;
        for (int i = axis + 1; i < D; ++i) stride *= static_cast<std::size_t>(shape[i]);
        const std::size_t block = stride * static_cast<std::size_t>(n);
        line.resize(static_cast<std::size_t>(n));
        for (std::size_t base = 0; base < total; base += block) {
            for (std::size_t off = 0; off < stride; ++off) {
                cplx* p = data + base + off;
                for (int m = 0; m < n; ++m) line[static_cast<std::size_t>(m)] = p[stride * static_cast<std::size_t>(m)];
                dft_line(line.data(), n, sign);
                for (int m = 0; m < n; ++m) p[stride * static_cast<std::size_t>(m)] = line[static_cast<std::size_t>(m)];
            }
        }
    }
}

} // namespace magvel::detail
