#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace magvel {

template <int D>
using Vec = std::array<double, D>;

/// Integer mode index k on the dual lattice.
template <int D>
using Mode = std::array<int, D>;

namespace vec {

template <int D>
inline double dot(const Vec<D>& a, const Vec<D>& b) {
    double s = 0.0;
    for (int i = 0; i < D; ++i) s += a[i] * b[i];
    return s;
}

template <int D>
inline double norm_sq(const Vec<D>& a) { return dot<D>(a, a); }

template <int D>
inline double norm(const Vec<D>& a) { return std::sqrt(norm_sq<D>(a)); }

template <int D>
inline Vec<D> scaled(const Vec<D>& a, double c) {
    Vec<D> r{};
    for (int i = 0; i < D; ++i) r[i] = c * a[i];
    return r;
}

template <int D>
inline Vec<D> axpy(double c, const Vec<D>& a, const Vec<D>& b) {
    Vec<D> r{};
    for (int i = 0; i < D; ++i) r[i] = c * a[i] + b[i];
    return r;
}

template <int D>
inline bool finite(const Vec<D>& a) {
    for (int i = 0; i < D; ++i)
        if (!std::isfinite(a[i])) return false;
    return true;
}

} // namespace vec

/**
 * Rectangular periodic box of side lengths L with a uniform N_1 x ... x N_d
 * sampling grid. All N_i are even and at least 4; the retained spectrum is
 * |k_i| <= N_i/2 - 1 per axis, which drops the Nyquist lines so that every
 * retained mode has its conjugate partner -k on the lattice.
 */
template <int D>
class TorusLattice {
    static_assert(D == 2 || D == 3, "only dimensions 2 and 3 are supported");

public:
    TorusLattice(const Vec<D>& periods, const std::array<int, D>& counts)
        : periods_(periods), counts_(counts) {
        for (int i = 0; i < D; ++i) {
            if (!(periods_[i] > 0.0) || !std::isfinite(periods_[i]))
                throw std::invalid_argument("TorusLattice: periods must be positive and finite");
            if (counts_[i] < 4 || counts_[i] % 2 != 0)
                throw std::invalid_argument("TorusLattice: grid counts must be even and >= 4");
        }
    }

    static constexpr int dim() { return D; }
    const Vec<D>& periods() const { return periods_; }
    const std::array<int, D>& counts() const { return counts_; }

    std::size_t point_count() const {
        std::size_t n = 1;
        for (int i = 0; i < D; ++i) n *= static_cast<std::size_t>(counts_[i]);
        return n;
    }

    /// prod L_i
    double volume() const {
        double v = 1.0;
        for (int i = 0; i < D; ++i) v *= periods_[i];
        return v;
    }

    double cell_volume() const { return volume() / static_cast<double>(point_count()); }

    /// Largest retained |k_i| on the given axis.
    int half_width(int axis) const { return counts_[axis] / 2 - 1; }

    /// Largest band radius fully contained in the truncation.
    int max_band() const {
        int b = half_width(0);
        for (int i = 1; i < D; ++i) b = std::min(b, half_width(i));
        return b;
    }

    bool in_truncation(const Mode<D>& k) const {
        for (int i = 0; i < D; ++i)
            if (std::abs(k[i]) > half_width(i)) return false;
        return true;
    }

    void require_in_truncation(const Mode<D>& k) const {
        if (!in_truncation(k))
            throw std::out_of_range("mode index outside the retained truncation");
    }

    /// Dual lattice vector g(k) = (k_1/L_1, ..., k_d/L_d).
    Vec<D> dual_vector(const Mode<D>& k) const {
        require_in_truncation(k);
        Vec<D> g{};
        for (int i = 0; i < D; ++i) g[i] = static_cast<double>(k[i]) / periods_[i];
        return g;
    }

    /// lambda_k = (2 pi)^2 sum_j (k_j/L_j)^2; zero exactly at k = 0.
    double laplacian_eigenvalue(const Mode<D>& k) const {
        require_in_truncation(k);
        double s = 0.0;
        for (int i = 0; i < D; ++i) {
            const double gi = static_cast<double>(k[i]) / periods_[i];
            s += gi * gi;
        }
        const double two_pi = 2.0 * std::numbers::pi;
        return two_pi * two_pi * s;
    }

    /// Row-major flat slot of mode k, wrapping negative frequencies into
    /// the upper half of each axis (standard DFT layout).
    std::size_t flat_of_mode(const Mode<D>& k) const {
        std::size_t flat = 0;
        for (int i = 0; i < D; ++i) {
            const int n = counts_[i];
            int j = k[i] % n;
            if (j < 0) j += n;
            flat = flat * static_cast<std::size_t>(n) + static_cast<std::size_t>(j);
        }
        return flat;
    }

    /// Signed mode of a flat slot; the Nyquist index N/2 comes back as +N/2,
    /// which in_truncation() reports as not retained.
    Mode<D> mode_of_flat(std::size_t flat) const {
        Mode<D> k{};
        for (int i = D - 1; i >= 0; --i) {
            const int n = counts_[i];
            const int j = static_cast<int>(flat % static_cast<std::size_t>(n));
            flat /= static_cast<std::size_t>(n);
            k[i] = (j <= n / 2) ? j : j - n;
        }
        return k;
    }

    /// Physical grid point x_j = (L_i * j_i / N_i).
    Vec<D> grid_point(const std::array<int, D>& idx) const {
        Vec<D> x{};
        for (int i = 0; i < D; ++i)
            x[i] = periods_[i] * static_cast<double>(idx[i]) / static_cast<double>(counts_[i]);
        return x;
    }

    friend bool operator==(const TorusLattice&, const TorusLattice&) = default;

private:
    Vec<D> periods_;
    std::array<int, D> counts_;
};

template <int D>
inline Vec<D> dual_vector(const TorusLattice<D>& lattice, const Mode<D>& k) {
    return lattice.dual_vector(k);
}

template <int D>
inline double laplacian_eigenvalue(const TorusLattice<D>& lattice, const Mode<D>& k) {
    return lattice.laplacian_eigenvalue(k);
}

namespace detail {

// Lexicographic enumeration of all nonzero k with |k_i| <= width_i.
template <int D>
inline std::vector<Mode<D>> enumerate_box(const std::array<int, D>& width) {
    std::vector<Mode<D>> out;
    std::size_t total = 1;
    for (int i = 0; i < D; ++i) total *= static_cast<std::size_t>(2 * width[i] + 1);
    out.reserve(total - 1);
    Mode<D> k{};
    for (int i = 0; i < D; ++i) k[i] = -width[i];
    while (true) {
        bool zero = true;
        for (int i = 0; i < D; ++i) zero = zero && (k[i] == 0);
        if (!zero) out.push_back(k);
        int axis = D - 1;
        while (axis >= 0 && k[axis] == width[axis]) {
            k[axis] = -width[axis];
            --axis;
        }
        if (axis < 0) break;
        ++k[axis];
    }
    return out;
}

} // namespace detail

/// All nonzero modes with |k_i| <= kmax, in lexicographic order.
template <int D>
inline std::vector<Mode<D>> enumerate_modes(const TorusLattice<D>& lattice, int kmax) {
    if (kmax < 1 || kmax > lattice.max_band())
        throw std::out_of_range("enumerate_modes: kmax outside the retained truncation");
    std::array<int, D> width{};
    width.fill(kmax);
    return detail::enumerate_box<D>(width);
}

/// All nonzero modes of the full retained truncation, in lexicographic order.
template <int D>
inline std::vector<Mode<D>> enumerate_modes(const TorusLattice<D>& lattice) {
    std::array<int, D> width{};
    for (int i = 0; i < D; ++i) width[i] = lattice.half_width(i);
    return detail::enumerate_box<D>(width);
}

} // namespace magvel
