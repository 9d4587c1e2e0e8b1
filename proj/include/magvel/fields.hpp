#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>
#include <vector>

#include "magvel/detail/dft.hpp"
#include "magvel/errors.hpp"
#include "magvel/lattice.hpp"

namespace magvel {

using cplx = std::complex<double>;

/// Complex d-vector, one Fourier coefficient of a vector field.
template <int D>
using CVec = std::array<cplx, D>;

/// Constant background field F, |F| > 0.
template <int D>
class BackgroundField {
public:
    explicit BackgroundField(const Vec<D>& value) : value_(value) {
        if (!vec::finite<D>(value_) || !(vec::norm<D>(value_) > 0.0))
            throw std::invalid_argument("BackgroundField: F must be finite and nonzero");
    }
    const Vec<D>& value() const { return value_; }
    double operator[](int i) const { return value_[i]; }

private:
    Vec<D> value_;
};

/// Real samples of a d-vector field on the uniform periodic grid,
/// component-outermost, row-major within each component.
template <int D>
class GridVectorField {
public:
    explicit GridVectorField(const TorusLattice<D>& lattice)
        : lattice_(lattice), data_(static_cast<std::size_t>(D) * lattice.point_count(), 0.0) {}

    GridVectorField(const TorusLattice<D>& lattice, std::vector<double> data)
        : lattice_(lattice), data_(std::move(data)) {
        if (data_.size() != static_cast<std::size_t>(D) * lattice_.point_count())
            throw std::invalid_argument("GridVectorField: sample count does not match lattice");
        for (double v : data_)
            if (!std::isfinite(v))
                throw std::invalid_argument("GridVectorField: non-finite sample");
    }

    const TorusLattice<D>& lattice() const { return lattice_; }
    const std::vector<double>& data() const { return data_; }
    std::vector<double>& data() { return data_; }

    double& at(int component, std::size_t point) {
        return data_[static_cast<std::size_t>(component) * lattice_.point_count() + point];
    }
    double at(int component, std::size_t point) const {
        return data_[static_cast<std::size_t>(component) * lattice_.point_count() + point];
    }

    friend bool operator==(const GridVectorField&, const GridVectorField&) = default;

private:
    TorusLattice<D> lattice_;
    std::vector<double> data_;
};

/// Complex Fourier coefficients of a real scalar field over the full DFT
/// grid. Retained modes are those inside the lattice truncation; Nyquist
/// slots are kept identically zero.
template <int D>
class SpectralScalarField {
public:
    explicit SpectralScalarField(const TorusLattice<D>& lattice)
        : lattice_(lattice), coeffs_(lattice.point_count(), cplx{0.0, 0.0}) {}

    const TorusLattice<D>& lattice() const { return lattice_; }
    const std::vector<cplx>& coeffs() const { return coeffs_; }
    std::vector<cplx>& coeffs() { return coeffs_; }

    cplx coeff(const Mode<D>& k) const {
        lattice_.require_in_truncation(k);
        return coeffs_[lattice_.flat_of_mode(k)];
    }
    void set_coeff(const Mode<D>& k, cplx value) {
        lattice_.require_in_truncation(k);
        coeffs_[lattice_.flat_of_mode(k)] = value;
    }

    friend bool operator==(const SpectralScalarField&, const SpectralScalarField&) = default;

private:
    TorusLattice<D> lattice_;
    std::vector<cplx> coeffs_;
};

/// Complex Fourier coefficients of a real d-vector field, component-outermost.
/// Coefficients follow the expansion f(x) = sum_k c(k) exp(2 pi i g(k).x), so
/// a real field satisfies c(-k) = conj(c(k)) on every retained mode.
template <int D>
class SpectralVectorField {
public:
    explicit SpectralVectorField(const TorusLattice<D>& lattice)
        : lattice_(lattice), coeffs_(static_cast<std::size_t>(D) * lattice.point_count(), cplx{0.0, 0.0}) {}

    const TorusLattice<D>& lattice() const { return lattice_; }
    const std::vector<cplx>& coeffs() const { return coeffs_; }
    std::vector<cplx>& coeffs() { return coeffs_; }

    std::size_t point_count() const { return lattice_.point_count(); }

    cplx& slot(int component, std::size_t flat) {
        return coeffs_[static_cast<std::size_t>(component) * point_count() + flat];
    }
    cplx slot(int component, std::size_t flat) const {
        return coeffs_[static_cast<std::size_t>(component) * point_count() + flat];
    }

    CVec<D> coeff(const Mode<D>& k) const {
        lattice_.require_in_truncation(k);
        const std::size_t flat = lattice_.flat_of_mode(k);
        CVec<D> c{};
        for (int i = 0; i < D; ++i) c[i] = slot(i, flat);
        return c;
    }

    void set_coeff(const Mode<D>& k, const CVec<D>& value) {
        lattice_.require_in_truncation(k);
        const std::size_t flat = lattice_.flat_of_mode(k);
        for (int i = 0; i < D; ++i) slot(i, flat) = value[i];
    }

    /// Worst deviation from c(-k) = conj(c(k)), relative to the largest
    /// coefficient magnitude.
    double hermitian_residual() const {
        double worst = 0.0;
        double scale = 0.0;
        const std::size_t n = point_count();
        for (std::size_t flat = 0; flat < n; ++flat) {
            const std::size_t partner = conjugate_slot(flat);
            for (int c = 0; c < D; ++c) {
                scale = std::max(scale, std::abs(slot(c, flat)));
                worst = std::max(worst, std::abs(slot(c, flat) - std::conj(slot(c, partner))));
            }
        }
        return scale > 0.0 ? worst / scale : 0.0;
    }

    /// Enforce c(-k) = conj(c(k)) exactly by averaging conjugate pairs.
    void symmetrize() {
        const std::size_t n = point_count();
        for (std::size_t flat = 0; flat < n; ++flat) {
            const std::size_t partner = conjugate_slot(flat);
            if (partner < flat) continue;
            for (int c = 0; c < D; ++c) {
                if (partner == flat) {
                    slot(c, flat) = cplx{slot(c, flat).real(), 0.0};
                } else {
                    const cplx mean = 0.5 * (slot(c, flat) + std::conj(slot(c, partner)));
                    slot(c, flat) = mean;
                    slot(c, partner) = std::conj(mean);
                }
            }
        }
    }

    /// Flat slot of -k for the slot of k (per-axis index negation mod N).
    std::size_t conjugate_slot(std::size_t flat) const {
        const auto& n = lattice_.counts();
        std::array<int, D> idx{};
        for (int i = D - 1; i >= 0; --i) {
            idx[i] = static_cast<int>(flat % static_cast<std::size_t>(n[i]));
            flat /= static_cast<std::size_t>(n[i]);
        }
        std::size_t out = 0;
        for (int i = 0; i < D; ++i) {
            const int neg = (n[i] - idx[i]) % n[i];
            out = out * static_cast<std::size_t>(n[i]) + static_cast<std::size_t>(neg);
        }
        return out;
    }

    friend bool operator==(const SpectralVectorField&, const SpectralVectorField&) = default;

private:
    TorusLattice<D> lattice_;
    std::vector<cplx> coeffs_;
};

namespace detail {

template <int D>
inline void require_same_lattice(const TorusLattice<D>& a, const TorusLattice<D>& b) {
    if (!(a == b))
        throw std::invalid_argument("fields live on different lattices");
}

// Signed mode of a flat slot without the truncation check; Nyquist slots map
// to +N/2, whose coefficients are zero by invariant.
template <int D>
inline Mode<D> raw_mode(const TorusLattice<D>& lattice, std::size_t flat) {
    return lattice.mode_of_flat(flat);
}

template <int D>
inline Vec<D> raw_dual(const TorusLattice<D>& lattice, const Mode<D>& k) {
    Vec<D> g{};
    for (int i = 0; i < D; ++i) g[i] = static_cast<double>(k[i]) / lattice.periods()[i];
    return g;
}

} // namespace detail

/// Forward DFT, normalized by 1/prod(N_i) so coefficients match the
/// exp(2 pi i g(k).x) expansion directly. Nyquist lines are dropped and
/// Hermitian symmetry is enforced exactly afterwards.
template <int D>
inline SpectralVectorField<D> to_spectral(const GridVectorField<D>& f) {
    const auto& lattice = f.lattice();
    for (double v : f.data())
        if (!std::isfinite(v))
            throw std::invalid_argument("to_spectral: non-finite sample");

    SpectralVectorField<D> out(lattice);
    const std::size_t n = lattice.point_count();
    std::vector<cplx> buf(n);
    const double scale = 1.0 / static_cast<double>(n);
    for (int c = 0; c < D; ++c) {
        for (std::size_t j = 0; j < n; ++j) buf[j] = cplx{f.at(c, j), 0.0};
        detail::dft_nd<D>(buf.data(), lattice.counts(), -1);
        for (std::size_t j = 0; j < n; ++j) out.slot(c, j) = buf[j] * scale;
    }
    // Drop Nyquist lines so every retained mode has its conjugate partner.
    for (std::size_t j = 0; j < n; ++j) {
        if (!lattice.in_truncation(lattice.mode_of_flat(j)))
            for (int c = 0; c < D; ++c) out.slot(c, j) = cplx{0.0, 0.0};
    }
    out.symmetrize();
    return out;
}

/// Inverse DFT back to real samples. Rejects coefficients that are not
/// Hermitian-symmetric; the imaginary residue of the inverse transform is
/// checked against the field magnitude before being discarded.
template <int D>
inline GridVectorField<D> to_grid(const SpectralVectorField<D>& s) {
    if (s.hermitian_residual() > 1e-10)
        throw SymmetryError("to_grid: coefficients violate Hermitian symmetry (field is not real)");

    const auto& lattice = s.lattice();
    const std::size_t n = lattice.point_count();
    GridVectorField<D> out(lattice);
    std::vector<cplx> buf(n);
    double max_abs = 0.0;
    double max_imag = 0.0;
    for (int c = 0; c < D; ++c) {
        for (std::size_t j = 0; j < n; ++j) buf[j] = s.slot(c, j);
        detail::dft_nd<D>(buf.data(), lattice.counts(), +1);
        for (std::size_t j = 0; j < n; ++j) {
            max_abs = std::max(max_abs, std::abs(buf[j]));
            max_imag = std::max(max_imag, std::abs(buf[j].imag()));
            out.at(c, j) = buf[j].real();
        }
    }
    if (max_abs > 0.0 && max_imag > 1e-12 * max_abs)
        throw SymmetryError("to_grid: imaginary residue exceeds 1e-12 of field norm");
    return out;
}

/// Spectral divergence: (div f)^(k) = 2 pi i g(k) . c(k).
template <int D>
inline SpectralScalarField<D> divergence(const SpectralVectorField<D>& s) {
    const auto& lattice = s.lattice();
    SpectralScalarField<D> out(lattice);
    const double two_pi = 2.0 * std::numbers::pi;
    const std::size_t n = lattice.point_count();
    for (std::size_t j = 0; j < n; ++j) {
        const auto k = detail::raw_mode<D>(lattice, j);
        const auto g = detail::raw_dual<D>(lattice, k);
        cplx acc{0.0, 0.0};
        for (int c = 0; c < D; ++c) acc += g[c] * s.slot(c, j);
        out.coeffs()[j] = cplx{0.0, two_pi} * acc;
    }
    return out;
}

/// Zero the k = 0 coefficient; all other modes pass through.
template <int D>
inline SpectralVectorField<D> project_mean_zero(const SpectralVectorField<D>& s) {
    SpectralVectorField<D> out = s;
    for (int c = 0; c < D; ++c) out.slot(c, 0) = cplx{0.0, 0.0};
    return out;
}

/// Leray projection: remove the component along g(k) from every k != 0.
template <int D>
inline SpectralVectorField<D> leray_project(const SpectralVectorField<D>& s) {
    const auto& lattice = s.lattice();
    SpectralVectorField<D> out = s;
    const std::size_t n = lattice.point_count();
    for (std::size_t j = 1; j < n; ++j) {
        const auto k = detail::raw_mode<D>(lattice, j);
        const auto g = detail::raw_dual<D>(lattice, k);
        const double g2 = vec::norm_sq<D>(g);
        if (g2 == 0.0) continue; // only the k = 0 slot, excluded above
        cplx gdotc{0.0, 0.0};
        for (int c = 0; c < D; ++c) gdotc += g[c] * out.slot(c, j);
        const cplx f = gdotc / g2;
        for (int c = 0; c < D; ++c) out.slot(c, j) -= g[c] * f;
    }
    return out;
}

/// Directional derivative (F.grad): multiply each mode by 2 pi i (F.g(k)).
template <int D>
inline SpectralVectorField<D> transport_apply(const BackgroundField<D>& F,
                                              const SpectralVectorField<D>& s) {
    const auto& lattice = s.lattice();
    SpectralVectorField<D> out(lattice);
    const double two_pi = 2.0 * std::numbers::pi;
    const std::size_t n = lattice.point_count();
    for (std::size_t j = 0; j < n; ++j) {
        const auto k = detail::raw_mode<D>(lattice, j);
        const auto g = detail::raw_dual<D>(lattice, k);
        const cplx factor{0.0, two_pi * vec::dot<D>(F.value(), g)};
        for (int c = 0; c < D; ++c) out.slot(c, j) = factor * s.slot(c, j);
    }
    return out;
}

/// Induction operator curl(F x v) for constant F, computed through the
/// identity curl(F x v) = -(F.grad)v + F (div v), valid in d = 2 and d = 3.
template <int D>
inline SpectralVectorField<D> curl_cross(const BackgroundField<D>& F,
                                         const SpectralVectorField<D>& s) {
    const auto& lattice = s.lattice();
    SpectralVectorField<D> out(lattice);
    const double two_pi = 2.0 * std::numbers::pi;
    const std::size_t n = lattice.point_count();
    for (std::size_t j = 0; j < n; ++j) {
        const auto k = detail::raw_mode<D>(lattice, j);
        const auto g = detail::raw_dual<D>(lattice, k);
        const double fg = vec::dot<D>(F.value(), g);
        cplx gdotc{0.0, 0.0};
        for (int c = 0; c < D; ++c) gdotc += g[c] * s.slot(c, j);
        for (int c = 0; c < D; ++c) {
            const cplx val = -fg * s.slot(c, j) + F.value()[c] * gdotc;
            out.slot(c, j) = cplx{0.0, two_pi} * val;
        }
    }
    return out;
}

/// Deterministic pseudo-random mean-zero solenoidal field supported on
/// |k_i| <= band. Identical seeds give bitwise-identical coefficients: the
/// raw engine stream is mapped to doubles without any library distribution.
///
/// Each mode is built from the basis g_p e_a - g_a e_p (p the largest dual
/// component) with 38-bit dyadic draws, so every product below is exact and
/// the discrete divergence cancels to exactly zero whenever g(k) has short
/// mantissas (integer duals in particular). A projected field would carry a
/// rounding-level divergence that small transport divisors amplify.
template <int D>
inline SpectralVectorField<D> random_solenoidal(const TorusLattice<D>& lattice,
                                                std::uint64_t seed, int band,
                                                double amplitude) {
    if (band < 1 || band > lattice.max_band())
        throw std::out_of_range("random_solenoidal: band outside the retained truncation");
    std::mt19937_64 eng(seed);
    auto draw = [&eng]() {
        const auto m = static_cast<std::int64_t>(eng() >> 26) - (std::int64_t{1} << 37);
        return static_cast<double>(m) * 0x1.0p-37; // (-1, 1), 38-bit mantissa
    };
    SpectralVectorField<D> out(lattice);
    for (const auto& k : enumerate_modes(lattice, band)) {
        // Fill only the lexicographically positive representative of {k,-k}.
        int lead = 0;
        while (lead < D && k[lead] == 0) ++lead;
        if (lead == D || k[lead] < 0) continue;
        const auto g = lattice.dual_vector(k);
        int pivot = 0;
        for (int i = 1; i < D; ++i)
            if (std::abs(g[i]) > std::abs(g[pivot])) pivot = i;
        double unit = amplitude;            // power-of-two taming keeps draws exact
        while (unit * std::abs(g[pivot]) > amplitude) unit *= 0.5;
        CVec<D> c{};
        cplx acc{0.0, 0.0};
        for (int a = 0; a < D; ++a) {
            if (a == pivot) continue;
            const cplx w = unit * cplx{draw(), draw()};
            c[a] = w * g[pivot];
            acc += w * g[a];
        }
        c[pivot] = -acc;
        Mode<D> neg{};
        CVec<D> cc{};
        for (int i = 0; i < D; ++i) {
            neg[i] = -k[i];
            cc[i] = std::conj(c[i]);
        }
        out.set_coeff(k, c);
        out.set_coeff(neg, cc);
    }
    return out;
}

// --- norms ---------------------------------------------------------------
//
// Coefficients expand over exp(2 pi i g(k).x), whose L^2 norm on the box is
// sqrt(prod L_i), so every spectral norm below carries that volume factor to
// agree with the cell-volume-weighted grid inner product.

template <int D>
inline double l2_norm(const SpectralVectorField<D>& s) {
    double acc = 0.0;
    for (const cplx& c : s.coeffs()) acc += std::norm(c);
    return std::sqrt(s.lattice().volume() * acc);
}

template <int D>
inline double l2_norm(const SpectralScalarField<D>& s) {
    double acc = 0.0;
    for (const cplx& c : s.coeffs()) acc += std::norm(c);
    return std::sqrt(s.lattice().volume() * acc);
}

template <int D>
inline double l2_norm(const GridVectorField<D>& f) {
    double acc = 0.0;
    for (double v : f.data()) acc += v * v;
    return std::sqrt(f.lattice().cell_volume() * acc);
}

/// Full H^1 norm sqrt(||f||^2 + ||grad f||^2), evaluated spectrally.
template <int D>
inline double h1_norm(const SpectralVectorField<D>& s) {
    const auto& lattice = s.lattice();
    double acc = 0.0;
    const std::size_t n = lattice.point_count();
    for (std::size_t j = 0; j < n; ++j) {
        const auto k = detail::raw_mode<D>(lattice, j);
        double lam = 0.0;
        for (int i = 0; i < D; ++i) {
            const double gi = static_cast<double>(k[i]) / lattice.periods()[i];
            lam += gi * gi;
        }
        const double two_pi = 2.0 * std::numbers::pi;
        lam *= two_pi * two_pi;
        for (int c = 0; c < D; ++c) acc += (1.0 + lam) * std::norm(s.slot(c, j));
    }
    return std::sqrt(lattice.volume() * acc);
}

/// ||div f||_{L^2} / max(1, ||f||_{H^1}); the solenoidality figure used by
/// every precondition check in this library.
template <int D>
inline double relative_divergence(const SpectralVectorField<D>& s) {
    return l2_norm(divergence(s)) / std::max(1.0, h1_norm(s));
}

// --- small field algebra (handy in tests and pipelines) -------------------

template <int D>
inline SpectralVectorField<D> operator+(const SpectralVectorField<D>& a,
                                        const SpectralVectorField<D>& b) {
    detail::require_same_lattice(a.lattice(), b.lattice());
    SpectralVectorField<D> out = a;
    for (std::size_t i = 0; i < out.coeffs().size(); ++i) out.coeffs()[i] += b.coeffs()[i];
    return out;
}

template <int D>
inline SpectralVectorField<D> operator-(const SpectralVectorField<D>& a,
                                        const SpectralVectorField<D>& b) {
    detail::require_same_lattice(a.lattice(), b.lattice());
    SpectralVectorField<D> out = a;
    for (std::size_t i = 0; i < out.coeffs().size(); ++i) out.coeffs()[i] -= b.coeffs()[i];
    return out;
}

template <int D>
inline SpectralVectorField<D> operator*(double c, const SpectralVectorField<D>& a) {
    SpectralVectorField<D> out = a;
    for (cplx& v : out.coeffs()) v *= c;
    return out;
}

} // namespace magvel
