#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "magvel/fields.hpp"
#include "magvel/lattice.hpp"

namespace magvel {

/// (1 - e^{-x})/x, the relaxation factor of the per-mode heat ODE. Series
/// fallback below 1e-8 avoids the expm1/x cancellation; phi1(0) = 1.
inline double phi1(double x) {
    if (x < 1e-8) return 1.0 - 0.5 * x + x * x / 6.0;
    return -std::expm1(-x) / x;
}

namespace detail {

template <int D>
inline void require_mean_zero(const SpectralVectorField<D>& s, const char* what) {
    double scale = 0.0;
    for (const cplx& c : s.coeffs()) scale = std::max(scale, std::abs(c));
    for (int c = 0; c < D; ++c)
        if (std::abs(s.slot(c, 0)) > 1e-12 * std::max(1.0, scale))
            throw std::invalid_argument(std::string(what) + ": field must be mean-zero (k=0 coefficient nonzero)");
}

// Laplacian eigenvalue of the slot's signed mode, no truncation check;
// Nyquist slots hold zero coefficients so their value never contributes.
template <int D>
inline double raw_eigenvalue(const TorusLattice<D>& lattice, std::size_t flat) {
    const auto k = lattice.mode_of_flat(flat);
    double s = 0.0;
    for (int i = 0; i < D; ++i) {
        const double gi = static_cast<double>(k[i]) / lattice.periods()[i];
        s += gi * gi;
    }
    const double two_pi = 2.0 * std::numbers::pi;
    return two_pi * two_pi * s;
}

} // namespace detail

/// Time-stamped snapshots of one diffusive evolution.
template <int D>
struct EvolutionSeries {
    std::vector<double> times;
    std::vector<SpectralVectorField<D>> snapshots;
    double eta = 0.0;

    void validate() const {
        if (times.empty()) throw std::invalid_argument("EvolutionSeries: no sample times");
        if (snapshots.size() != times.size())
            throw std::invalid_argument("EvolutionSeries: one snapshot required per time");
        if (!(eta > 0.0)) throw std::invalid_argument("EvolutionSeries: eta must be positive");
        if (!(times.front() >= 0.0))
            throw std::invalid_argument("EvolutionSeries: times must start at or after 0");
        for (std::size_t j = 1; j < times.size(); ++j)
            if (!(times[j] > times[j - 1]))
                throw std::invalid_argument("EvolutionSeries: times must be strictly increasing");
        for (const auto& b : snapshots) {
            if (!(b.lattice() == snapshots.front().lattice()))
                throw std::invalid_argument("EvolutionSeries: snapshots on mixed lattices");
            if (b.hermitian_residual() > 1e-10)
                throw std::invalid_argument("EvolutionSeries: snapshot violates Hermitian symmetry");
        }
    }
};

/// Closed-form heat solution with zero initial data and a time-constant
/// mean-zero source: b(k, t) = (1 - e^{-eta lam t}) / (eta lam) h(k).
template <int D>
inline SpectralVectorField<D> duhamel_snapshot(const TorusLattice<D>& lattice, double eta,
                                               const SpectralVectorField<D>& h, double t) {
    detail::require_same_lattice(lattice, h.lattice());
    if (!(eta > 0.0)) throw std::invalid_argument("duhamel_snapshot: eta must be positive");
    if (!(t >= 0.0)) throw std::invalid_argument("duhamel_snapshot: time must be nonnegative");
    detail::require_mean_zero(h, "duhamel_snapshot");

    SpectralVectorField<D> b(lattice);
    const std::size_t n = lattice.point_count();
    for (std::size_t j = 1; j < n; ++j) {
        const double lam = detail::raw_eigenvalue<D>(lattice, j);
        const double factor = t * phi1(eta * lam * t);  // == (1 - e^{-eta lam t})/(eta lam)
        for (int c = 0; c < D; ++c) b.slot(c, j) = factor * h.slot(c, j);
    }
    return b;
}

/// March the forced heat equation through the given times with the exact
/// per-mode update over each interval, treating the source as constant on
/// [t_j, t_{j+1}] (left endpoint). `b0` is the state at times[0], not at
/// t = 0; prepend an origin sample to start a trajectory from rest. `v`
/// holds either one velocity field (time-constant, the update is then
/// exact to round-off) or one per time.
template <int D>
inline EvolutionSeries<D> evolve_series(const TorusLattice<D>& lattice, double eta,
                                        const BackgroundField<D>& F,
                                        const std::vector<SpectralVectorField<D>>& v,
                                        const SpectralVectorField<D>& b0,
                                        const std::vector<double>& times) {
    if (!(eta > 0.0)) throw std::invalid_argument("evolve_series: eta must be positive");
    if (times.empty()) throw std::invalid_argument("evolve_series: no sample times");
    if (!(times.front() >= 0.0))
        throw std::invalid_argument("evolve_series: times must start at or after 0");
    for (std::size_t j = 1; j < times.size(); ++j)
        if (!(times[j] > times[j - 1]))
            throw std::invalid_argument("evolve_series: times must be strictly increasing");
    if (v.empty() || (v.size() != 1 && v.size() != times.size()))
        throw std::invalid_argument("evolve_series: velocity must be one field or one per time");

    detail::require_same_lattice(lattice, b0.lattice());
    detail::require_mean_zero(b0, "evolve_series");
    if (relative_divergence(b0) > 1e-10)
        throw std::invalid_argument("evolve_series: initial field divergence residual exceeds 1e-10 (not solenoidal)");
    for (const auto& vj : v) {
        detail::require_same_lattice(lattice, vj.lattice());
        if (relative_divergence(vj) > 1e-10)
            throw std::invalid_argument("evolve_series: velocity divergence residual exceeds 1e-10 (not solenoidal)");
    }

    EvolutionSeries<D> out;
    out.eta = eta;
    out.times = times;
    out.snapshots.reserve(times.size());

    const std::size_t n = lattice.point_count();
    SpectralVectorField<D> b = b0;
    out.snapshots.push_back(b);
    SpectralVectorField<D> h = curl_cross(F, v[0]);
    for (std::size_t j = 0; j + 1 < times.size(); ++j) {
        if (v.size() > 1 && j > 0) h = curl_cross(F, v[j]);
        const double dt = times[j + 1] - times[j];
        for (std::size_t flat = 0; flat < n; ++flat) {
            const double lam = detail::raw_eigenvalue<D>(lattice, flat);
            const double decay = std::exp(-eta * lam * dt);
            const double gain = dt * phi1(eta * lam * dt);
            for (int c = 0; c < D; ++c)
                b.slot(c, flat) = decay * b.slot(c, flat) + gain * h.slot(c, flat);
        }
        out.snapshots.push_back(b);
    }
    return out;
}

template <int D>
inline EvolutionSeries<D> evolve_series(const TorusLattice<D>& lattice, double eta,
                                        const BackgroundField<D>& F,
                                        const SpectralVectorField<D>& v,
                                        const SpectralVectorField<D>& b0,
                                        const std::vector<double>& times) {
    return evolve_series<D>(lattice, eta, F, std::vector<SpectralVectorField<D>>{v}, b0, times);
}

/// Graph norm of the Stokes operator: sqrt(sum_{k != 0} lam_k^2 |b(k)|^2).
/// This is the bare spectral sum; on a unit-volume torus it coincides with
/// the L^2 norm of the Laplacian of the field.
template <int D>
inline double stokes_domain_norm(const SpectralVectorField<D>& b) {
    const auto& lattice = b.lattice();
    double acc = 0.0;
    const std::size_t n = lattice.point_count();
    for (std::size_t j = 1; j < n; ++j) {
        const double lam = detail::raw_eigenvalue<D>(lattice, j);
        for (int c = 0; c < D; ++c) acc += lam * lam * std::norm(b.slot(c, j));
    }
    return std::sqrt(acc);
}

/// Worst solenoidality defect across a series:
/// max_j ||div b(t_j)||_{L^2} / max(1, ||b(t_j)||_{H^1}).
template <int D>
inline double divergence_residual(const EvolutionSeries<D>& series) {
    series.validate();
    double worst = 0.0;
    for (const auto& b : series.snapshots) worst = std::max(worst, relative_divergence(b));
    return worst;
}

} // namespace magvel
