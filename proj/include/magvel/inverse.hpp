#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "magvel/arithmetic.hpp"
#include "magvel/errors.hpp"
#include "magvel/fields.hpp"
#include "magvel/forward.hpp"

namespace magvel {

/// Handling of modes where the transport symbol F.g(k) vanishes: Strict
/// refuses source energy there (the mode equation is unsolvable), ZeroFill
/// silently selects the zero coefficient and records what was dropped.
enum class ResonantPolicy { Strict, ZeroFill };

template <int D>
struct ReconstructionResult {
    SpectralVectorField<D> v;
    std::vector<Mode<D>> zeroed_modes;        // resonant modes inside the truncation
    double dropped_energy = 0.0;              // l2 of source coefficients zeroed by policy
    double residual = 0.0;                    // ||(F.grad)v + h||_{L^2} / ||h||_{L^2}
    std::optional<double> stability_rhs;      // (1/(2 pi C)) |h|_{H^tau}, when C, tau given
};

/// Recover the source h = dt b - eta lap b from uniformly spaced snapshots:
/// second-order central differences inside, second-order one-sided at the
/// ends, and the exact spectral Laplacian. Returns one field per time.
template <int D>
inline std::vector<SpectralVectorField<D>> source_from_series(const EvolutionSeries<D>& series) {
    series.validate();
    const std::size_t m = series.times.size();
    if (m < 3) throw std::invalid_argument("source_from_series: at least 3 snapshots required");
    const double dt = series.times[1] - series.times[0];
    for (std::size_t j = 1; j + 1 < m; ++j) {
        const double step = series.times[j + 1] - series.times[j];
        if (std::abs(step - dt) > 1e-9 * std::max(std::abs(step), std::abs(dt)))
            throw std::invalid_argument("source_from_series: snapshot times must be uniformly spaced");
    }

    const auto& lattice = series.snapshots.front().lattice();
    const std::size_t n = lattice.point_count();
    std::vector<SpectralVectorField<D>> out;
    out.reserve(m);
    for (std::size_t j = 0; j < m; ++j) {
        SpectralVectorField<D> h(lattice);
        const auto& bj = series.snapshots[j];
        for (std::size_t flat = 0; flat < n; ++flat) {
            const double lam = detail::raw_eigenvalue<D>(lattice, flat);
            for (int c = 0; c < D; ++c) {
                cplx dbdt;
                if (j == 0) {
                    dbdt = (-3.0 * series.snapshots[0].slot(c, flat) +
                            4.0 * series.snapshots[1].slot(c, flat) -
                            series.snapshots[2].slot(c, flat)) / (2.0 * dt);
                } else if (j + 1 == m) {
                    dbdt = (3.0 * series.snapshots[m - 1].slot(c, flat) -
                            4.0 * series.snapshots[m - 2].slot(c, flat) +
                            series.snapshots[m - 3].slot(c, flat)) / (2.0 * dt);
                } else {
                    dbdt = (series.snapshots[j + 1].slot(c, flat) -
                            series.snapshots[j - 1].slot(c, flat)) / (2.0 * dt);
                }
                h.slot(c, flat) = dbdt + series.eta * lam * bj.slot(c, flat);
            }
        }
        out.push_back(std::move(h));
    }
    return out;
}

/// Exact inversion of the closed-form heat factor for data generated from
/// zero initial state and a time-constant source:
/// h(k) = eta lam / (1 - e^{-eta lam t}) b(k, t).
template <int D>
inline SpectralVectorField<D> source_from_snapshot(const SpectralVectorField<D>& b_t, double t,
                                                   double eta) {
    if (!(t > 0.0)) throw std::invalid_argument("source_from_snapshot: time must be positive");
    if (!(eta > 0.0)) throw std::invalid_argument("source_from_snapshot: eta must be positive");

    const auto& lattice = b_t.lattice();
    SpectralVectorField<D> h(lattice);
    const std::size_t n = lattice.point_count();
    for (std::size_t j = 1; j < n; ++j) {
        const double lam = detail::raw_eigenvalue<D>(lattice, j);
        const double factor = 1.0 / (t * phi1(eta * lam * t));
        for (int c = 0; c < D; ++c) h.slot(c, j) = factor * b_t.slot(c, j);
    }
    return h;
}

/// Homogeneous Sobolev seminorm sqrt(sum_{k != 0} |k|^{2 tau} |f(k)|^2),
/// Euclidean |k| over the integer modes (the same norm the Diophantine scan
/// uses). Bare spectral sum, no volume factor.
template <int D>
inline double sobolev_seminorm(const SpectralVectorField<D>& f, double tau) {
    const auto& lattice = f.lattice();
    double acc = 0.0;
    const std::size_t n = lattice.point_count();
    for (std::size_t j = 1; j < n; ++j) {
        const auto k = lattice.mode_of_flat(j);
        const double weight = std::pow(static_cast<double>(detail::mode_norm_sq<D>(k)), tau);
        for (int c = 0; c < D; ++c) acc += weight * std::norm(f.slot(c, j));
    }
    return std::sqrt(acc);
}

/// Right side of the reconstruction stability bound: (1/(2 pi C)) |h|_{H^tau}.
template <int D>
inline double stability_rhs(const SpectralVectorField<D>& h, double tau, double C) {
    if (!(C > 0.0)) throw std::invalid_argument("stability_rhs: C must be positive");
    return sobolev_seminorm(h, tau) / (2.0 * std::numbers::pi * C);
}

namespace detail {

template <int D>
inline double pairing_at(const BackgroundField<D>& F, const TorusLattice<D>& lattice,
                         std::size_t flat) {
    const auto k = lattice.mode_of_flat(flat);
    double p = 0.0;
    for (int i = 0; i < D; ++i) p += F[i] * (static_cast<double>(k[i]) / lattice.periods()[i]);
    return p;
}

} // namespace detail

/// Divide the source by the transport symbol mode by mode:
/// v(k) = i h(k) / (2 pi F.g(k)) away from resonances, v(0) = 0, and the
/// resonant modes handled per policy. Resonance is decided by the supplied
/// scan report plus exact vanishing of the symbol.
template <int D>
inline ReconstructionResult<D> reconstruct_velocity(
    const SpectralVectorField<D>& h, const BackgroundField<D>& F, const ResonanceReport<D>& report,
    ResonantPolicy policy, std::optional<double> tau = std::nullopt,
    std::optional<double> C = std::nullopt) {
    detail::require_mean_zero(h, "reconstruct_velocity");
    if (relative_divergence(h) > 1e-10)
        throw std::invalid_argument("reconstruct_velocity: source divergence residual exceeds 1e-10 (not solenoidal)");

    const auto& lattice = h.lattice();
    std::set<Mode<D>> resonant(report.resonant_modes.begin(), report.resonant_modes.end());

    const double h_norm = l2_norm(h);
    ReconstructionResult<D> result{SpectralVectorField<D>(lattice), {}, 0.0, 0.0, std::nullopt};

    std::vector<std::array<int, 3>> offenders;
    double dropped_sq = 0.0;
    const std::size_t n = lattice.point_count();
    const double two_pi = 2.0 * std::numbers::pi;
    for (std::size_t flat = 1; flat < n; ++flat) {
        const auto k = lattice.mode_of_flat(flat);
        if (!lattice.in_truncation(k)) continue;  // Nyquist slots stay zero
        const double pairing = detail::pairing_at<D>(F, lattice, flat);
        const bool is_resonant = pairing == 0.0 || resonant.count(k) > 0;
        if (is_resonant) {
            result.zeroed_modes.push_back(k);
            double mag_sq = 0.0;
            for (int c = 0; c < D; ++c) mag_sq += std::norm(h.slot(c, flat));
            dropped_sq += mag_sq;
            if (policy == ResonantPolicy::Strict && std::sqrt(mag_sq) > 1e-12 * h_norm) {
                std::array<int, 3> padded{0, 0, 0};
                for (int i = 0; i < D; ++i) padded[i] = k[i];
                offenders.push_back(padded);
            }
            continue;  // v(k) = 0 either way
        }
        const cplx factor{0.0, 1.0 / (two_pi * pairing)};
        for (int c = 0; c < D; ++c) result.v.slot(c, flat) = factor * h.slot(c, flat);
    }
    if (!offenders.empty()) {
        std::sort(offenders.begin(), offenders.end());
        throw UnsolvableModeError(
            "reconstruct_velocity: source has energy on " + std::to_string(offenders.size()) +
                " resonant mode(s); the transport symbol vanishes there, so no velocity "
                "produces that source component (strict policy)",
            D, std::move(offenders));
    }

    std::sort(result.zeroed_modes.begin(), result.zeroed_modes.end());
    result.dropped_energy = std::sqrt(dropped_sq);
    const double defect = l2_norm(transport_apply(F, result.v) + h);
    result.residual = h_norm > 0.0 ? defect / h_norm : 0.0;
    if (tau && C) result.stability_rhs = stability_rhs(h, *tau, *C);
    return result;
}

} // namespace magvel
