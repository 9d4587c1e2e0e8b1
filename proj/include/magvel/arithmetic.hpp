#pragma once

#include <array>
#include <cmath>
#include <cstdlib>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "magvel/fields.hpp"
#include "magvel/lattice.hpp"
#include "magvel/rational.hpp"

namespace magvel {

/// Windowed resonance scan over 0 < |k|_inf <= kmax: which integer modes k
/// annihilate the pairing F.g(k), exactly or below a tolerance.
template <int D>
struct ResonanceReport {
    int kmax = 0;
    std::vector<Mode<D>> resonant_modes;   // lexicographic, closed under negation
    double min_abs_pairing = 0.0;          // smallest |F.g(k)| over the scan
    Mode<D> argmin{};                      // mode attaining it (deterministic tie-break)
    std::string mode;                      // "exact-rational" or "float-threshold"
    double tolerance = 0.0;                // float mode only
};

struct EnvelopeRow {
    double k_norm;    // Euclidean |k|
    double pairing;   // shell minimum of |F.g(k)|
};

/// Windowed estimate of the constant C in |F.g(k)| >= C / |k|^tau.
template <int D>
struct DiophantineEstimate {
    double tau = 0.0;
    int kmax = 0;
    double C_est = 0.0;                 // min over the window of |F.g(k)| |k|^tau
    Mode<D> argmin_k{};
    std::vector<EnvelopeRow> envelope;  // rows where the shell minimum drops
};

struct IncommensurabilityResult {
    bool incommensurable = false;
    std::vector<long long> witness;     // nonzero integer relation when commensurable
};

namespace detail {

// Scan ranking: smaller |k|^2 first, then the sign-canonical representative
// (first nonzero component positive), then lexicographic. Keeps argmin
// reports deterministic under any scan order.
template <int D>
inline std::int64_t mode_norm_sq(const Mode<D>& k) {
    std::int64_t s = 0;
    for (int i = 0; i < D; ++i) s += static_cast<std::int64_t>(k[i]) * k[i];
    return s;
}

template <int D>
inline bool leading_negative(const Mode<D>& k) {
    for (int i = 0; i < D; ++i) {
        if (k[i] > 0) return false;
        if (k[i] < 0) return true;
    }
    return false;
}

template <int D>
inline bool mode_rank_less(const Mode<D>& a, const Mode<D>& b) {
    const auto na = mode_norm_sq<D>(a), nb = mode_norm_sq<D>(b);
    if (na != nb) return na < nb;
    const bool la = leading_negative<D>(a), lb = leading_negative<D>(b);
    if (la != lb) return lb;
    return a < b;
}

// Lexicographic walk over the box |k_i| <= kmax, skipping the origin.
template <int D, typename Fn>
inline void scan_box(int kmax, Fn&& fn) {
    Mode<D> k{};
    for (int i = 0; i < D; ++i) k[i] = -kmax;
    while (true) {
        bool origin = true;
        for (int i = 0; i < D; ++i) origin = origin && k[i] == 0;
        if (!origin) fn(k);
        int axis = D - 1;
        while (axis >= 0) {
            if (++k[axis] <= kmax) break;
            k[axis] = -kmax;
            --axis;
        }
        if (axis < 0) break;
    }
}

} // namespace detail

/// Exact-rational resonance scan. `ratios[i]` must be F_i / L_i as an exact
/// rational; a mode is resonant iff sum_i k_i ratios[i] = 0 in exact
/// arithmetic.
template <int D>
inline ResonanceReport<D> resonant_set(const std::array<Rational, D>& ratios, int kmax) {
    if (kmax < 1) throw std::invalid_argument("resonant_set: kmax must be >= 1");
    ResonanceReport<D> report;
    report.kmax = kmax;
    report.mode = "exact-rational";

    bool have_min = false;
    detail::scan_box<D>(kmax, [&](const Mode<D>& k) {
        Rational acc;
        for (int i = 0; i < D; ++i) acc = acc + k[i] * ratios[i];
        if (acc.is_zero()) report.resonant_modes.push_back(k);
        const double abs_pairing = std::abs(acc.to_double());
        if (!have_min || abs_pairing < report.min_abs_pairing ||
            (abs_pairing == report.min_abs_pairing && detail::mode_rank_less<D>(k, report.argmin))) {
            have_min = true;
            report.min_abs_pairing = abs_pairing;
            report.argmin = k;
        }
    });
    return report;
}

/// Float-threshold resonance scan: a mode is resonant iff |F.g(k)| < tolerance
/// with g(k) = (k_1/L_1, ..., k_d/L_d).
template <int D>
inline ResonanceReport<D> resonant_set(const BackgroundField<D>& F, const Vec<D>& periods,
                                       int kmax, double tolerance) {
    if (kmax < 1) throw std::invalid_argument("resonant_set: kmax must be >= 1");
    if (!(tolerance > 0.0)) throw std::invalid_argument("resonant_set: tolerance must be positive");
    for (double L : periods)
        if (!(L > 0.0) || !std::isfinite(L))
            throw std::invalid_argument("resonant_set: periods must be positive");

    ResonanceReport<D> report;
    report.kmax = kmax;
    report.mode = "float-threshold";
    report.tolerance = tolerance;

    bool have_min = false;
    detail::scan_box<D>(kmax, [&](const Mode<D>& k) {
        double pairing = 0.0;
        for (int i = 0; i < D; ++i) pairing += F[i] * (static_cast<double>(k[i]) / periods[i]);
        const double abs_pairing = std::abs(pairing);
        if (abs_pairing < tolerance) report.resonant_modes.push_back(k);
        if (!have_min || abs_pairing < report.min_abs_pairing ||
            (abs_pairing == report.min_abs_pairing && detail::mode_rank_less<D>(k, report.argmin))) {
            have_min = true;
            report.min_abs_pairing = abs_pairing;
            report.argmin = k;
        }
    });
    return report;
}

template <int D>
inline ResonanceReport<D> resonant_set(const BackgroundField<D>& F, const TorusLattice<D>& lattice,
                                       int kmax, double tolerance) {
    return resonant_set<D>(F, lattice.periods(), kmax, tolerance);
}

/// Exact decision of rational independence for the ratios F_i / L_i. Two or
/// more rational numbers always admit an integer relation, so for d in {2,3}
/// this returns false with a concrete witness; it exists to certify that
/// claim and to produce the witness.
inline IncommensurabilityResult is_incommensurable(const std::vector<Rational>& ratios) {
    if (ratios.empty()) throw std::invalid_argument("is_incommensurable: empty input");
    bool all_zero = true;
    for (const auto& r : ratios) all_zero = all_zero && r.is_zero();
    if (all_zero) throw std::invalid_argument("is_incommensurable: F must be nonzero");

    const auto d = ratios.size();
    std::vector<long long> witness(d, 0);

    // A zero component is annihilated by its own unit vector.
    for (std::size_t i = 0; i < d; ++i) {
        if (ratios[i].is_zero()) {
            witness[i] = 1;
            return {false, witness};
        }
    }
    if (d == 1) return {true, {}};  // one nonzero rational has no relation

    // All components nonzero: relate the first two, k1 r1 + k2 r2 = 0 with
    // k1 = p2 q1, k2 = -p1 q2, reduced by their gcd.
    const long long p1 = ratios[0].num(), q1 = ratios[0].den();
    const long long p2 = ratios[1].num(), q2 = ratios[1].den();
    const __int128 a = static_cast<__int128>(p2) * q1;
    const __int128 b = -static_cast<__int128>(p1) * q2;
    __int128 g = a < 0 ? -a : a;
    __int128 h = b < 0 ? -b : b;
    while (h != 0) { const __int128 t = g % h; g = h; h = t; }
    long long k1 = static_cast<long long>(a / g);
    long long k2 = static_cast<long long>(b / g);
    if (k1 < 0) { k1 = -k1; k2 = -k2; }  // sign-canonical witness
    witness[0] = k1;
    witness[1] = k2;
    return {false, witness};
}

/// Windowed Diophantine scan: C_est = min |F.g(k)| |k|^tau over
/// 0 < |k|_inf <= kmax, with a per-shell lower envelope for plotting.
template <int D>
inline DiophantineEstimate<D> diophantine_estimate(const BackgroundField<D>& F,
                                                   const Vec<D>& periods, double tau, int kmax) {
    if (kmax < 1) throw std::invalid_argument("diophantine_estimate: kmax must be >= 1");
    if (!std::isfinite(tau)) throw std::invalid_argument("diophantine_estimate: tau must be finite");
    for (double L : periods)
        if (!(L > 0.0) || !std::isfinite(L))
            throw std::invalid_argument("diophantine_estimate: periods must be positive");

    DiophantineEstimate<D> est;
    est.tau = tau;
    est.kmax = kmax;

    bool have_min = false;
    double best = 0.0;
    std::map<std::int64_t, double> shell_min;
    detail::scan_box<D>(kmax, [&](const Mode<D>& k) {
        double pairing = 0.0;
        for (int i = 0; i < D; ++i) pairing += F[i] * (static_cast<double>(k[i]) / periods[i]);
        const double abs_pairing = std::abs(pairing);
        const std::int64_t nsq = detail::mode_norm_sq<D>(k);
        const double value = abs_pairing * std::pow(std::sqrt(static_cast<double>(nsq)), tau);
        if (!have_min || value < best ||
            (value == best && detail::mode_rank_less<D>(k, est.argmin_k))) {
            have_min = true;
            best = value;
            est.argmin_k = k;
        }
        auto [it, inserted] = shell_min.try_emplace(nsq, abs_pairing);
        if (!inserted && abs_pairing < it->second) it->second = abs_pairing;
    });
    est.C_est = best;

    double running = std::numeric_limits<double>::infinity();
    for (const auto& [nsq, pairing] : shell_min) {
        if (pairing < running) {
            running = pairing;
            est.envelope.push_back({std::sqrt(static_cast<double>(nsq)), pairing});
        }
    }
    return est;
}

template <int D>
inline DiophantineEstimate<D> diophantine_estimate(const BackgroundField<D>& F,
                                                   const TorusLattice<D>& lattice, double tau,
                                                   int kmax) {
    return diophantine_estimate<D>(F, lattice.periods(), tau, kmax);
}

} // namespace magvel
