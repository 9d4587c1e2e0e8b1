#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <type_traits>
#include <vector>

#include "magvel/fields.hpp"
#include "magvel/lattice.hpp"

namespace magvel {

/**
 * Affine hyperplane through the origin, equipped with an orthonormal basis of
 * its tangent space and a background direction F transversal to it. The
 * transversality requirement |F.n| > 1e-12 |F| is what makes x = pi(x) +
 * tau(x) F a global change of variables; a surface that fails it is
 * characteristic for the transport operator and is rejected here.
 */
template <int D>
class HyperplaneChart {
    static_assert(D == 2 || D == 3, "only dimensions 2 and 3 are supported");

public:
    HyperplaneChart(const Vec<D>& normal, const BackgroundField<D>& background)
        : background_(background) {
        if (!vec::finite<D>(normal))
            throw std::invalid_argument("HyperplaneChart: normal must be finite");
        const double nn = vec::norm<D>(normal);
        if (!(nn > 0.0))
            throw std::invalid_argument("HyperplaneChart: normal must be nonzero");
        normal_ = vec::scaled<D>(normal, 1.0 / nn);
        pairing_ = vec::dot<D>(background_.value(), normal_);
        if (std::abs(pairing_) <= 1e-12 * vec::norm<D>(background_.value()))
            throw std::invalid_argument(
                "HyperplaneChart: surface is characteristic (|F . n| <= 1e-12 |F|); "
                "the transport problem needs a non-characteristic surface");

        // Tangent basis: Gram-Schmidt over the coordinate axes, skipping the
        // axis most aligned with n. The skipped axis guarantees the remaining
        // projections stay well conditioned.
        int skip = 0;
        for (int i = 1; i < D; ++i)
            if (std::abs(normal_[i]) > std::abs(normal_[skip])) skip = i;
        int out = 0;
        for (int i = 0; i < D; ++i) {
            if (i == skip) continue;
            Vec<D> w{};
            w[i] = 1.0;
            w = vec::axpy<D>(-normal_[i], normal_, w);
            for (int j = 0; j < out; ++j)
                w = vec::axpy<D>(-vec::dot<D>(w, basis_[j]), basis_[j], w);
            basis_[out++] = vec::scaled<D>(w, 1.0 / vec::norm<D>(w));
        }
    }

    /// Rebuilds a chart from stored geometry without renormalizing, so a
    /// round trip through serialized doubles is bit-stable. The invariants
    /// are still enforced, at their stated tolerances.
    static HyperplaneChart adopt(const Vec<D>& normal, const BackgroundField<D>& background,
                                 const std::array<Vec<D>, D - 1>& basis) {
        if (!vec::finite<D>(normal) || std::abs(vec::norm<D>(normal) - 1.0) > 1e-14)
            throw std::invalid_argument("HyperplaneChart: stored normal is not unit length");
        for (int i = 0; i < D - 1; ++i) {
            if (!vec::finite<D>(basis[i]) || std::abs(vec::norm<D>(basis[i]) - 1.0) > 1e-14)
                throw std::invalid_argument("HyperplaneChart: stored basis is not unit length");
            if (std::abs(vec::dot<D>(basis[i], normal)) > 1e-14)
                throw std::invalid_argument("HyperplaneChart: stored basis is not tangent");
            for (int j = 0; j < i; ++j)
                if (std::abs(vec::dot<D>(basis[i], basis[j])) > 1e-14)
                    throw std::invalid_argument("HyperplaneChart: stored basis is not orthogonal");
        }
        HyperplaneChart c(background);
        c.normal_ = normal;
        c.basis_ = basis;
        c.pairing_ = vec::dot<D>(background.value(), normal);
        if (std::abs(c.pairing_) <= 1e-12 * vec::norm<D>(background.value()))
            throw std::invalid_argument(
                "HyperplaneChart: surface is characteristic (|F . n| <= 1e-12 |F|); "
                "the transport problem needs a non-characteristic surface");
        return c;
    }

    const Vec<D>& normal() const { return normal_; }
    const BackgroundField<D>& background() const { return background_; }
    const std::array<Vec<D>, D - 1>& surface_basis() const { return basis_; }
    /// F.n; bounded away from zero by construction.
    double pairing() const { return pairing_; }

    /// Embeds surface coordinates y into R^d.
    Vec<D> surface_point(const std::array<double, D - 1>& y) const {
        Vec<D> p{};
        for (int j = 0; j < D - 1; ++j) p = vec::axpy<D>(y[j], basis_[j], p);
        return p;
    }

private:
    explicit HyperplaneChart(const BackgroundField<D>& background) : background_(background) {}

    Vec<D> normal_{};
    BackgroundField<D> background_;
    std::array<Vec<D>, D - 1> basis_{};
    double pairing_ = 0.0;
};

/// Coordinates of x in the characteristic chart: x = pi + tau F with pi on
/// the surface, y the basis coordinates of pi.
template <int D>
struct ChartCoordinates {
    std::array<double, D - 1> y{};
    double tau = 0.0;
};

template <int D>
ChartCoordinates<D> chart_decompose(const HyperplaneChart<D>& chart,
                                    const std::type_identity_t<Vec<D>>& x) {
    ChartCoordinates<D> c;
    c.tau = vec::dot<D>(x, chart.normal()) / chart.pairing();
    const Vec<D> pi = vec::axpy<D>(-c.tau, chart.background().value(), x);
    for (int j = 0; j < D - 1; ++j) c.y[j] = vec::dot<D>(pi, chart.surface_basis()[j]);
    return c;
}

/**
 * Extents of a characteristic-aligned slab: a (2W_i)-sized surface window
 * sampled with M_i nodes per tangent direction, swept along the background
 * direction over s in [-S, S] with M_s nodes. M_s must be odd so that s = 0
 * is a grid plane; the trace identity is stated there.
 */
template <int D>
struct SlabSpec {
    std::array<double, D - 1> half_widths{};
    std::array<int, D - 1> surface_counts{};
    double s_half_width = 0.0;
    int s_count = 0;
};

/**
 * Vector samples on the slab grid x(a, b) = sum_i u_i(a_i) e_i + s(b) F with
 * u_i, s uniform over [-W_i, W_i] and [-S, S]. Nodes are generated exactly on
 * the characteristic lines, so integrating the transport equation along a
 * line never interpolates. Storage is component-outermost, row-major over
 * (a_1, ..., a_{d-1}, b); each characteristic line is contiguous.
 */
template <int D>
class SlabGrid {
public:
    SlabGrid(const HyperplaneChart<D>& chart, const SlabSpec<D>& spec)
        : chart_(chart), spec_(spec) {
        for (int i = 0; i < D - 1; ++i) {
            if (!(spec_.half_widths[i] > 0.0) || !std::isfinite(spec_.half_widths[i]))
                throw std::invalid_argument("SlabGrid: half widths must be positive and finite");
            if (spec_.surface_counts[i] < 3)
                throw std::invalid_argument("SlabGrid: surface counts must be at least 3");
        }
        if (!(spec_.s_half_width > 0.0) || !std::isfinite(spec_.s_half_width))
            throw std::invalid_argument("SlabGrid: s half width must be positive and finite");
        if (spec_.s_count < 3 || spec_.s_count % 2 == 0)
            throw std::invalid_argument(
                "SlabGrid: s count must be odd and at least 3 so the trace plane s = 0 "
                "is a grid plane");
        values_.assign(static_cast<std::size_t>(D) * node_count(), 0.0);
    }

    const HyperplaneChart<D>& chart() const { return chart_; }
    const SlabSpec<D>& spec() const { return spec_; }

    std::size_t surface_point_count() const {
        std::size_t n = 1;
        for (int i = 0; i < D - 1; ++i) n *= static_cast<std::size_t>(spec_.surface_counts[i]);
        return n;
    }
    std::size_t node_count() const {
        return surface_point_count() * static_cast<std::size_t>(spec_.s_count);
    }

    /// u_i(a) in [-W_i, W_i]; endpoints land exactly on +-W_i.
    double surface_coordinate(int dir, int a) const {
        const int m = spec_.surface_counts[dir];
        return spec_.half_widths[dir] * double(2 * a - (m - 1)) / double(m - 1);
    }
    /// s(b) in [-S, S]; the middle node is exactly 0.
    double s_coordinate(int b) const {
        return spec_.s_half_width * double(2 * b - (spec_.s_count - 1)) /
               double(spec_.s_count - 1);
    }
    double s_step() const { return 2.0 * spec_.s_half_width / double(spec_.s_count - 1); }
    int mid_index() const { return (spec_.s_count - 1) / 2; }

    std::size_t surface_flat(const std::array<int, D - 1>& a) const {
        std::size_t f = 0;
        for (int i = 0; i < D - 1; ++i)
            f = f * static_cast<std::size_t>(spec_.surface_counts[i]) +
                static_cast<std::size_t>(a[i]);
        return f;
    }
    std::array<int, D - 1> surface_of_flat(std::size_t f) const {
        std::array<int, D - 1> a{};
        for (int i = D - 2; i >= 0; --i) {
            const auto m = static_cast<std::size_t>(spec_.surface_counts[i]);
            a[i] = static_cast<int>(f % m);
            f /= m;
        }
        return a;
    }

    Vec<D> node_point(const std::array<int, D - 1>& a, int b) const {
        Vec<D> p = vec::scaled<D>(chart_.background().value(), s_coordinate(b));
        for (int i = 0; i < D - 1; ++i)
            p = vec::axpy<D>(surface_coordinate(i, a[i]), chart_.surface_basis()[i], p);
        return p;
    }

    double value(int c, std::size_t surface, int b) const { return values_[slot(c, surface, b)]; }
    double& value(int c, std::size_t surface, int b) { return values_[slot(c, surface, b)]; }
    const std::vector<double>& values() const { return values_; }
    std::vector<double>& values() { return values_; }

    /// Copy of the s = 0 plane, indexed by flattened surface node.
    std::vector<std::array<double, D>> trace() const {
        std::vector<std::array<double, D>> t(surface_point_count());
        for (std::size_t f = 0; f < t.size(); ++f)
            for (int c = 0; c < D; ++c) t[f][c] = value(c, f, mid_index());
        return t;
    }

private:
    std::size_t slot(int c, std::size_t surface, int b) const {
        return (static_cast<std::size_t>(c) * surface_point_count() + surface) *
                   static_cast<std::size_t>(spec_.s_count) +
               static_cast<std::size_t>(b);
    }

    HyperplaneChart<D> chart_;
    SlabSpec<D> spec_;
    std::vector<double> values_;
};

/// Samples a callable x -> array<double, D> at every slab node.
template <int D, class Fn>
SlabGrid<D> sample_slab(const HyperplaneChart<D>& chart, const SlabSpec<D>& spec, Fn&& f) {
    SlabGrid<D> g(chart, spec);
    const std::size_t surfaces = g.surface_point_count();
    for (std::size_t sf = 0; sf < surfaces; ++sf) {
        const auto a = g.surface_of_flat(sf);
        for (int b = 0; b < spec.s_count; ++b) {
            const std::array<double, D> val = f(g.node_point(a, b));
            for (int c = 0; c < D; ++c) {
                if (!std::isfinite(val[c]))
                    throw std::invalid_argument("sample_slab: field values must be finite");
                g.value(c, sf, b) = val[c];
            }
        }
    }
    return g;
}

/// Samples trace data on the s = 0 surface nodes only.
template <int D, class Fn>
std::vector<std::array<double, D>> sample_trace(const HyperplaneChart<D>& chart,
                                                const SlabSpec<D>& spec, Fn&& f) {
    SlabGrid<D> g(chart, spec);  // geometry only
    std::vector<std::array<double, D>> t(g.surface_point_count());
    for (std::size_t sf = 0; sf < t.size(); ++sf) {
        t[sf] = f(g.node_point(g.surface_of_flat(sf), g.mid_index()));
        for (int c = 0; c < D; ++c)
            if (!std::isfinite(t[sf][c]))
                throw std::invalid_argument("sample_trace: trace values must be finite");
    }
    return t;
}

/**
 * Integrates v(y + sF) = v_S(y) - int_0^s h(y + s'F) ds' line by line with
 * the cumulative composite trapezoid rule, marching outward from the s = 0
 * plane in both directions. The trace plane receives v_S verbatim, so the
 * trace identity is bitwise. Exact on constant h up to round-off.
 */
template <int D>
SlabGrid<D> solve_slab(const SlabGrid<D>& h,
                       const std::type_identity_t<std::vector<std::array<double, D>>>& trace) {
    if (trace.size() != h.surface_point_count())
        throw std::invalid_argument("solve_slab: trace samples do not match the surface grid");
    SlabGrid<D> v(h.chart(), h.spec());
    const int mid = h.mid_index();
    const int ms = h.spec().s_count;
    const double half_ds = 0.5 * h.s_step();
    for (std::size_t sf = 0; sf < trace.size(); ++sf) {
        for (int c = 0; c < D; ++c) {
            v.value(c, sf, mid) = trace[sf][c];
            for (int b = mid; b + 1 < ms; ++b)
                v.value(c, sf, b + 1) =
                    v.value(c, sf, b) - half_ds * (h.value(c, sf, b) + h.value(c, sf, b + 1));
            for (int b = mid; b > 0; --b)
                v.value(c, sf, b - 1) =
                    v.value(c, sf, b) + half_ds * (h.value(c, sf, b) + h.value(c, sf, b - 1));
        }
    }
    return v;
}

template <int D, class HFn, class TFn>
SlabGrid<D> solve_slab(const HyperplaneChart<D>& chart, const SlabSpec<D>& spec, HFn&& h,
                       TFn&& trace) {
    return solve_slab(sample_slab<D>(chart, spec, std::forward<HFn>(h)),
                      sample_trace<D>(chart, spec, std::forward<TFn>(trace)));
}

/**
 * Max norm of (F.grad) v + h over interior s-nodes. Along a characteristic
 * line d/ds v(y + sF) = (F.grad) v, so the directional derivative reduces to
 * a central difference in b. Normalized by max(1, max |h|).
 */
template <int D>
double transport_residual_slab(const SlabGrid<D>& v, const SlabGrid<D>& h) {
    if (v.spec().s_count != h.spec().s_count ||
        v.surface_point_count() != h.surface_point_count())
        throw std::invalid_argument("transport_residual_slab: grids have different shapes");
    const int ms = v.spec().s_count;
    const double inv_2ds = 1.0 / (2.0 * v.s_step());
    double worst = 0.0, h_max = 0.0;
    for (const double x : h.values()) h_max = std::max(h_max, std::abs(x));
    for (std::size_t sf = 0; sf < v.surface_point_count(); ++sf)
        for (int c = 0; c < D; ++c)
            for (int b = 1; b + 1 < ms; ++b) {
                const double ds_v = (v.value(c, sf, b + 1) - v.value(c, sf, b - 1)) * inv_2ds;
                worst = std::max(worst, std::abs(ds_v + h.value(c, sf, b)));
            }
    return worst / std::max(1.0, h_max);
}

namespace detail {

/// Gauss elimination with partial pivoting; the chart Jacobian is always
/// invertible (orthonormal tangent block plus a transversal F column).
template <int D>
std::array<std::array<double, D>, D> invert(std::array<std::array<double, D>, D> m) {
    std::array<std::array<double, D>, D> inv{};
    for (int i = 0; i < D; ++i) inv[i][i] = 1.0;
    for (int col = 0; col < D; ++col) {
        int piv = col;
        for (int r = col + 1; r < D; ++r)
            if (std::abs(m[r][col]) > std::abs(m[piv][col])) piv = r;
        std::swap(m[piv], m[col]);
        std::swap(inv[piv], inv[col]);
        const double scale = 1.0 / m[col][col];
        for (int j = 0; j < D; ++j) {
            m[col][j] *= scale;
            inv[col][j] *= scale;
        }
        for (int r = 0; r < D; ++r) {
            if (r == col) continue;
            const double f = m[r][col];
            for (int j = 0; j < D; ++j) {
                m[r][j] -= f * m[col][j];
                inv[r][j] -= f * inv[col][j];
            }
        }
    }
    return inv;
}

} // namespace detail

/**
 * Max |div v| over interior nodes by chain rule through the affine chart
 * x = Phi(u, s): grad_x = J^{-T} grad_{(u,s)} with the constant Jacobian
 * J = [e_1 ... e_{d-1} F]. Central differences in every grid direction;
 * boundary nodes carry one-sided trace artifacts and are excluded.
 * Normalized by max(1, max Frobenius norm of grad v).
 */
template <int D>
double divergence_residual_slab(const SlabGrid<D>& v) {
    const auto& spec = v.spec();
    for (int i = 0; i < D - 1; ++i)
        if (spec.surface_counts[i] < 5)
            throw std::invalid_argument(
                "divergence_residual_slab: surface counts must be at least 5");
    if (spec.s_count < 5)
        throw std::invalid_argument("divergence_residual_slab: s count must be at least 5");

    // Column m of J is the m-th chart direction in R^d.
    std::array<std::array<double, D>, D> jac{};
    for (int m = 0; m < D - 1; ++m)
        for (int r = 0; r < D; ++r) jac[r][m] = v.chart().surface_basis()[m][r];
    for (int r = 0; r < D; ++r) jac[r][D - 1] = v.chart().background().value()[r];
    const auto jinv = detail::invert<D>(jac);

    std::array<double, D> inv_2dw{};
    for (int i = 0; i < D - 1; ++i)
        inv_2dw[i] = double(spec.surface_counts[i] - 1) / (4.0 * spec.half_widths[i]);
    inv_2dw[D - 1] = 1.0 / (2.0 * v.s_step());

    std::array<std::size_t, D - 1> stride{};  // surface-flat stride of each direction
    {
        std::size_t s = 1;
        for (int i = D - 2; i >= 0; --i) {
            stride[i] = s;
            s *= static_cast<std::size_t>(spec.surface_counts[i]);
        }
    }

    double worst = 0.0, grad_max = 0.0;
    std::array<int, D - 1> a{};
    for (std::size_t sf = 0; sf < v.surface_point_count(); ++sf) {
        a = v.surface_of_flat(sf);
        bool interior = true;
        for (int i = 0; i < D - 1; ++i)
            if (a[i] < 1 || a[i] + 1 >= spec.surface_counts[i]) interior = false;
        if (!interior) continue;
        for (int b = 1; b + 1 < spec.s_count; ++b) {
            // G[m][c] = d v_c / d w_m in chart coordinates.
            std::array<std::array<double, D>, D> g{};
            for (int c = 0; c < D; ++c) {
                for (int m = 0; m < D - 1; ++m)
                    g[m][c] = (v.value(c, sf + stride[m], b) - v.value(c, sf - stride[m], b)) *
                              inv_2dw[m];
                g[D - 1][c] = (v.value(c, sf, b + 1) - v.value(c, sf, b - 1)) * inv_2dw[D - 1];
            }
            double div = 0.0, frob = 0.0;
            for (int c = 0; c < D; ++c)
                for (int m = 0; m < D; ++m) div += jinv[m][c] * g[m][c];
            // d v_c / d x_r = sum_m jinv[m][r] g[m][c]
            for (int c = 0; c < D; ++c)
                for (int r = 0; r < D; ++r) {
                    double d = 0.0;
                    for (int m = 0; m < D; ++m) d += jinv[m][r] * g[m][c];
                    frob += d * d;
                }
            worst = std::max(worst, std::abs(div));
            grad_max = std::max(grad_max, std::sqrt(frob));
        }
    }
    return worst / std::max(1.0, grad_max);
}

} // namespace magvel
