#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "boltzmc/errors.hpp"
#include "boltzmc/kernel.hpp"
#include "boltzmc/phase.hpp"
#include "boltzmc/ray.hpp"

namespace boltzmc {

struct SnQuadrature {
    std::vector<double> mu;
    std::vector<double> w;
};

/// Gauss-Legendre quadrature on [-1, 1].
inline SnQuadrature gauss_legendre(int n) {
    if (n < 2) throw ConfigError("need at least 2 ordinates");
    SnQuadrature q;
    q.mu.resize(n);
    q.w.resize(n);
    const int m = (n + 1) / 2;
    for (int i = 0; i < m; ++i) {
        // Newton iteration on P_n from the Chebyshev initial guess
        double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        double pp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            pp = n * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / pp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        q.mu[i] = -x;
        q.mu[n - 1 - i] = x;
        const double wi = 2.0 / ((1.0 - x * x) * pp * pp);
        q.w[i] = wi;
        q.w[n - 1 - i] = wi;
    }
    return q;
}

/// Equal-weight midpoint ordinates on [-1, 1].
inline SnQuadrature equal_weight(int n) {
    if (n < 2) throw ConfigError("need at least 2 ordinates");
    SnQuadrature q;
    q.mu.resize(n);
    q.w.assign(n, 2.0 / n);
    for (int i = 0; i < n; ++i) q.mu[i] = -1.0 + (i + 0.5) * (2.0 / n);
    return q;
}

/// Spatial cells over the slab plus an angular quadrature.
struct SnGrid {
    std::vector<double> x_edges;
    SnQuadrature quad;

    enum class Quadrature { GaussLegendre, EqualWeight };

    static SnGrid make(const Interval& x_bounds, int cells, int ordinates,
                       Quadrature kind = Quadrature::GaussLegendre) {
        if (cells < 1) throw ConfigError("need at least one spatial cell");
        SnGrid g;
        g.x_edges.resize(cells + 1);
        const double h = x_bounds.width() / cells;
        for (int i = 0; i <= cells; ++i) g.x_edges[i] = std::fma(static_cast<double>(i), h, x_bounds.lo);
        g.quad = kind == Quadrature::GaussLegendre ? gauss_legendre(ordinates) : equal_weight(ordinates);
        return g;
    }

    std::size_t nx() const { return x_edges.size() - 1; }
    std::size_t nord() const { return quad.mu.size(); }
    double h() const { return x_edges[1] - x_edges[0]; }
    double x_center(std::size_t i) const { return 0.5 * (x_edges[i] + x_edges[i + 1]); }
};

/// Converged cell-ordinate flux with iteration diagnostics.
struct SnField {
    SnGrid grid;
    std::vector<double> value; // cell-major: value[i * nord + k]
    int iterations = 0;
    bool converged = false;
    double final_change = 0.0;
    double spectral_estimate = 0.0;     // max Sigma_s / Sigma_t over cells
    std::vector<double> change_history; // Linf change of the scalar flux per iteration
    int negative_values = 0;            // diamond-difference undershoots below -1e-12

    double at(std::size_t i, std::size_t k) const { return value[i * grid.nord() + k]; }
};

namespace detail {

/// Angular redistribution matrix R[k][k']: the weight multiplying the k'-flux
/// in ordinate k's scattering source (including Sigma_s, excluding w_k').
struct SnScatterOperator {
    // forward:  Q_ik = sum_k' w_k' * R[k][k'](x_i) * F_ik'
    // with R[k][k'] = Sigma_s(x,mu_k') p(mu_k | mu_k') for the forward sweep
    // and  R[k][k'] = Sigma_s(x,mu_k)  p(mu_k' | mu_k) for the adjoint sweep.
    std::vector<double> p_density; // p(mu_row | mu_col), row-major over ordinates
    bool adjoint = false;
};

inline SnScatterOperator make_scatter_operator(const SnGrid& grid, const ScatterKernel& p,
                                               bool adjoint) {
    const std::size_t n = grid.nord();
    SnScatterOperator op;
    op.adjoint = adjoint;
    op.p_density.assign(n * n, 0.0);
    for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = 0; b < n; ++b) {
            // density p(mu_a | mu_b)
            const PhaseState cond{0.0, grid.quad.mu[b], std::nullopt};
            op.p_density[a * n + b] = p.eval(cond, ScatterOutcome{grid.quad.mu[a], std::nullopt});
        }
    }
    return op;
}

template <class SourceFn>
SnField solve_sn(const SnGrid& grid, const CrossSectionField& xs, const ScatterKernel& p,
                 SourceFn&& fixed_source, bool adjoint, double tol, int max_iterations) {
    const std::size_t nx = grid.nx();
    const std::size_t n = grid.nord();
    const double h = grid.h();

    std::vector<double> sig_t(nx), sig_s_cell(nx * n);
    double spectral = 0.0;
    for (std::size_t i = 0; i < nx; ++i) {
        double st_max = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            const PhaseState s{grid.x_center(i), grid.quad.mu[k], std::nullopt};
            sig_s_cell[i * n + k] = xs.sigma_s(s);
            st_max = std::max(st_max, xs.sigma_t(s));
            if (xs.sigma_t(s) > 0.0) spectral = std::max(spectral, xs.sigma_s(s) / xs.sigma_t(s));
        }
        (void)st_max;
    }

    const SnScatterOperator op = make_scatter_operator(grid, p, adjoint);

    SnField field;
    field.grid = grid;
    field.value.assign(nx * n, 0.0);
    field.spectral_estimate = spectral;

    std::vector<double> src(nx * n);
    for (std::size_t i = 0; i < nx; ++i) {
        for (std::size_t k = 0; k < n; ++k) {
            src[i * n + k] = fixed_source(grid.x_center(i), grid.quad.mu[k]);
        }
    }

    std::vector<double> scalar_old(nx, 0.0), scalar_new(nx, 0.0), q(nx * n);
    for (int it = 1; it <= max_iterations; ++it) {
        // scattering source from the previous iterate
        for (std::size_t i = 0; i < nx; ++i) {
            for (std::size_t k = 0; k < n; ++k) {
                double acc = 0.0;
                if (!op.adjoint) {
                    for (std::size_t kp = 0; kp < n; ++kp) {
                        acc += grid.quad.w[kp] * sig_s_cell[i * n + kp] *
                               op.p_density[k * n + kp] * field.value[i * n + kp];
                    }
                } else {
                    double sum = 0.0;
                    for (std::size_t kp = 0; kp < n; ++kp) {
                        sum += grid.quad.w[kp] * op.p_density[kp * n + k] * field.value[i * n + kp];
                    }
                    acc = sig_s_cell[i * n + k] * sum;
                }
                q[i * n + k] = src[i * n + k] + acc;
            }
        }

        // transport sweeps with diamond-difference closure, vacuum inflow.
        // forward streams +mu (mu>0 sweeps low->high); adjoint streams -mu.
        for (std::size_t k = 0; k < n; ++k) {
            const double mu = grid.quad.mu[k];
            const double am = std::abs(mu);
            const bool sweep_up = adjoint ? (mu < 0.0) : (mu > 0.0);
            const double denom = 2.0 * am / h;
            double psi_in = 0.0;
            if (sweep_up) {
                for (std::size_t i = 0; i < nx; ++i) {
                    const PhaseState s{grid.x_center(i), mu, std::nullopt};
                    const double psi_c = (q[i * n + k] + denom * psi_in) / (xs.sigma_t(s) + denom);
                    field.value[i * n + k] = psi_c;
                    psi_in = 2.0 * psi_c - psi_in;
                }
            } else {
                for (std::size_t ii = nx; ii-- > 0;) {
                    const PhaseState s{grid.x_center(ii), mu, std::nullopt};
                    const double psi_c = (q[ii * n + k] + denom * psi_in) / (xs.sigma_t(s) + denom);
                    field.value[ii * n + k] = psi_c;
                    psi_in = 2.0 * psi_c - psi_in;
                }
            }
        }

        // convergence on the scalar flux
        double max_change = 0.0, max_scalar = 0.0;
        for (std::size_t i = 0; i < nx; ++i) {
            double phi = 0.0;
            for (std::size_t k = 0; k < n; ++k) phi += grid.quad.w[k] * field.value[i * n + k];
            scalar_new[i] = phi;
            max_change = std::max(max_change, std::abs(phi - scalar_old[i]));
            max_scalar = std::max(max_scalar, std::abs(phi));
        }
        scalar_old = scalar_new;
        field.iterations = it;
        field.change_history.push_back(max_change);
        const double rel = max_scalar > 0.0 ? max_change / max_scalar : 0.0;
        field.final_change = rel;
        if (rel < tol) {
            field.converged = true;
            break;
        }
    }

    for (double vv : field.value) {
        if (vv < -1e-12) ++field.negative_values;
    }
    return field;
}

} // namespace detail

/// Source-iteration solve of the slab Boltzmann equation with vacuum inflow:
/// mu dF/dx + Sigma_t F = f + Int Sigma_s(x,mu') p(mu|mu') F(x,mu') dmu'.
inline SnField solve_forward_deterministic(const RegionDensity& f, const CrossSectionField& xs,
                                           const ScatterKernel& p, const SnGrid& grid,
                                           double tol = 1e-8, int max_iterations = 10'000) {
    return detail::solve_sn(
        grid, xs, p,
        [&](double x, double mu) { return f.eval(PhaseState{x, mu, std::nullopt}); }, false, tol,
        max_iterations);
}

/// Adjoint counterpart: -mu dPsi/dx + Sigma_t Psi = g + Sigma_s(x,mu)
/// Int p(mu'|mu) Psi(x,mu') dmu', solved with reversed sweep directions.
inline SnField solve_adjoint_deterministic(const RegionDensity& g, const CrossSectionField& xs,
                                           const ScatterKernel& p, const SnGrid& grid,
                                           double tol = 1e-8, int max_iterations = 10'000) {
    return detail::solve_sn(
        grid, xs, p,
        [&](double x, double mu) { return g.eval(PhaseState{x, mu, std::nullopt}); }, true, tol,
        max_iterations);
}

/// Discrete inner product <field, density> = sum_ik h w_k field_ik dens(x_i, mu_k).
inline double sn_inner_product(const SnField& field, const RegionDensity& density) {
    const auto& g = field.grid;
    double acc = 0.0;
    for (std::size_t i = 0; i < g.nx(); ++i) {
        for (std::size_t k = 0; k < g.nord(); ++k) {
            const double d = density.eval(PhaseState{g.x_center(i), g.quad.mu[k], std::nullopt});
            if (d != 0.0) acc += g.h() * g.quad.w[k] * field.at(i, k) * d;
        }
    }
    return acc;
}

/// Bilinear interpolation of the cell-ordinate field at (x, mu), clamped to
/// the grid hull.
inline double sn_eval(const SnField& field, double x, double mu) {
    const auto& g = field.grid;
    const std::size_t nx = g.nx(), n = g.nord();

    auto bracket = [](double v, auto&& coord, std::size_t count) {
        if (count == 1) return std::make_tuple(std::size_t{0}, std::size_t{0}, 0.0);
        std::size_t hi = 1;
        while (hi < count - 1 && coord(hi) < v) ++hi;
        const std::size_t lo = hi - 1;
        const double c0 = coord(lo), c1 = coord(hi);
        double t = (v - c0) / (c1 - c0);
        t = std::clamp(t, 0.0, 1.0);
        return std::make_tuple(lo, hi, t);
    };

    const auto [i0, i1, tx] = bracket(x, [&](std::size_t i) { return g.x_center(i); }, nx);
    const auto [k0, k1, tm] = bracket(mu, [&](std::size_t k) { return g.quad.mu[k]; }, n);
    const double v00 = field.at(i0, k0), v01 = field.at(i0, k1);
    const double v10 = field.at(i1, k0), v11 = field.at(i1, k1);
    return (1.0 - tx) * ((1.0 - tm) * v00 + tm * v01) + tx * ((1.0 - tm) * v10 + tm * v11);
}

/// Closed-form pure-absorber score: Int g(ray(t)) exp(-Sigma_a path) dt along
/// the straight ray from `start` (direction_sign -1 gives the adjoint ray).
/// Requires Sigma_s = 0 everywhere and Omega != 0.
inline double analytic_pure_absorber(const PhaseState& start, const RegionDensity& region,
                                     const CrossSectionField& xs, double v,
                                     double direction_sign = +1.0) {
    if (xs.default_sigma_s() != 0.0 ||
        std::any_of(xs.overrides().begin(), xs.overrides().end(),
                    [](const auto& o) { return o.sigma_s != 0.0; })) {
        throw PreconditionError("analytic_pure_absorber requires Sigma_s = 0 everywhere");
    }
    if (start.omega == 0.0) throw PreconditionError("ray undefined for Omega = 0");

    const Interval hull{std::min({start.x, region.rect().x.lo}) - 1.0,
                        std::max({start.x, region.rect().x.hi}) + 1.0};
    const auto breaks = xs.x_breakpoints(start.omega, start.energy, hull);
    return ray::ray_region_integral(
        start, region.rect(), region.value(),
        [&](const PhaseState& s) { return xs.sigma_a(s); }, breaks, v, direction_sign);
}

} // namespace boltzmc
