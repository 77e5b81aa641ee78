#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "boltzmc/oracle.hpp"

using namespace boltzmc;

namespace {

// closed-form pure-absorber flux for a slab source f = c on [a,b] x [-1,1]
// with constant Sigma_t and vacuum inflow on x in [-1,1]:
//   mu dPhi/dx + Sigma_t Phi = f
double slab_flux_closed_form(double x, double mu, double a, double b, double c, double st) {
    const double am = std::abs(mu);
    if (mu > 0.0) {
        const double hi = std::min(b, x);
        if (hi <= a) return 0.0;
        return (c / st) * (std::exp(-st * (x - hi) / am) - std::exp(-st * (x - a) / am));
    }
    if (mu < 0.0) {
        const double lo = std::max(a, x);
        if (lo >= b) return 0.0;
        return (c / st) * (std::exp(-st * (lo - x) / am) - std::exp(-st * (b - x) / am));
    }
    return (a <= x && x <= b) ? c / st : 0.0;
}

// adjoint counterpart: -mu dPsi/dx + Sigma_t Psi = g
double slab_adjoint_closed_form(double x, double mu, double a, double b, double c, double st) {
    return slab_flux_closed_form(x, -mu, a, b, c, st);
}

RegionDensity r1() { return RegionDensity::normalized(Rect{{0.29, 0.69}, {-1.0, 1.0}}); }
RegionDensity r2() { return RegionDensity::normalized(Rect{{-0.22, -0.06}, {-1.0, 1.0}}); }

} // namespace

TEST_CASE("Gauss-Legendre quadrature is exact and normalized") {
    for (int n : {4, 16, 64}) {
        const auto q = gauss_legendre(n);
        double wsum = 0.0, x2 = 0.0;
        for (int k = 0; k < n; ++k) {
            wsum += q.w[k];
            x2 += q.w[k] * q.mu[k] * q.mu[k];
            CHECK(q.mu[k] == Catch::Approx(-q.mu[n - 1 - k]).margin(1e-14));
        }
        CHECK(wsum == Catch::Approx(2.0).margin(1e-12));
        CHECK(x2 == Catch::Approx(2.0 / 3.0).margin(1e-12));
    }
    const auto eq = equal_weight(10);
    double wsum = 0.0;
    for (double w : eq.w) wsum += w;
    CHECK(wsum == Catch::Approx(2.0).margin(1e-12));
}

TEST_CASE("zero source gives a zero field") {
    const CrossSectionField xs(5.0, 2.5);
    const auto p = ScatterKernel::uniform(Interval{-1.0, 1.0});
    const auto grid = SnGrid::make(Interval{-1.0, 1.0}, 50, 8);
    const auto zero = RegionDensity::with_value(Rect{{0.0, 0.1}, {-1.0, 1.0}}, 0.0);

    const auto phi = solve_forward_deterministic(zero, xs, p, grid);
    CHECK(phi.converged);
    for (double v : phi.value) CHECK(v == 0.0);

    const auto psi = solve_adjoint_deterministic(zero, xs, p, grid);
    CHECK(psi.converged);
    for (double v : psi.value) CHECK(v == 0.0);
}

TEST_CASE("pure absorber matches the attenuated line integral within 1%") {
    const CrossSectionField xs(5.0, 0.0);
    const auto p = ScatterKernel::uniform(Interval{-1.0, 1.0});
    const auto grid = SnGrid::make(Interval{-1.0, 1.0}, 400, 64);
    const auto f = r1();

    const auto phi = solve_forward_deterministic(f, xs, p, grid);
    CHECK(phi.converged);
    CHECK(phi.iterations <= 3); // no scattering: one sweep settles the field

    double max_ref = 0.0;
    for (std::size_t i = 0; i < grid.nx(); ++i) {
        for (std::size_t k = 0; k < grid.nord(); ++k) {
            max_ref = std::max(max_ref, slab_flux_closed_form(grid.x_center(i), grid.quad.mu[k],
                                                              0.29, 0.69, f.value(), 5.0));
        }
    }
    for (std::size_t i = 0; i < grid.nx(); ++i) {
        for (std::size_t k = 0; k < grid.nord(); ++k) {
            const double ref = slab_flux_closed_form(grid.x_center(i), grid.quad.mu[k], 0.29, 0.69,
                                                     f.value(), 5.0);
            if (ref < 1e-2 * max_ref) continue;
            CHECK(phi.at(i, k) == Catch::Approx(ref).epsilon(0.01));
        }
    }

    const auto psi = solve_adjoint_deterministic(r2(), xs, p, grid);
    double max_ref_a = 0.0;
    for (std::size_t i = 0; i < grid.nx(); ++i) {
        for (std::size_t k = 0; k < grid.nord(); ++k) {
            max_ref_a = std::max(max_ref_a, slab_adjoint_closed_form(grid.x_center(i), grid.quad.mu[k],
                                                                     -0.22, -0.06, r2().value(), 5.0));
        }
    }
    for (std::size_t i = 0; i < grid.nx(); ++i) {
        for (std::size_t k = 0; k < grid.nord(); ++k) {
            const double ref = slab_adjoint_closed_form(grid.x_center(i), grid.quad.mu[k], -0.22,
                                                        -0.06, r2().value(), 5.0);
            if (ref < 1e-2 * max_ref_a) continue;
            CHECK(psi.at(i, k) == Catch::Approx(ref).epsilon(0.01));
        }
    }
}

TEST_CASE("source iteration converges at the scattering-ratio rate") {
    const CrossSectionField xs(5.0, 2.5); // c = 1/3
    const auto p = ScatterKernel::uniform(Interval{-1.0, 1.0});
    const auto grid = SnGrid::make(Interval{-1.0, 1.0}, 200, 32);

    const auto phi = solve_forward_deterministic(r1(), xs, p, grid);
    CHECK(phi.converged);
    CHECK(phi.spectral_estimate == Catch::Approx(1.0 / 3.0));

    // asymptotic error-reduction ratio must not exceed c + 0.05
    const auto& h = phi.change_history;
    REQUIRE(h.size() >= 6);
    double worst = 0.0;
    for (std::size_t i = h.size() - 4; i < h.size(); ++i) {
        if (h[i - 1] > 0.0) worst = std::max(worst, h[i] / h[i - 1]);
    }
    CHECK(worst <= 1.0 / 3.0 + 0.05);
}

TEST_CASE("discrete adjoint identity on matched grids") {
    const auto p = ScatterKernel::uniform(Interval{-1.0, 1.0});
    const auto grid = SnGrid::make(Interval{-1.0, 1.0}, 200, 32);
    const auto f = r1();
    const auto g = r2();

    SECTION("standard slab configuration") {
        const CrossSectionField xs(5.0, 2.5);
        const auto phi = solve_forward_deterministic(f, xs, p, grid, 1e-10);
        const auto psi = solve_adjoint_deterministic(g, xs, p, grid, 1e-10);
        const double a = sn_inner_product(psi, f);
        const double b = sn_inner_product(phi, g);
        CHECK(std::abs(a - b) <= 1e-6 * std::max(std::abs(a), std::abs(b)));
    }

    SECTION("tabulated anisotropic kernel and piecewise cross sections") {
        CrossSectionField xs(1.0, 1.5);
        xs.add_override(Rect{{-0.4, 0.2}, {-1.0, 1.0}}, 2.0, 0.5);
        const auto pk = ScatterKernel::tabulated({-1.0, 0.0, 1.0}, {-1.0, 0.0, 1.0},
                                                 {{0.7, 0.3}, {0.2, 0.8}});
        const auto phi = solve_forward_deterministic(f, xs, pk, grid, 1e-10);
        const auto psi = solve_adjoint_deterministic(g, xs, pk, grid, 1e-10);
        const double a = sn_inner_product(psi, f);
        const double b = sn_inner_product(phi, g);
        CHECK(std::abs(a - b) <= 1e-6 * std::max(std::abs(a), std::abs(b)));
    }
}

TEST_CASE("refinement drives the pure-absorber error to zero monotonically") {
    const CrossSectionField xs(5.0, 0.0);
    const auto p = ScatterKernel::uniform(Interval{-1.0, 1.0});
    const auto f = r1();

    auto error_at = [&](int cells, int ords) {
        const auto grid = SnGrid::make(Interval{-1.0, 1.0}, cells, ords);
        const auto phi = solve_forward_deterministic(f, xs, p, grid);
        double err = 0.0;
        for (std::size_t i = 0; i < grid.nx(); ++i) {
            for (std::size_t k = 0; k < grid.nord(); ++k) {
                const double ref = slab_flux_closed_form(grid.x_center(i), grid.quad.mu[k], 0.29,
                                                         0.69, f.value(), 5.0);
                err = std::max(err, std::abs(phi.at(i, k) - ref));
            }
        }
        return err;
    };

    const double e1 = error_at(100, 16);
    const double e2 = error_at(200, 32);
    const double e3 = error_at(400, 64);
    CHECK(e2 < e1);
    CHECK(e3 < e2);
}

TEST_CASE("converged fluxes are nonnegative for nonnegative sources") {
    const CrossSectionField xs(5.0, 2.5);
    const auto p = ScatterKernel::uniform(Interval{-1.0, 1.0});
    const auto grid = SnGrid::make(Interval{-1.0, 1.0}, 400, 64);
    const auto phi = solve_forward_deterministic(r1(), xs, p, grid);
    CHECK(phi.negative_values == 0);
}

TEST_CASE("analytic pure absorber closed forms") {
    const auto g = RegionDensity::normalized(Rect{{0.2, 0.5}, {-1.0, 1.0}});
    const double gv = g.value(); // 1 / (0.3 * 2)

    SECTION("no absorption: residence time to the region exit") {
        const CrossSectionField xs(0.0, 0.0);
        const double v = analytic_pure_absorber(PhaseState{0.3, 1.0}, g, xs, 1.0);
        CHECK(v == Catch::Approx(0.2 * gv).epsilon(1e-12));
    }

    SECTION("aimed away gives zero") {
        const CrossSectionField xs(0.0, 0.0);
        CHECK(analytic_pure_absorber(PhaseState{0.1, -1.0}, g, xs, 1.0) == 0.0);
        CHECK(analytic_pure_absorber(PhaseState{0.6, 1.0}, g, xs, 1.0) == 0.0);
    }

    SECTION("gap then slab: elementary integral") {
        const CrossSectionField xs(5.0, 0.0);
        const double d = 0.1, w = 0.3;
        const double expected = gv * (std::exp(-5.0 * d) - std::exp(-5.0 * (d + w))) / 5.0;
        CHECK(analytic_pure_absorber(PhaseState{0.1, 1.0}, g, xs, 1.0) ==
              Catch::Approx(expected).epsilon(1e-12));
    }

    SECTION("piecewise absorber handled via breakpoints") {
        CrossSectionField xs(1.0, 0.0);
        xs.add_override(Rect{{0.0, 0.2}, {-1.0, 1.0}}, 4.0, 0.0);
        // start at -0.1 moving +x: depth to region entry = 1*0.1 + 4*0.2
        const double to_entry = 0.1 * 1.0 + 0.2 * 4.0;
        const double expected = gv * std::exp(-to_entry) * (1.0 - std::exp(-1.0 * 0.3)) / 1.0;
        CHECK(analytic_pure_absorber(PhaseState{-0.1, 1.0}, g, xs, 1.0) ==
              Catch::Approx(expected).epsilon(1e-12));
    }

    SECTION("preconditions") {
        const CrossSectionField scattering(1.0, 0.5);
        CHECK_THROWS_AS(analytic_pure_absorber(PhaseState{0.0, 1.0}, g, scattering, 1.0),
                        PreconditionError);
        const CrossSectionField xs(1.0, 0.0);
        CHECK_THROWS_AS(analytic_pure_absorber(PhaseState{0.0, 0.0}, g, xs, 1.0),
                        PreconditionError);
    }
}

TEST_CASE("sn_eval interpolates the field") {
    const CrossSectionField xs(5.0, 0.0);
    const auto p = ScatterKernel::uniform(Interval{-1.0, 1.0});
    const auto grid = SnGrid::make(Interval{-1.0, 1.0}, 400, 64);
    const auto phi = solve_forward_deterministic(r1(), xs, p, grid);

    // interpolation at grid nodes reproduces node values
    CHECK(sn_eval(phi, grid.x_center(100), grid.quad.mu[10]) ==
          Catch::Approx(phi.at(100, 10)).margin(1e-12));
    // between nodes stays between the bracketing values
    const double v = sn_eval(phi, 0.5 * (grid.x_center(100) + grid.x_center(101)), grid.quad.mu[10]);
    const double lo = std::min(phi.at(100, 10), phi.at(101, 10));
    const double hi = std::max(phi.at(100, 10), phi.at(101, 10));
    CHECK(v >= lo - 1e-15);
    CHECK(v <= hi + 1e-15);
}
