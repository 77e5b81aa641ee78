#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "boltzmc/kernel.hpp"
#include "boltzmc/rng.hpp"

using namespace boltzmc;

namespace {

// 2-bin tabulated kernel: outcome/conditioning bins [-1,0] and [0,1], masses
// uniform over bins regardless of the conditioning bin
ScatterKernel two_bin_uniform() {
    return ScatterKernel::tabulated({-1.0, 0.0, 1.0}, {-1.0, 0.0, 1.0},
                                    {{0.5, 0.5}, {0.5, 0.5}});
}

// Sigma_s = 1 in bin A = [-1,0], 3 in bin B = [0,1]
CrossSectionField two_bin_xs() {
    CrossSectionField xs(0.0, 1.0);
    xs.add_override(Rect{{-10.0, 10.0}, {0.0, 1.0}}, 0.0, 3.0);
    return xs;
}

} // namespace

TEST_CASE("tabulated kernel validation") {
    CHECK_THROWS_AS(ScatterKernel::tabulated({-1.0, 1.0}, {-1.0, 1.0}, {{0.5}}), ConfigError);
    CHECK_THROWS_AS(ScatterKernel::tabulated({-1.0, 0.0, 1.0}, {-1.0, 1.0}, {{1.0}, {0.9}}),
                    ConfigError);
    CHECK_THROWS_AS(ScatterKernel::tabulated({-1.0, 1.0}, {-1.0, 1.0}, {{-0.1}}), ConfigError);
    CHECK_NOTHROW(ScatterKernel::tabulated({-1.0, 1.0}, {-1.0, 1.0}, {{1.0}}));
}

TEST_CASE("kernel rows integrate to one") {
    const auto k = ScatterKernel::tabulated({-1.0, 0.0, 1.0}, {-1.0, -0.5, 0.25, 1.0},
                                            {{0.25, 0.5, 0.25}, {0.1, 0.2, 0.7}});
    for (double cond : {-0.5, 0.5}) {
        double sum = 0.0;
        for (std::size_t b = 0; b < k.n_out_bins(); ++b) {
            // density * bin measure summed over outcome bins
            const PhaseState pre{0.0, cond};
            const double center = (b == 0 ? -0.75 : b == 1 ? -0.125 : 0.625);
            sum += k.eval(pre, ScatterOutcome{center}) * k.out_bin_measure(b);
        }
        CHECK(sum == Catch::Approx(1.0).margin(1e-12));
    }
}

TEST_CASE("sampling matches evaluated densities within 5 standard errors") {
    const auto k = ScatterKernel::tabulated({-1.0, 0.0, 1.0}, {-1.0, -0.5, 0.25, 1.0},
                                            {{0.25, 0.5, 0.25}, {0.1, 0.2, 0.7}});
    CounterRng rng(11, 0);
    const PhaseState pre{0.0, 0.5};
    const int n = 1000000;
    int counts[3] = {0, 0, 0};
    for (int i = 0; i < n; ++i) {
        const auto out = k.sample(pre, rng);
        if (out.omega < -0.5) ++counts[0];
        else if (out.omega < 0.25) ++counts[1];
        else ++counts[2];
    }
    const double expected[3] = {0.1, 0.2, 0.7};
    for (int b = 0; b < 3; ++b) {
        const double p = expected[b];
        const double se = std::sqrt(p * (1.0 - p) / n);
        CHECK(std::abs(static_cast<double>(counts[b]) / n - p) < 5.0 * se);
    }
}

TEST_CASE("uniform kernel sampling stays inside its range and is flat") {
    const auto k = ScatterKernel::uniform(Interval{-1.0, 1.0});
    CounterRng rng(3, 1);
    const PhaseState pre{0.0, 0.3};
    int below = 0;
    const int n = 400000;
    for (int i = 0; i < n; ++i) {
        const auto out = k.sample(pre, rng);
        REQUIRE(out.omega >= -1.0);
        REQUIRE(out.omega <= 1.0);
        if (out.omega < 0.0) ++below;
    }
    CHECK(std::abs(below / static_cast<double>(n) - 0.5) < 5.0 * std::sqrt(0.25 / n));
    CHECK(k.eval(pre, ScatterOutcome{0.7}) == Catch::Approx(0.5));
}

TEST_CASE("adjoint rate: uniform kernel averages a constant Sigma_s") {
    const CrossSectionField xs(5.0, 2.5);
    const auto p = ScatterKernel::uniform(Interval{-1.0, 1.0});
    CHECK(adjoint_scatter_rate(xs, p, PhaseState{0.1, -0.4}) == 2.5);
    CHECK(adjoint_scatter_rate(xs, p, PhaseState{-0.9, 0.9}) == 2.5);

    const CrossSectionField none(5.0, 0.0);
    CHECK(adjoint_scatter_rate(none, p, PhaseState{0.0, 0.0}) == 0.0);
}

TEST_CASE("adjoint rate: quadrature oracle for omega-varying Sigma_s under a uniform kernel") {
    CrossSectionField xs(0.0, 1.0);
    xs.add_override(Rect{{-1.0, 1.0}, {0.25, 0.75}}, 0.0, 3.0);
    const auto p = ScatterKernel::uniform(Interval{-1.0, 1.0});
    const PhaseState s{0.0, -0.2};

    // midpoint quadrature of (1/2) Int Sigma_s(omega') domega'
    const int n = 200000;
    double quad = 0.0;
    for (int i = 0; i < n; ++i) {
        const double om = -1.0 + (i + 0.5) * (2.0 / n);
        quad += xs.sigma_s(PhaseState{0.0, om}) * (2.0 / n);
    }
    quad /= 2.0;
    CHECK(adjoint_scatter_rate(xs, p, s) == Catch::Approx(quad).epsilon(1e-10));
}

TEST_CASE("adjoint rate: tabulated 2-bin hand summation") {
    const auto xs = two_bin_xs();
    const auto p = two_bin_uniform();
    // S = 1.0 * 0.5 + 3.0 * 0.5 = 2.0 for any conditioning state
    CHECK(adjoint_scatter_rate(xs, p, PhaseState{0.2, -0.6}) == 2.0);
    CHECK(adjoint_scatter_rate(xs, p, PhaseState{0.2, 0.6}) == 2.0);
}

TEST_CASE("build_adjoint_kernel: uniform p and constant Sigma_s collapse to q = p") {
    const CrossSectionField xs(5.0, 2.5);
    const auto p = ScatterKernel::uniform(Interval{-1.0, 1.0});
    const auto ak = build_adjoint_kernel(xs, p);

    CHECK(ak.rate(PhaseState{0.3, 0.1}) == 2.5);
    // q evaluates exactly as p does
    const PhaseState s{0.3, 0.1};
    CHECK(ak.eval(s, ScatterOutcome{-0.8}) == p.eval(s, ScatterOutcome{-0.8}));

    // samples reproduce p's sampler bit for bit under the same stream
    CounterRng ra(5, 9), rb(5, 9);
    for (int i = 0; i < 50; ++i) {
        CHECK(ak.sample(s, ra).omega == p.sample(s, rb).omega);
    }
}

TEST_CASE("build_adjoint_kernel: 2-bin balance arithmetic") {
    const auto xs = two_bin_xs();
    const auto p = two_bin_uniform();
    const auto ak = build_adjoint_kernel(xs, p);
    const PhaseState s{0.0, 0.5};

    CHECK(ak.rate(s) == 2.0);
    // q masses: q(A|.) = 1*0.5/2 = 0.25, q(B|.) = 3*0.5/2 = 0.75; densities
    // divide by the unit bin measures
    CHECK(ak.eval(s, ScatterOutcome{-0.5}) == Catch::Approx(0.25).margin(1e-12));
    CHECK(ak.eval(s, ScatterOutcome{0.5}) == Catch::Approx(0.75).margin(1e-12));

    // sampled frequencies agree
    CounterRng rng(17, 0);
    const int n = 200000;
    int in_b = 0;
    for (int i = 0; i < n; ++i) {
        if (ak.sample(s, rng).omega >= 0.0) ++in_b;
    }
    CHECK(std::abs(in_b / static_cast<double>(n) - 0.75) < 5.0 * std::sqrt(0.75 * 0.25 / n));
}

TEST_CASE("balance S q = Sigma_s p holds pointwise") {
    // omega-varying Sigma_s with a uniform kernel
    CrossSectionField xs(1.0, 0.5);
    xs.add_override(Rect{{-1.0, 1.0}, {-1.0, -0.2}}, 1.0, 2.0);
    const auto p = ScatterKernel::uniform(Interval{-1.0, 1.0});
    const auto ak = build_adjoint_kernel(xs, p);

    for (double omega : {-0.9, -0.1, 0.4, 0.95}) {
        const PhaseState s{0.2, omega};
        const double S = ak.rate(s);
        for (double out : {-0.7, -0.21, 0.1, 0.8}) {
            const PhaseState outcome{0.2, out};
            const double lhs = S * ak.eval(s, ScatterOutcome{out});
            const double rhs = xs.sigma_s(outcome) * p.eval(outcome, ScatterOutcome{omega});
            CHECK(lhs == Catch::Approx(rhs).margin(1e-10));
        }
    }

    // tabulated case
    const auto xs2 = two_bin_xs();
    const auto p2 = two_bin_uniform();
    const auto ak2 = build_adjoint_kernel(xs2, p2);
    for (double omega : {-0.5, 0.5}) {
        const PhaseState s{0.0, omega};
        const double S = ak2.rate(s);
        for (double out : {-0.5, 0.5}) {
            const PhaseState outcome{0.0, out};
            const double lhs = S * ak2.eval(s, ScatterOutcome{out});
            const double rhs = xs2.sigma_s(outcome) * p2.eval(outcome, ScatterOutcome{omega});
            CHECK(lhs == Catch::Approx(rhs).margin(1e-10));
        }
    }
}

TEST_CASE("q integrates to one for every conditioning state") {
    const auto xs = two_bin_xs();
    const auto p = two_bin_uniform();
    const auto ak = build_adjoint_kernel(xs, p);
    for (double omega : {-0.5, 0.5}) {
        const PhaseState s{0.0, omega};
        // outcome bins have unit measure
        const double total = ak.eval(s, ScatterOutcome{-0.5}) * 1.0 + ak.eval(s, ScatterOutcome{0.5}) * 1.0;
        CHECK(total == Catch::Approx(1.0).margin(1e-10));
    }
}

TEST_CASE("degenerate adjoint kernel: Sigma_s = 0 everywhere") {
    const CrossSectionField xs(5.0, 0.0);
    const auto p = ScatterKernel::uniform(Interval{-1.0, 1.0});
    // constant zero Sigma_s takes the pass-through path with rate 0
    const auto ak = build_adjoint_kernel(xs, p);
    CHECK(ak.rate(PhaseState{0.0, 0.0}) == 0.0);

    // force the general path with an override that keeps Sigma_s at 0
    CrossSectionField xs2(5.0, 0.0);
    xs2.add_override(Rect{{2.0, 3.0}, {-1.0, 1.0}}, 1.0, 1.0); // outside any query
    const auto ak2 = build_adjoint_kernel(xs2, p);
    CHECK(ak2.rate(PhaseState{0.0, 0.0}) == 0.0);
    CounterRng rng(1, 1);
    CHECK_THROWS_AS(ak2.sample(PhaseState{0.0, 0.0}, rng), DegenerateKernelError);
    CHECK_THROWS_AS(ak2.eval(PhaseState{0.0, 0.0}, ScatterOutcome{0.5}), DegenerateKernelError);
}
