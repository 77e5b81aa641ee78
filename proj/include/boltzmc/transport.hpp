#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "boltzmc/errors.hpp"
#include "boltzmc/kernel.hpp"
#include "boltzmc/mesh.hpp"
#include "boltzmc/phase.hpp"
#include "boltzmc/rng.hpp"
#include "boltzmc/trajectory.hpp"

namespace boltzmc {

/// Sentinel step count meaning "no scatter ever" (zero rate).
inline constexpr std::int64_t kNoScatter = std::numeric_limits<std::int64_t>::max();

/// Smallest k with k*dt >= t (a time exactly on a step boundary keeps that
/// step); degenerate t = 0 clamps to the first step.
inline std::int64_t steps_for_time(double t, double dt) {
    const auto k = static_cast<std::int64_t>(std::ceil(t / dt));
    return k < 1 ? 1 : k;
}

/// Draw the scatter countdown: T ~ Exponential(rate * v) in time units,
/// rounded up to the first step boundary. Returns kNoScatter when the rate is
/// zero.
inline std::int64_t sample_scatter_steps(double rate_per_cm, const SimulationParams& params,
                                         CounterRng& rng) {
    if (!(rate_per_cm >= 0.0)) throw PreconditionError("scattering rate must be nonnegative");
    if (rate_per_cm == 0.0) return kNoScatter;
    return steps_for_time(rng.exponential(rate_per_cm * params.v), params.dt);
}

/// Displacement per step along a fixed direction. Kept as a single expression
/// so every code path rounds identically.
inline double step_displacement(const SimulationParams& params, double omega, double sign) {
    return sign * (params.v * omega) * params.dt;
}

/// One discrete step of the forward process: stream by v*Omega*dt, then apply
/// a pending scatter by replacing (Omega, E) with a draw from the kernel.
inline PhaseState step_forward(const PhaseState& s, const SimulationParams& params,
                               bool scatter_pending, const ScatterKernel& kernel,
                               CounterRng& rng) {
    PhaseState next = s;
    next.x = s.x + step_displacement(params, s.omega, +1.0);
    if (scatter_pending) {
        const ScatterOutcome out = kernel.sample(next, rng);
        next.omega = out.omega;
        next.energy = out.energy;
    }
    return next;
}

/// Transport model for the forward process X(t): streaming +v*Omega, Poisson
/// scattering at rate Sigma_s with kernel p, attenuation integrand Sigma_a.
struct ForwardTransportModel {
    const CrossSectionField& xs;
    const ScatterKernel& kernel;

    static constexpr double direction_sign = +1.0;
    static constexpr DirectionSense sense = DirectionSense::Forward;

    double rate(const PhaseState& s) const { return xs.sigma_s(s); }
    double depth_rate(const PhaseState& s) const { return xs.sigma_a(s); }
    ScatterOutcome scatter(const PhaseState& s, CounterRng& rng) const { return kernel.sample(s, rng); }
};

/// Transport model for the adjoint process Y(t): streaming -v*Omega, Poisson
/// scattering at rate S with kernel q, attenuation integrand Sigma_t - S.
struct AdjointTransportModel {
    const CrossSectionField& xs;
    const AdjointKernel& kernel;

    static constexpr double direction_sign = -1.0;
    static constexpr DirectionSense sense = DirectionSense::Adjoint;

    double rate(const PhaseState& s) const { return kernel.rate(s); }
    double depth_rate(const PhaseState& s) const { return xs.sigma_t(s) - kernel.rate(s); }
    ScatterOutcome scatter(const PhaseState& s, CounterRng& rng) const { return kernel.sample(s, rng); }
};

namespace detail {

/// Discrete-time stepper shared by both senses. Between scatters the position
/// is evaluated as x = x_event + (j - j_event) * (v*Omega*dt) with a fused
/// multiply-add, so positions are affine in the step index bit-for-bit.
/// A scatter scheduled on the step that crosses the boundary is dropped: the
/// particle hits the boundary first.
template <class Model, class Visitor>
void simulate_discrete(const PhaseState& start, const Domain& domain, const Model& model,
                       const SimulationParams& params, CounterRng& rng, Visitor&& vis) {
    PhaseState state = start;
    double depth = 0.0;
    std::int64_t j = 0;
    vis.sample(0, 0.0, state, 0.0);

    double seg_x = state.x;
    std::int64_t seg_j = 0;
    double seg_dx = step_displacement(params, state.omega, Model::direction_sign);

    auto draw_countdown = [&](const PhaseState& at) {
        const auto k = sample_scatter_steps(model.rate(at), params, rng);
        return k == kNoScatter ? kNoScatter : j + k;
    };
    std::int64_t scatter_step = draw_countdown(state);

    const bool analog = params.absorption == AbsorptionMode::Analog;
    while (true) {
        if (j == params.max_steps) {
            vis.exit(j, static_cast<double>(j) * params.dt, state, ExitKind::CensusCap, depth);
            return;
        }
        const PhaseState pre_move = state;
        const double step_rate = model.depth_rate(pre_move);
        if (analog && step_rate < 0.0) {
            throw PreconditionError("analog absorption requires a nonnegative removal rate");
        }
        depth += step_rate * params.v * params.dt;
        ++j;
        const double t = static_cast<double>(j) * params.dt;
        state.x = std::fma(static_cast<double>(j - seg_j), seg_dx, seg_x);

        if (!domain.contains(state)) {
            vis.sample(j, t, state, depth);
            vis.exit(j, t, state, ExitKind::LeftDomain, depth);
            return;
        }
        if (analog) {
            const double p_abs = -std::expm1(-step_rate * params.v * params.dt);
            if (rng.uniform() < p_abs) {
                vis.sample(j, t, state, depth);
                vis.exit(j, t, state, ExitKind::AbsorbedAnalog, depth);
                return;
            }
        }
        if (j == scatter_step) {
            const PhaseState pre = state;
            const ScatterOutcome out = model.scatter(pre, rng);
            state.omega = out.omega;
            state.energy = out.energy;
            vis.scatter(j, t, pre, state);
            if (!domain.contains(state)) {
                vis.sample(j, t, state, depth);
                vis.exit(j, t, state, ExitKind::LeftDomain, depth);
                return;
            }
            seg_x = state.x;
            seg_j = j;
            seg_dx = step_displacement(params, state.omega, Model::direction_sign);
            scatter_step = draw_countdown(state);
        }
        vis.sample(j, t, state, depth);
    }
}

/// Exact-event stepper: advances straight to the next scatter, cross-section
/// region crossing, analog absorption, or boundary, with no dt grid. Region
/// crossings emit samples (and redraw the scatter clock at the new rate), so
/// rates are constant and the optical depth is linear between consecutive
/// samples. The step index counts events.
template <class Model, class Visitor>
void simulate_exact(const PhaseState& start, const Domain& domain, const Model& model,
                    const SimulationParams& params, CounterRng& rng, Visitor&& vis) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    PhaseState state = start;
    double depth = 0.0;
    double t = 0.0;
    std::int64_t ev = 0;
    vis.sample(0, 0.0, state, 0.0);

    const bool analog = params.absorption == AbsorptionMode::Analog;
    while (true) {
        if (ev == params.max_steps) {
            vis.exit(ev, t, state, ExitKind::CensusCap, depth);
            return;
        }
        const double slope = Model::direction_sign * params.v * state.omega; // cm per time
        double t_boundary = inf;
        if (slope > 0.0) t_boundary = (domain.x.hi - state.x) / slope;
        else if (slope < 0.0) t_boundary = (domain.x.lo - state.x) / slope;

        // nearest cross-section breakpoint ahead of the particle
        double t_cross = inf;
        if (slope != 0.0) {
            const auto bps = model.xs.x_breakpoints(state.omega, state.energy, domain.x);
            for (double b : bps) {
                const double dtc = (b - state.x) / slope;
                if (dtc > 1e-15 && dtc < t_cross) t_cross = dtc;
            }
        }

        // rates are constant until min(t_cross, t_boundary); probe mid-segment
        const double horizon = std::min(t_cross, t_boundary);
        PhaseState probe = state;
        if (std::isfinite(horizon)) probe.x = state.x + slope * (0.5 * horizon);
        const double rate = model.rate(probe);
        const double att_rate = model.depth_rate(probe);
        if (analog && att_rate < 0.0) {
            throw PreconditionError("analog absorption requires a nonnegative removal rate");
        }
        const double t_scatter = rate > 0.0 ? rng.exponential(rate * params.v) : inf;
        const double t_absorb = (analog && att_rate > 0.0) ? rng.exponential(att_rate * params.v) : inf;

        double adv = std::min({t_scatter, t_absorb, horizon});
        if (!std::isfinite(adv)) {
            // Omega = 0 with nothing to do: degenerate ray, census immediately
            vis.exit(ev, t, state, ExitKind::CensusCap, depth);
            return;
        }
        // boundary wins ties
        const bool hits_boundary = t_boundary <= adv;
        if (hits_boundary) adv = t_boundary;
        t += adv;
        depth += att_rate * params.v * adv;
        state.x = hits_boundary ? (slope > 0.0 ? domain.x.hi : domain.x.lo)
                                : state.x + slope * adv;
        ++ev;
        if (hits_boundary) {
            vis.sample(ev, t, state, depth);
            vis.exit(ev, t, state, ExitKind::LeftDomain, depth);
            return;
        }
        if (t_absorb <= std::min(t_scatter, t_cross)) {
            vis.sample(ev, t, state, depth);
            vis.exit(ev, t, state, ExitKind::AbsorbedAnalog, depth);
            return;
        }
        if (t_scatter <= t_cross) {
            const PhaseState pre = state;
            const ScatterOutcome out = model.scatter(pre, rng);
            state.omega = out.omega;
            state.energy = out.energy;
            vis.scatter(ev, t, pre, state);
            if (!domain.contains(state)) {
                vis.sample(ev, t, state, depth);
                vis.exit(ev, t, state, ExitKind::LeftDomain, depth);
                return;
            }
        }
        // region crossings just emit a sample; the scatter clock is redrawn
        // next iteration at the new rate (memoryless)
        vis.sample(ev, t, state, depth);
    }
}

template <class Model, class Visitor>
void simulate(const PhaseState& start, const Domain& domain, const Model& model,
              const SimulationParams& params, CounterRng& rng, Visitor&& vis) {
    params.validate();
    if (!domain.contains(start)) {
        throw PreconditionError("trajectory start state lies outside the domain");
    }
    if (params.exact_events) {
        simulate_exact(start, domain, model, params, rng, vis);
    } else {
        simulate_discrete(start, domain, model, params, rng, vis);
    }
}

/// Visitor that materializes a Trajectory.
class RecordingVisitor {
public:
    explicit RecordingVisitor(Trajectory& out) : out_(out) {}

    void sample(std::int64_t step, double time, const PhaseState& s, double depth) {
        out_.samples.push_back(StepSample{step, time, s, depth});
    }
    void scatter(std::int64_t step, double time, const PhaseState& pre, const PhaseState& post) {
        out_.events.push_back(ScatterRecord{step, time, pre, post});
    }
    void exit(std::int64_t step, double time, const PhaseState& s, ExitKind kind, double depth) {
        out_.exit = ExitRecord{step, time, s, kind, depth};
    }

private:
    Trajectory& out_;
};

} // namespace detail

/// Simulate the forward process from `start` until it leaves the domain,
/// is absorbed (analog mode), or hits the census cap, reusing the caller's
/// Trajectory storage.
inline void simulate_forward_trajectory_into(Trajectory& out, const PhaseState& start,
                                             const Domain& domain, const CrossSectionField& xs,
                                             const ScatterKernel& kernel,
                                             const SimulationParams& params, CounterRng& rng) {
    out.clear();
    out.start = start;
    out.sense = DirectionSense::Forward;
    out.mode = params.absorption;
    out.exact = params.exact_events;
    out.dt = params.dt;
    out.v = params.v;
    detail::simulate(start, domain, ForwardTransportModel{xs, kernel}, params, rng,
                     detail::RecordingVisitor(out));
}

inline Trajectory simulate_forward_trajectory(const PhaseState& start, const Domain& domain,
                                              const CrossSectionField& xs,
                                              const ScatterKernel& kernel,
                                              const SimulationParams& params, CounterRng& rng) {
    Trajectory t;
    simulate_forward_trajectory_into(t, start, domain, xs, kernel, params, rng);
    return t;
}

/// Adjoint analogue: reversed streaming, rate S, kernel q, attenuation
/// integrand Sigma_t - S.
inline void simulate_adjoint_trajectory_into(Trajectory& out, const PhaseState& start,
                                             const Domain& domain,
                                             const AdjointKernel& adjoint_kernel,
                                             const CrossSectionField& xs,
                                             const SimulationParams& params, CounterRng& rng) {
    out.clear();
    out.start = start;
    out.sense = DirectionSense::Adjoint;
    out.mode = params.absorption;
    out.exact = params.exact_events;
    out.dt = params.dt;
    out.v = params.v;
    detail::simulate(start, domain, AdjointTransportModel{xs, adjoint_kernel}, params, rng,
                     detail::RecordingVisitor(out));
}

inline Trajectory simulate_adjoint_trajectory(const PhaseState& start, const Domain& domain,
                                              const AdjointKernel& adjoint_kernel,
                                              const CrossSectionField& xs,
                                              const SimulationParams& params, CounterRng& rng) {
    Trajectory t;
    simulate_adjoint_trajectory_into(t, start, domain, adjoint_kernel, xs, params, rng);
    return t;
}

/// Deterministic stratified seeding: the cell mesh over the region's support
/// with `particles_per_cell` copies of every cell center, cell-major
/// (x outer, omega inner). The global particle index is
/// cell * particles_per_cell + replica.
struct SeededEnsemble {
    Mesh mesh;
    std::vector<PhaseState> starts;
    int particles_per_cell;
};

inline SeededEnsemble seed_region_ensemble(const RegionDensity& density, double ds, double da,
                                           int particles_per_cell) {
    if (density.rect().energy) {
        throw ConfigError("ensemble seeding supports (x, omega) regions only");
    }
    if (particles_per_cell < 1) throw ConfigError("particles per cell must be at least 1");
    Mesh mesh = build_mesh(density.rect(), ds, da);
    std::vector<PhaseState> starts;
    starts.reserve(mesh.n_cells() * static_cast<std::size_t>(particles_per_cell));
    for (std::size_t c = 0; c < mesh.n_cells(); ++c) {
        const PhaseState center = mesh.center(c);
        for (int r = 0; r < particles_per_cell; ++r) starts.push_back(center);
    }
    return SeededEnsemble{std::move(mesh), std::move(starts), particles_per_cell};
}

inline SeededEnsemble seed_source_ensemble(const RegionDensity& f, double ds, double da,
                                           int particles_per_cell) {
    return seed_region_ensemble(f, ds, da, particles_per_cell);
}

inline SeededEnsemble seed_detector_ensemble(const RegionDensity& g, double ds, double da,
                                             int particles_per_cell) {
    return seed_region_ensemble(g, ds, da, particles_per_cell);
}

} // namespace boltzmc
