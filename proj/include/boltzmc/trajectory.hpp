#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "boltzmc/errors.hpp"
#include "boltzmc/phase.hpp"

namespace boltzmc {

enum class ExitKind : std::uint8_t { LeftDomain = 0, AbsorbedAnalog = 1, CensusCap = 2 };
enum class DirectionSense : std::uint8_t { Forward = 0, Adjoint = 1 };
enum class AbsorptionMode : std::uint8_t { Weighted = 0, Analog = 1 };

/// Stepping parameters shared by the forward and adjoint simulators.
struct SimulationParams {
    double dt = 0.01;             // time step
    double v = 1.0;               // particle speed, cm per unit time
    std::int64_t max_steps = 1'000'000; // census cap (event cap in exact mode)
    AbsorptionMode absorption = AbsorptionMode::Weighted;
    bool exact_events = false;    // advance to exact event times, no dt grid

    void validate() const {
        if (!(dt > 0.0)) throw ConfigError("dt must be positive");
        if (!(v > 0.0)) throw ConfigError("particle speed must be positive");
        if (max_steps < 1) throw ConfigError("max_steps must be at least 1");
    }
};

/// One retained state: the particle at time `time` (= step*dt in discrete
/// mode), with the cumulative attenuation optical depth up to that time.
/// Forward trajectories integrate Sigma_a; adjoint trajectories integrate
/// Sigma_t - S.
struct StepSample {
    std::int64_t step;
    double time;
    PhaseState state;
    double optical_depth;
};

struct ScatterRecord {
    std::int64_t step;
    double time;
    PhaseState pre;
    PhaseState post;
};

struct ExitRecord {
    std::int64_t step = 0;
    double time = 0.0;
    PhaseState state{};
    ExitKind kind = ExitKind::LeftDomain;
    double optical_depth = 0.0;
};

/// Full record of one particle history. The final sample is the exit state
/// (outside the domain for LeftDomain exits); every earlier sample lies in
/// the domain.
struct Trajectory {
    PhaseState start{};
    DirectionSense sense = DirectionSense::Forward;
    AbsorptionMode mode = AbsorptionMode::Weighted;
    bool exact = false;
    double dt = 0.0;
    double v = 1.0;
    std::vector<StepSample> samples;
    std::vector<ScatterRecord> events;
    ExitRecord exit{};

    void clear() {
        samples.clear();
        events.clear();
        exit = ExitRecord{};
    }
};

} // namespace boltzmc
