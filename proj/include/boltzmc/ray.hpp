#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include "boltzmc/errors.hpp"
#include "boltzmc/phase.hpp"

namespace boltzmc {
namespace ray {

/// Time window [t_in, t_out] during which x0 + slope*t lies in [lo, hi],
/// intersected with [0, t_max]. Empty optional when the ray misses.
inline std::optional<std::pair<double, double>> interval_window(double x0, double slope,
                                                                double lo, double hi,
                                                                double t_max) {
    double ta, tb;
    if (slope == 0.0) {
        if (x0 < lo || x0 > hi) return std::nullopt;
        ta = 0.0;
        tb = t_max;
    } else {
        const double t1 = (lo - x0) / slope;
        const double t2 = (hi - x0) / slope;
        ta = std::max(0.0, std::min(t1, t2));
        tb = std::min(t_max, std::max(t1, t2));
    }
    if (!(tb > ta)) return std::nullopt;
    return std::make_pair(ta, tb);
}

/// Integral of value * exp(-(depth0 + att_rate*t)) dt over [ta, tb].
inline double attenuated_piece(double value, double depth0, double att_rate, double ta, double tb) {
    if (att_rate == 0.0) return value * (tb - ta) * std::exp(-depth0);
    return value * std::exp(-depth0) * (std::exp(-att_rate * ta) - std::exp(-att_rate * tb)) / att_rate;
}

/// Score contributed by one straight flight segment against a region density:
/// Int_0^t_len region(x(t)) * exp(-(depth0 + att_rate*t)) dt, for a segment
/// with constant direction and constant attenuation rate (per unit time).
/// Used for exact-event trajectories, whose samples bound such segments.
inline double segment_region_score(const PhaseState& seg_start, double slope, double t_len,
                                   double depth0, double att_rate, const Rect& region_rect,
                                   double region_value) {
    if (region_value == 0.0 || !(t_len > 0.0)) return 0.0;
    if (!region_rect.omega.contains(seg_start.omega)) return 0.0;
    if (region_rect.energy) {
        if (!seg_start.energy) {
            throw ConfigError("region has energy bounds but the trajectory is monoenergetic");
        }
        if (!region_rect.energy->contains(*seg_start.energy)) return 0.0;
    }
    const auto w = interval_window(seg_start.x, slope, region_rect.x.lo, region_rect.x.hi, t_len);
    if (!w) return 0.0;
    return attenuated_piece(region_value, depth0, att_rate, w->first, w->second);
}

/// Closed-form Int g(ray(t)) * exp(-Int_0^t sigma(x(u)) v du) dt over t in
/// [0, inf) for a straight ray x(t) = x0 + sign*v*Omega*t through a
/// piecewise-constant attenuation profile. `sigma_at` must return the
/// attenuation rate per cm at a probe state; `sigma_breaks` lists the
/// x-breakpoints of that profile along the ray (already clipped to a range
/// covering the region).
template <class SigmaAt>
double ray_region_integral(const PhaseState& start, const Rect& region_rect, double region_value,
                           SigmaAt&& sigma_at, const std::vector<double>& sigma_breaks,
                           double v, double direction_sign) {
    if (start.omega == 0.0) {
        throw PreconditionError("ray integral undefined for Omega = 0");
    }
    if (!region_rect.omega.contains(start.omega)) return 0.0;
    if (region_rect.energy) {
        if (!start.energy) throw ConfigError("region has energy bounds but the ray is monoenergetic");
        if (!region_rect.energy->contains(*start.energy)) return 0.0;
    }
    const double slope = direction_sign * v * start.omega;
    const auto window = interval_window(start.x, slope, region_rect.x.lo, region_rect.x.hi,
                                        std::numeric_limits<double>::infinity());
    if (!window) return 0.0;
    const auto [ta, tb] = *window;

    // sub-interval boundaries: profile breakpoints ahead of the ray, plus the
    // region window itself
    std::vector<double> times{0.0, ta, tb};
    for (double b : sigma_breaks) {
        const double tc = (b - start.x) / slope;
        if (tc > 0.0 && tc < tb) times.push_back(tc);
    }
    std::sort(times.begin(), times.end());
    times.erase(std::unique(times.begin(), times.end()), times.end());

    double depth = 0.0;
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < times.size(); ++i) {
        const double u0 = times[i], u1 = times[i + 1];
        PhaseState probe = start;
        probe.x = start.x + slope * (0.5 * (u0 + u1));
        const double rate = sigma_at(probe) * v; // per unit time
        if (u0 >= ta && u1 <= tb) {
            total += attenuated_piece(region_value, depth, rate, 0.0, u1 - u0);
        }
        depth += rate * (u1 - u0);
    }
    return total;
}

} // namespace ray
} // namespace boltzmc
