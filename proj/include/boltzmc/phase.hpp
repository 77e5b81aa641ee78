#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "boltzmc/errors.hpp"

namespace boltzmc {

/// A point (x, Omega, E) in phase space. Position in cm, direction cosine in
/// [-1,1], energy in MeV. Energy is absent everywhere in monoenergetic
/// problems.
struct PhaseState {
    double x = 0.0;
    double omega = 0.0;
    std::optional<double> energy{};
};

/// Closed interval [lo, hi].
struct Interval {
    double lo = 0.0;
    double hi = 0.0;

    double width() const { return hi - lo; }
    bool contains(double v) const { return v >= lo && v <= hi; }
    bool valid() const { return std::isfinite(lo) && std::isfinite(hi) && lo <= hi; }
};

/// Axis-aligned phase-space rectangle: x-interval x Omega-interval, with an
/// optional energy interval. A rectangle without an energy interval spans all
/// energies. Rectangles are closed sets; membership at edges is true.
struct Rect {
    Interval x{};
    Interval omega{};
    std::optional<Interval> energy{};

    double measure() const {
        double m = x.width() * omega.width();
        if (energy) m *= energy->width();
        return m;
    }

    bool contains(const PhaseState& s) const {
        if (energy && !s.energy) {
            throw ConfigError("phase-space rectangle has energy bounds but the state is monoenergetic");
        }
        if (!x.contains(s.x) || !omega.contains(s.omega)) return false;
        if (energy && !energy->contains(*s.energy)) return false;
        return true;
    }
};

/// The compact transport domain D. A particle's history ends the first time
/// its state leaves D.
struct Domain {
    Interval x{};
    Interval omega{-1.0, 1.0};
    std::optional<Interval> energy{};

    void validate() const {
        if (!x.valid() || x.width() <= 0.0) throw ConfigError("domain x bounds must be a nonempty interval");
        if (!omega.valid() || omega.width() <= 0.0) throw ConfigError("domain omega bounds must be a nonempty interval");
        if (omega.lo < -1.0 || omega.hi > 1.0) throw ConfigError("domain omega bounds must lie within [-1,1]");
        if (energy && (!energy->valid() || energy->width() <= 0.0)) {
            throw ConfigError("domain energy bounds must be a nonempty interval when present");
        }
    }

    bool monoenergetic() const { return !energy.has_value(); }

    bool contains(const PhaseState& s) const {
        if (energy.has_value() != s.energy.has_value()) {
            throw ConfigError(energy ? "domain has energy bounds but the state is monoenergetic"
                                     : "monoenergetic domain given a state with energy");
        }
        if (!x.contains(s.x) || !omega.contains(s.omega)) return false;
        if (energy && !energy->contains(*s.energy)) return false;
        return true;
    }
};

/// Piecewise-constant density supported on a phase-space rectangle. When
/// normalized, the value is 1/measure(rect) so the density integrates to
/// exactly 1. Used for both the source f and the detector g.
class RegionDensity {
public:
    static RegionDensity normalized(Rect rect) {
        const double m = rect.measure();
        if (!(m > 0.0)) throw ConfigError("normalized region density requires a rectangle of positive measure");
        return RegionDensity(std::move(rect), 1.0 / m, true);
    }

    static RegionDensity with_value(Rect rect, double value) {
        return RegionDensity(std::move(rect), value, false);
    }

    bool contains(const PhaseState& s) const { return rect_.contains(s); }

    /// Density at s: the region value inside the closed rectangle, 0 outside.
    double eval(const PhaseState& s) const { return contains(s) ? value_ : 0.0; }

    const Rect& rect() const { return rect_; }
    double value() const { return value_; }
    bool is_normalized() const { return normalized_; }

private:
    RegionDensity(Rect rect, double value, bool normalized)
        : rect_(std::move(rect)), value_(value), normalized_(normalized) {}

    Rect rect_;
    double value_;
    bool normalized_;
};

/// Piecewise-constant absorption and scattering cross sections: defaults plus
/// a list of rectangle overrides, last match wins. Sigma_t = Sigma_a + Sigma_s
/// at every state.
class CrossSectionField {
public:
    struct Override {
        Rect rect;
        double sigma_a;
        double sigma_s;
    };

    CrossSectionField(double default_sigma_a, double default_sigma_s)
        : default_a_(default_sigma_a), default_s_(default_sigma_s) {
        check_nonneg(default_sigma_a, default_sigma_s);
    }

    void add_override(Rect rect, double sigma_a, double sigma_s) {
        check_nonneg(sigma_a, sigma_s);
        overrides_.push_back(Override{std::move(rect), sigma_a, sigma_s});
    }

    double sigma_a(const PhaseState& s) const { return lookup(s).first; }
    double sigma_s(const PhaseState& s) const { return lookup(s).second; }
    double sigma_t(const PhaseState& s) const {
        auto [a, sc] = lookup(s);
        return a + sc;
    }

    const std::vector<Override>& overrides() const { return overrides_; }
    double default_sigma_a() const { return default_a_; }
    double default_sigma_s() const { return default_s_; }

    /// True when Sigma_s takes one value everywhere (no override changes it).
    bool scattering_is_constant() const {
        return std::all_of(overrides_.begin(), overrides_.end(),
                           [&](const Override& o) { return o.sigma_s == default_s_; });
    }

    /// Sorted breakpoints of the omega-profile of the cross sections at fixed
    /// (x, E), clipped to [range.lo, range.hi]. Always includes the range ends.
    std::vector<double> omega_breakpoints(double x, const std::optional<double>& energy,
                                          const Interval& range) const {
        std::vector<double> pts{range.lo, range.hi};
        for (const auto& o : overrides_) {
            if (!o.rect.x.contains(x)) continue;
            if (o.rect.energy) {
                if (!energy) continue;
                if (!o.rect.energy->contains(*energy)) continue;
            }
            for (double b : {o.rect.omega.lo, o.rect.omega.hi}) {
                if (b > range.lo && b < range.hi) pts.push_back(b);
            }
        }
        std::sort(pts.begin(), pts.end());
        pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
        return pts;
    }

    /// x-breakpoints of the profile at fixed (omega, E), clipped to a range.
    std::vector<double> x_breakpoints(double omega, const std::optional<double>& energy,
                                      const Interval& range) const {
        std::vector<double> pts{range.lo, range.hi};
        for (const auto& o : overrides_) {
            if (!o.rect.omega.contains(omega)) continue;
            if (o.rect.energy) {
                if (!energy) continue;
                if (!o.rect.energy->contains(*energy)) continue;
            }
            for (double b : {o.rect.x.lo, o.rect.x.hi}) {
                if (b > range.lo && b < range.hi) pts.push_back(b);
            }
        }
        std::sort(pts.begin(), pts.end());
        pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
        return pts;
    }

private:
    static void check_nonneg(double a, double s) {
        if (!(a >= 0.0) || !(s >= 0.0) || !std::isfinite(a) || !std::isfinite(s)) {
            throw ConfigError("cross sections must be finite and nonnegative");
        }
    }

    std::pair<double, double> lookup(const PhaseState& s) const {
        for (auto it = overrides_.rbegin(); it != overrides_.rend(); ++it) {
            if (it->rect.contains(s)) return {it->sigma_a, it->sigma_s};
        }
        return {default_a_, default_s_};
    }

    double default_a_;
    double default_s_;
    std::vector<Override> overrides_;
};

} // namespace boltzmc
