#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <utility>
#include <vector>

#include "boltzmc/errors.hpp"
#include "boltzmc/mesh.hpp"
#include "boltzmc/phase.hpp"
#include "boltzmc/rng.hpp"

namespace boltzmc {

/// Post-scatter outcome (Omega', E').
struct ScatterOutcome {
    double omega;
    std::optional<double> energy{};
};

/// Conditional scattering density p(Omega', E' | Omega, E) with consistent
/// sampling and evaluation. Two kinds:
///  - uniform-isotropic: uniform over an omega range, monoenergetic;
///  - tabulated-discrete: piecewise-constant density over an outcome bin grid,
///    one probability-mass row per conditioning bin (each row sums to 1).
class ScatterKernel {
public:
    enum class Kind { UniformIsotropic, TabulatedDiscrete };

    static ScatterKernel uniform(Interval omega_range) {
        if (!omega_range.valid() || omega_range.width() <= 0.0) {
            throw ConfigError("uniform kernel needs a nonempty omega range");
        }
        ScatterKernel k;
        k.kind_ = Kind::UniformIsotropic;
        k.uniform_range_ = omega_range;
        return k;
    }

    /// Tabulated kernel. Energy edges may be empty (monoenergetic). The mass
    /// table is indexed [conditioning bin][outcome bin] with bins flattened
    /// omega-major: bin = i_omega * n_energy_bins + i_energy.
    static ScatterKernel tabulated(std::vector<double> cond_omega_edges,
                                   std::vector<double> out_omega_edges,
                                   std::vector<std::vector<double>> masses,
                                   std::vector<double> cond_energy_edges = {},
                                   std::vector<double> out_energy_edges = {}) {
        ScatterKernel k;
        k.kind_ = Kind::TabulatedDiscrete;
        k.cond_omega_edges_ = std::move(cond_omega_edges);
        k.out_omega_edges_ = std::move(out_omega_edges);
        k.cond_energy_edges_ = std::move(cond_energy_edges);
        k.out_energy_edges_ = std::move(out_energy_edges);
        k.masses_ = std::move(masses);
        k.validate_table();
        k.build_cdfs();
        return k;
    }

    Kind kind() const { return kind_; }
    bool is_uniform() const { return kind_ == Kind::UniformIsotropic; }
    bool monoenergetic() const { return is_uniform() || out_energy_edges_.empty(); }

    /// Sample (Omega', E') given the pre-scatter state.
    ScatterOutcome sample(const PhaseState& pre, CounterRng& rng) const {
        if (is_uniform()) {
            return ScatterOutcome{rng.uniform(uniform_range_.lo, uniform_range_.hi), pre.energy};
        }
        const std::size_t row = cond_bin(pre);
        const auto& cdf = cdfs_[row];
        const double u = rng.uniform();
        const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
        const std::size_t out = std::min(static_cast<std::size_t>(it - cdf.begin()), cdf.size() - 1);
        return sample_within_out_bin(out, pre, rng);
    }

    /// Density p(out | pre). Zero outside the outcome grid.
    double eval(const PhaseState& pre, const ScatterOutcome& out) const {
        if (is_uniform()) {
            return uniform_range_.contains(out.omega) ? 1.0 / uniform_range_.width() : 0.0;
        }
        const std::size_t row = cond_bin(pre);
        const auto b = out_bin(out.omega, out.energy);
        if (!b) return 0.0;
        return masses_[row][*b] / out_bin_measure(*b);
    }

    // --- bin grids (tabulated kind only) ---

    std::size_t n_cond_bins() const { return (cond_omega_edges_.size() - 1) * cond_energy_count(); }
    std::size_t n_out_bins() const { return (out_omega_edges_.size() - 1) * out_energy_count(); }

    std::size_t cond_bin(const PhaseState& s) const {
        const auto io = detail::find_bin(cond_omega_edges_, s.omega);
        if (!io) throw PreconditionError("state omega outside the kernel conditioning grid");
        std::size_t ie = 0;
        if (!cond_energy_edges_.empty()) {
            if (!s.energy) throw ConfigError("kernel conditions on energy but the state is monoenergetic");
            const auto b = detail::find_bin(cond_energy_edges_, *s.energy);
            if (!b) throw PreconditionError("state energy outside the kernel conditioning grid");
            ie = *b;
        }
        return *io * cond_energy_count() + ie;
    }

    std::optional<std::size_t> out_bin(double omega, const std::optional<double>& energy) const {
        const auto io = detail::find_bin(out_omega_edges_, omega);
        if (!io) return std::nullopt;
        std::size_t ie = 0;
        if (!out_energy_edges_.empty()) {
            if (!energy) throw ConfigError("kernel has energy-resolved outcomes but the state is monoenergetic");
            const auto b = detail::find_bin(out_energy_edges_, *energy);
            if (!b) return std::nullopt;
            ie = *b;
        }
        return *io * out_energy_count() + ie;
    }

    ScatterOutcome cond_bin_center(std::size_t idx) const {
        const std::size_t ne = cond_energy_count();
        const std::size_t io = idx / ne;
        const std::size_t ie = idx % ne;
        ScatterOutcome s;
        s.omega = 0.5 * (cond_omega_edges_[io] + cond_omega_edges_[io + 1]);
        if (!cond_energy_edges_.empty()) s.energy = 0.5 * (cond_energy_edges_[ie] + cond_energy_edges_[ie + 1]);
        return s;
    }

    double cond_bin_measure(std::size_t idx) const {
        const std::size_t ne = cond_energy_count();
        const std::size_t io = idx / ne;
        const std::size_t ie = idx % ne;
        double m = cond_omega_edges_[io + 1] - cond_omega_edges_[io];
        if (!cond_energy_edges_.empty()) m *= cond_energy_edges_[ie + 1] - cond_energy_edges_[ie];
        return m;
    }

    /// Uniform draw within a conditioning bin (used when sampling the adjoint
    /// kernel, whose outcomes live on this kernel's conditioning grid).
    ScatterOutcome sample_within_cond_bin(std::size_t idx, CounterRng& rng) const {
        const std::size_t ne = cond_energy_count();
        const std::size_t io = idx / ne;
        const std::size_t ie = idx % ne;
        ScatterOutcome o;
        o.omega = rng.uniform(cond_omega_edges_[io], cond_omega_edges_[io + 1]);
        if (!cond_energy_edges_.empty()) o.energy = rng.uniform(cond_energy_edges_[ie], cond_energy_edges_[ie + 1]);
        return o;
    }

    double out_bin_measure(std::size_t idx) const {
        const std::size_t ne = out_energy_count();
        const std::size_t io = idx / ne;
        const std::size_t ie = idx % ne;
        double m = out_omega_edges_[io + 1] - out_omega_edges_[io];
        if (!out_energy_edges_.empty()) m *= out_energy_edges_[ie + 1] - out_energy_edges_[ie];
        return m;
    }

    double mass(std::size_t cond_idx, std::size_t out_idx) const { return masses_[cond_idx][out_idx]; }
    const Interval& uniform_range() const { return uniform_range_; }

private:
    ScatterKernel() = default;

    ScatterOutcome sample_within_out_bin(std::size_t idx, const PhaseState& pre, CounterRng& rng) const {
        const std::size_t ne = out_energy_count();
        const std::size_t io = idx / ne;
        const std::size_t ie = idx % ne;
        ScatterOutcome o;
        o.omega = rng.uniform(out_omega_edges_[io], out_omega_edges_[io + 1]);
        if (!out_energy_edges_.empty()) {
            o.energy = rng.uniform(out_energy_edges_[ie], out_energy_edges_[ie + 1]);
        } else {
            o.energy = pre.energy;
        }
        return o;
    }

    std::size_t cond_energy_count() const {
        return cond_energy_edges_.empty() ? 1 : cond_energy_edges_.size() - 1;
    }
    std::size_t out_energy_count() const {
        return out_energy_edges_.empty() ? 1 : out_energy_edges_.size() - 1;
    }

    void validate_table() {
        auto check_edges = [](const std::vector<double>& e, const char* what) {
            if (e.size() < 2) throw ConfigError(std::string("kernel ") + what + " needs at least one bin");
            for (std::size_t i = 1; i < e.size(); ++i) {
                if (!(e[i] > e[i - 1])) throw ConfigError(std::string("kernel ") + what + " edges must be strictly increasing");
            }
        };
        check_edges(cond_omega_edges_, "conditioning omega grid");
        check_edges(out_omega_edges_, "outcome omega grid");
        if (!cond_energy_edges_.empty()) check_edges(cond_energy_edges_, "conditioning energy grid");
        if (!out_energy_edges_.empty()) check_edges(out_energy_edges_, "outcome energy grid");
        if (cond_energy_edges_.empty() != out_energy_edges_.empty()) {
            throw ConfigError("kernel energy grids must be present on both sides or neither");
        }
        if (masses_.size() != n_cond_bins()) {
            throw ConfigError("kernel mass table must have one row per conditioning bin");
        }
        for (std::size_t r = 0; r < masses_.size(); ++r) {
            if (masses_[r].size() != n_out_bins()) {
                throw ConfigError("kernel mass row " + std::to_string(r) + " has the wrong number of outcome bins");
            }
            double sum = 0.0;
            for (double m : masses_[r]) {
                if (!(m >= 0.0)) throw ConfigError("kernel masses must be nonnegative");
                sum += m;
            }
            if (std::abs(sum - 1.0) > 1e-12) {
                throw ConfigError("kernel mass row " + std::to_string(r) + " sums to " + std::to_string(sum) + ", expected 1");
            }
        }
    }

    void build_cdfs() {
        cdfs_.resize(masses_.size());
        for (std::size_t r = 0; r < masses_.size(); ++r) {
            cdfs_[r].resize(masses_[r].size());
            double acc = 0.0;
            for (std::size_t j = 0; j < masses_[r].size(); ++j) {
                acc += masses_[r][j];
                cdfs_[r][j] = acc;
            }
            cdfs_[r].back() = 1.0;
        }
    }

    Kind kind_ = Kind::UniformIsotropic;
    Interval uniform_range_{-1.0, 1.0};
    std::vector<double> cond_omega_edges_;
    std::vector<double> cond_energy_edges_;
    std::vector<double> out_omega_edges_;
    std::vector<double> out_energy_edges_;
    std::vector<std::vector<double>> masses_;
    std::vector<std::vector<double>> cdfs_;
};

/// Adjoint scattering rate S(s) = Int Sigma_s(x,W',E') p(W,E | W',E') dW' dE'
/// (integral over the conditioning variable). Closed form for uniform kernels
/// against the piecewise-constant Sigma_s omega-profile; exact bin summation
/// for tabulated kernels, with Sigma_s evaluated at conditioning-bin centers
/// (exact when overrides align with the bins).
inline double adjoint_scatter_rate(const CrossSectionField& xs, const ScatterKernel& p,
                                   const PhaseState& s) {
    if (p.is_uniform()) {
        const Interval range = p.uniform_range();
        const auto pts = xs.omega_breakpoints(s.x, s.energy, range);
        double integral = 0.0;
        for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
            const PhaseState probe{s.x, 0.5 * (pts[i] + pts[i + 1]), s.energy};
            integral += xs.sigma_s(probe) * (pts[i + 1] - pts[i]);
        }
        return integral / range.width();
    }
    const auto b = p.out_bin(s.omega, s.energy);
    if (!b) return 0.0; // p(s | anything) = 0 outside the outcome grid
    const double meas_b = p.out_bin_measure(*b);
    double sum = 0.0;
    for (std::size_t bc = 0; bc < p.n_cond_bins(); ++bc) {
        const ScatterOutcome c = p.cond_bin_center(bc);
        const PhaseState probe{s.x, c.omega, c.energy};
        sum += xs.sigma_s(probe) * (p.mass(bc, *b) / meas_b) * p.cond_bin_measure(bc);
    }
    return sum;
}

/// The adjoint scattering law (S, q) with q(W',E' | W,E) defined by the
/// balance S(x,W,E) q(W',E' | W,E) = Sigma_s(x,W',E') p(W,E | W',E'). Note the
/// role reversal: q's outcomes live on p's conditioning grid.
class AdjointKernel {
public:
    double rate(const PhaseState& s) const {
        if (mode_ == Mode::PassThrough) return const_rate_;
        return adjoint_scatter_rate(xs_, p_, s);
    }

    ScatterOutcome sample(const PhaseState& s, CounterRng& rng) const {
        switch (mode_) {
        case Mode::PassThrough:
            return p_.sample(s, rng);
        case Mode::UniformP: {
            const Interval range = p_.uniform_range();
            const auto pts = xs_.omega_breakpoints(s.x, s.energy, range);
            double total = 0.0;
            thread_local std::vector<double> cum;
            cum.assign(pts.size() - 1, 0.0);
            for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
                const PhaseState probe{s.x, 0.5 * (pts[i] + pts[i + 1]), s.energy};
                total += xs_.sigma_s(probe) * (pts[i + 1] - pts[i]);
                cum[i] = total;
            }
            if (!(total > 0.0)) throw DegenerateKernelError("adjoint kernel q undefined: S = 0 at the conditioning state");
            const double u = rng.uniform() * total;
            auto it = std::upper_bound(cum.begin(), cum.end(), u);
            const std::size_t seg = std::min(static_cast<std::size_t>(it - cum.begin()), cum.size() - 1);
            return ScatterOutcome{rng.uniform(pts[seg], pts[seg + 1]), s.energy};
        }
        case Mode::TabulatedP:
        default: {
            const auto b = p_.out_bin(s.omega, s.energy);
            if (!b) throw DegenerateKernelError("adjoint kernel q undefined: state outside the kernel outcome grid");
            const double meas_b = p_.out_bin_measure(*b);
            thread_local std::vector<double> cum;
            cum.assign(p_.n_cond_bins(), 0.0);
            double total = 0.0;
            for (std::size_t bc = 0; bc < p_.n_cond_bins(); ++bc) {
                const ScatterOutcome c = p_.cond_bin_center(bc);
                const PhaseState probe{s.x, c.omega, c.energy};
                total += xs_.sigma_s(probe) * (p_.mass(bc, *b) / meas_b) * p_.cond_bin_measure(bc);
                cum[bc] = total;
            }
            if (!(total > 0.0)) throw DegenerateKernelError("adjoint kernel q undefined: S = 0 at the conditioning state");
            const double u = rng.uniform() * total;
            auto it = std::upper_bound(cum.begin(), cum.end(), u);
            const std::size_t bc = std::min(static_cast<std::size_t>(it - cum.begin()), cum.size() - 1);
            return p_.sample_within_cond_bin(bc, rng);
        }
        }
    }

    /// Density q(out | s).
    double eval(const PhaseState& s, const ScatterOutcome& out) const {
        if (mode_ == Mode::PassThrough) return p_.eval(s, out);
        const double S = rate(s);
        if (!(S > 0.0)) throw DegenerateKernelError("adjoint kernel q undefined: S = 0 at the conditioning state");
        const PhaseState outcome_state{s.x, out.omega, out.energy};
        const double p_back = p_.eval(outcome_state, ScatterOutcome{s.omega, s.energy});
        return xs_.sigma_s(outcome_state) * p_back / S;
    }

    const ScatterKernel& forward_kernel() const { return p_; }

private:
    enum class Mode { PassThrough, UniformP, TabulatedP };

    friend AdjointKernel build_adjoint_kernel(const CrossSectionField& xs, const ScatterKernel& p);

    AdjointKernel(Mode mode, CrossSectionField xs, ScatterKernel p, double const_rate)
        : mode_(mode), xs_(std::move(xs)), p_(std::move(p)), const_rate_(const_rate) {}

    Mode mode_;
    CrossSectionField xs_;
    ScatterKernel p_;
    double const_rate_ = 0.0;
};

/// Build (S, q) from the forward scattering law. When p is uniform and
/// Sigma_s is constant the pair collapses to S = Sigma_s, q = p exactly.
inline AdjointKernel build_adjoint_kernel(const CrossSectionField& xs, const ScatterKernel& p) {
    using Mode = AdjointKernel::Mode;
    if (p.is_uniform() && xs.scattering_is_constant()) {
        return AdjointKernel(Mode::PassThrough, xs, p, xs.default_sigma_s());
    }
    if (p.is_uniform()) {
        return AdjointKernel(Mode::UniformP, xs, p, 0.0);
    }
    return AdjointKernel(Mode::TabulatedP, xs, p, 0.0);
}

} // namespace boltzmc
