#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "boltzmc/errors.hpp"
#include "boltzmc/mesh.hpp"
#include "boltzmc/phase.hpp"
#include "boltzmc/ray.hpp"
#include "boltzmc/trajectory.hpp"

namespace boltzmc {

/// Streaming mean/variance accumulator (Welford), mergeable with a
/// deterministic combine rule so parallel partial tallies reduce to the same
/// bits in any fixed merge order.
struct Welford {
    std::int64_t n = 0;
    double mean = 0.0;
    double m2 = 0.0;

    void push(double v) {
        ++n;
        const double d = v - mean;
        mean += d / static_cast<double>(n);
        m2 += d * (v - mean);
    }

    void merge(const Welford& o) {
        if (o.n == 0) return;
        if (n == 0) {
            *this = o;
            return;
        }
        const double d = o.mean - mean;
        const auto tot = n + o.n;
        mean += d * (static_cast<double>(o.n) / static_cast<double>(tot));
        m2 += o.m2 + d * d * (static_cast<double>(n) * static_cast<double>(o.n) / static_cast<double>(tot));
        n = tot;
    }

    /// Account for k samples with value exactly zero.
    void fold_zeros(std::int64_t k) {
        if (k <= 0) return;
        Welford z;
        z.n = k;
        merge(z);
    }

    double variance() const { return n > 1 ? m2 / static_cast<double>(n - 1) : 0.0; }
    double std_error() const {
        return n > 1 ? std::sqrt(variance() / static_cast<double>(n)) : 0.0;
    }
};

/// Value prescribed on the domain boundary (B of the adjoint problem, H of
/// the forward problem). An empty function means vacuum (identically zero).
using BoundaryFunction = std::function<double(const PhaseState&)>;

enum class TallyKind : std::uint8_t {
    PointReuse,   // per-start-cell mean of whole-trajectory scores
    TrackDensity, // per-visited-cell density: mean contribution / cell measure
};

/// Cell-centered estimate grid: Welford statistics of per-history scores per
/// cell. For PointReuse grids a cell with no seeded histories is *empty*
/// (missing), never zero; TrackDensity cells are always defined.
class TallyGrid {
public:
    TallyGrid(Mesh mesh, TallyKind kind)
        : mesh_(std::move(mesh)), kind_(kind), cells_(mesh_.n_cells()), contributors_(mesh_.n_cells(), 0) {}

    const Mesh& mesh() const { return mesh_; }
    TallyKind kind() const { return kind_; }
    std::size_t n_cells() const { return cells_.size(); }

    double value(std::size_t i) const {
        return kind_ == TallyKind::TrackDensity ? cells_[i].mean / mesh_.cell_measure() : cells_[i].mean;
    }
    double std_error(std::size_t i) const {
        const double se = cells_[i].std_error();
        return kind_ == TallyKind::TrackDensity ? se / mesh_.cell_measure() : se;
    }
    std::int64_t count(std::size_t i) const {
        return kind_ == TallyKind::TrackDensity ? contributors_[i] : cells_[i].n;
    }
    bool is_empty(std::size_t i) const { return kind_ == TallyKind::PointReuse && cells_[i].n == 0; }

    const Welford& cell(std::size_t i) const { return cells_[i]; }
    Welford& cell(std::size_t i) { return cells_[i]; }
    std::int64_t& contributors(std::size_t i) { return contributors_[i]; }

    /// Merge a partial grid (same mesh, same kind) cellwise.
    void merge(const TallyGrid& o) {
        if (!mesh_.same_as(o.mesh_) || kind_ != o.kind_) {
            throw MeshMismatchError("cannot merge tallies on different meshes");
        }
        for (std::size_t i = 0; i < cells_.size(); ++i) {
            cells_[i].merge(o.cells_[i]);
            contributors_[i] += o.contributors_[i];
        }
    }

    /// For track grids: account for all histories that contributed nothing to
    /// each cell. Call exactly once, after all merges.
    void fold_untouched(std::int64_t total_histories) {
        for (auto& c : cells_) c.fold_zeros(total_histories - c.n);
    }

private:
    Mesh mesh_;
    TallyKind kind_;
    std::vector<Welford> cells_;
    std::vector<std::int64_t> contributors_;
};

struct ResponseEstimate {
    double value = 0.0;
    double std_error = 0.0;
    std::int64_t histories = 0;
    std::int64_t excluded = 0; // census-capped trajectories left out
};

namespace detail {

inline bool usable(const Trajectory& t) { return t.exit.kind != ExitKind::CensusCap; }

inline double direction_sign_of(const Trajectory& t) {
    return t.sense == DirectionSense::Forward ? +1.0 : -1.0;
}

inline void check_weighting(const Trajectory& t, bool weighted, const char* op) {
    if (weighted && t.mode == AbsorptionMode::Analog) {
        throw PreconditionError(std::string(op) +
                                ": analog-absorption ensembles double-count absorption under "
                                "survival weighting; disable the weight factor to proceed");
    }
}

} // namespace detail

/// Whole-trajectory score against a region density:
///   sum_j region(X_j) exp(-depth_j) dt      (discrete trajectories)
///   Int region(X(t)) exp(-depth(t)) dt      (exact-event trajectories)
/// plus boundary * exp(-depth_exit) when the trajectory left the domain and a
/// boundary function is given. With weighted=false the exp factors are 1.
inline double trajectory_region_score(const Trajectory& traj, const RegionDensity& region,
                                      bool weighted = true,
                                      const BoundaryFunction& boundary = {}) {
    double score = 0.0;
    if (!traj.exact) {
        for (std::size_t j = 0; j + 1 < traj.samples.size(); ++j) {
            const StepSample& s = traj.samples[j];
            const double d = region.eval(s.state);
            if (d != 0.0) {
                score += d * (weighted ? std::exp(-s.optical_depth) : 1.0) * traj.dt;
            }
        }
    } else {
        const double sign = detail::direction_sign_of(traj);
        for (std::size_t j = 0; j + 1 < traj.samples.size(); ++j) {
            const StepSample& a = traj.samples[j];
            const StepSample& b = traj.samples[j + 1];
            const double len = b.time - a.time;
            if (!(len > 0.0)) continue;
            const double slope = sign * traj.v * a.state.omega;
            const double att = weighted ? (b.optical_depth - a.optical_depth) / len : 0.0;
            const double d0 = weighted ? a.optical_depth : 0.0;
            score += ray::segment_region_score(a.state, slope, len, d0, att, region.rect(),
                                               region.value());
        }
    }
    if (boundary && traj.exit.kind == ExitKind::LeftDomain) {
        score += boundary(traj.exit.state) *
                 (weighted ? std::exp(-traj.exit.optical_depth) : 1.0);
    }
    return score;
}

/// Per-cell contributions of one trajectory to a track tally over `mesh`:
/// each retained step (or each in-cell stretch of an exact segment) adds
/// exp(-depth) dt to the cell it lands in. Appends (cell, value) pairs,
/// combining repeats, into `out`.
inline void track_contributions(const Trajectory& traj, const Mesh& mesh, bool weighted,
                                std::vector<std::pair<std::size_t, double>>& out) {
    auto deposit = [&out](std::size_t cell, double v) {
        for (auto it = out.rbegin(); it != out.rend(); ++it) {
            if (it->first == cell) {
                it->second += v;
                return;
            }
        }
        out.emplace_back(cell, v);
    };

    if (!traj.exact) {
        for (std::size_t j = 0; j + 1 < traj.samples.size(); ++j) {
            const StepSample& s = traj.samples[j];
            const auto cell = mesh.cell_index(s.state.x, s.state.omega);
            if (!cell) continue;
            deposit(*cell, (weighted ? std::exp(-s.optical_depth) : 1.0) * traj.dt);
        }
        return;
    }

    const double sign = detail::direction_sign_of(traj);
    const auto& xe = mesh.x_edges();
    for (std::size_t j = 0; j + 1 < traj.samples.size(); ++j) {
        const StepSample& a = traj.samples[j];
        const StepSample& b = traj.samples[j + 1];
        const double len = b.time - a.time;
        if (!(len > 0.0)) continue;
        const auto io = detail::find_bin(mesh.omega_edges(), a.state.omega);
        if (!io) continue;
        const double slope = sign * traj.v * a.state.omega;
        const double att = weighted ? (b.optical_depth - a.optical_depth) / len : 0.0;
        const double d0 = weighted ? a.optical_depth : 0.0;
        const auto window = ray::interval_window(a.state.x, slope, xe.front(), xe.back(), len);
        if (!window) continue;
        // walk the x-cells crossed inside the window
        for (std::size_t ix = 0; ix < mesh.nx(); ++ix) {
            const auto w = ray::interval_window(a.state.x, slope, xe[ix], xe[ix + 1], len);
            if (!w) continue;
            deposit(mesh.index(ix, *io), ray::attenuated_piece(1.0, d0, att, w->first, w->second));
        }
    }
}

/// <g, Phi> estimated on forward trajectories (mean and standard error of
/// per-history scores). Census-capped histories are excluded and counted.
inline ResponseEstimate response_from_forward(std::span<const Trajectory> ensemble,
                                              const RegionDensity& g, bool weighted = true,
                                              const BoundaryFunction& boundary = {}) {
    Welford w;
    std::int64_t excluded = 0;
    for (const Trajectory& t : ensemble) {
        if (t.sense != DirectionSense::Forward) {
            throw PreconditionError("response_from_forward needs forward trajectories");
        }
        detail::check_weighting(t, weighted, "response_from_forward");
        if (!detail::usable(t)) {
            ++excluded;
            continue;
        }
        w.push(trajectory_region_score(t, g, weighted, boundary));
    }
    return ResponseEstimate{w.mean, w.std_error(), w.n, excluded};
}

/// <f, Psi> estimated on adjoint trajectories.
inline ResponseEstimate response_from_adjoint(std::span<const Trajectory> ensemble,
                                              const RegionDensity& f, bool weighted = true,
                                              const BoundaryFunction& boundary = {}) {
    Welford w;
    std::int64_t excluded = 0;
    for (const Trajectory& t : ensemble) {
        if (t.sense != DirectionSense::Adjoint) {
            throw PreconditionError("response_from_adjoint needs adjoint trajectories");
        }
        detail::check_weighting(t, weighted, "response_from_adjoint");
        if (!detail::usable(t)) {
            ++excluded;
            continue;
        }
        w.push(trajectory_region_score(t, f, weighted, boundary));
    }
    return ResponseEstimate{w.mean, w.std_error(), w.n, excluded};
}

namespace detail {

inline TallyGrid reuse_grid(std::span<const Trajectory> ensemble, const Mesh& mesh,
                            const RegionDensity& score_density, const BoundaryFunction& boundary,
                            DirectionSense expect, const char* op, bool weighted) {
    TallyGrid grid(mesh, TallyKind::PointReuse);
    for (const Trajectory& t : ensemble) {
        if (t.sense != expect) {
            throw PreconditionError(std::string(op) + ": trajectory has the wrong direction sense");
        }
        check_weighting(t, weighted, op);
        const auto cell = mesh.cell_index(t.start.x, t.start.omega);
        if (!cell) {
            throw PreconditionError(std::string(op) + ": trajectory start lies outside the tally mesh");
        }
        if (!usable(t)) continue; // flagged degenerate, excluded from reuse estimators
        grid.cell(*cell).push(trajectory_region_score(t, score_density, weighted, boundary));
        ++grid.contributors(*cell);
    }
    return grid;
}

inline TallyGrid track_grid(std::span<const Trajectory> ensemble, const Mesh& mesh,
                            DirectionSense expect, const char* op, bool weighted) {
    TallyGrid grid(mesh, TallyKind::TrackDensity);
    std::vector<std::pair<std::size_t, double>> contrib;
    std::int64_t histories = 0;
    for (const Trajectory& t : ensemble) {
        if (t.sense != expect) {
            throw PreconditionError(std::string(op) + ": trajectory has the wrong direction sense");
        }
        check_weighting(t, weighted, op);
        if (!usable(t)) continue;
        ++histories;
        contrib.clear();
        track_contributions(t, mesh, weighted, contrib);
        for (const auto& [cell, v] : contrib) {
            grid.cell(cell).push(v);
            ++grid.contributors(cell);
        }
    }
    grid.fold_untouched(histories);
    return grid;
}

} // namespace detail

/// Adjoint flux over the source support, reusing forward trajectories: the
/// per-start-cell mean of [ sum_j g(X_j) e^{-depth_j} dt + B(X_exit)
/// e^{-depth_exit} ].
inline TallyGrid adjoint_flux_from_forward(std::span<const Trajectory> ensemble, const Mesh& mesh,
                                           const RegionDensity& g,
                                           const BoundaryFunction& boundary = {},
                                           bool weighted = true) {
    return detail::reuse_grid(ensemble, mesh, g, boundary, DirectionSense::Forward,
                              "adjoint_flux_from_forward", weighted);
}

/// Flux over the detector support, reusing adjoint trajectories (the adjoint
/// optical depth integrates Sigma_t - S).
inline TallyGrid flux_from_adjoint(std::span<const Trajectory> ensemble, const Mesh& mesh,
                                   const RegionDensity& f, const BoundaryFunction& boundary = {},
                                   bool weighted = true) {
    return detail::reuse_grid(ensemble, mesh, f, boundary, DirectionSense::Adjoint,
                              "flux_from_adjoint", weighted);
}

/// Traditional track estimator of the flux density on a detector mesh: cell
/// value = sum of exp(-depth) dt over steps landing in the cell, normalized
/// by histories and cell measure.
inline TallyGrid forward_flux_tally(std::span<const Trajectory> ensemble, const Mesh& mesh,
                                    bool weighted = true) {
    return detail::track_grid(ensemble, mesh, DirectionSense::Forward, "forward_flux_tally",
                              weighted);
}

/// Traditional track estimator of the adjoint flux density on a source mesh.
inline TallyGrid adjoint_flux_tally(std::span<const Trajectory> ensemble, const Mesh& mesh,
                                    bool weighted = true) {
    return detail::track_grid(ensemble, mesh, DirectionSense::Adjoint, "adjoint_flux_tally",
                              weighted);
}

enum class GridNorm { L2, L2AreaWeighted, Linf };

inline GridNorm parse_grid_norm(const std::string& name) {
    if (name == "l2") return GridNorm::L2;
    if (name == "l2-area-weighted") return GridNorm::L2AreaWeighted;
    if (name == "linf") return GridNorm::Linf;
    throw ConfigError("unknown norm '" + name + "' (expected l2, l2-area-weighted, or linf)");
}

/// Norm of the cellwise difference of two grids on the same mesh. Cells empty
/// in either grid are excluded pairwise.
inline double grid_norm_diff(const TallyGrid& a, const TallyGrid& b, GridNorm norm = GridNorm::L2) {
    if (!a.mesh().same_as(b.mesh())) {
        throw MeshMismatchError("grid_norm_diff: grids live on different meshes");
    }
    double acc = 0.0;
    const double meas = a.mesh().cell_measure();
    for (std::size_t i = 0; i < a.n_cells(); ++i) {
        if (a.is_empty(i) || b.is_empty(i)) continue;
        const double d = a.value(i) - b.value(i);
        switch (norm) {
        case GridNorm::L2: acc += d * d; break;
        case GridNorm::L2AreaWeighted: acc += d * d * meas; break;
        case GridNorm::Linf: acc = std::max(acc, std::abs(d)); break;
        }
    }
    return norm == GridNorm::Linf ? acc : std::sqrt(acc);
}

/// Mesh inner product <grid, density> = sum_cells value * density(center) *
/// cell measure, skipping empty cells.
inline double grid_density_inner_product(const TallyGrid& grid, const RegionDensity& density) {
    double acc = 0.0;
    for (std::size_t i = 0; i < grid.n_cells(); ++i) {
        if (grid.is_empty(i)) continue;
        acc += grid.value(i) * density.eval(grid.mesh().center(i)) * grid.mesh().cell_measure();
    }
    return acc;
}

} // namespace boltzmc
