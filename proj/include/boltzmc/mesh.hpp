#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <vector>

#include "boltzmc/errors.hpp"
#include "boltzmc/phase.hpp"

namespace boltzmc {
namespace detail {

/// 1-D bin lookup on closed [edges.front(), edges.back()], half-open bins,
/// last bin closed.
inline std::optional<std::size_t> find_bin(const std::vector<double>& edges, double v) {
    if (v < edges.front() || v > edges.back()) return std::nullopt;
    if (v == edges.back()) return edges.size() - 2;
    auto it = std::upper_bound(edges.begin(), edges.end(), v);
    return static_cast<std::size_t>(it - edges.begin()) - 1;
}

} // namespace detail

/// Uniform cell-centered mesh over an (x, Omega) rectangle. Cells are
/// half-open [edge_i, edge_{i+1}) except the last, which is closed, so every
/// point of the rectangle belongs to exactly one cell.
class Mesh {
public:
    Mesh(std::vector<double> x_edges, std::vector<double> omega_edges)
        : x_edges_(std::move(x_edges)), omega_edges_(std::move(omega_edges)) {
        if (x_edges_.size() < 2 || omega_edges_.size() < 2) {
            throw ConfigError("mesh needs at least one cell per axis");
        }
    }

    std::size_t nx() const { return x_edges_.size() - 1; }
    std::size_t nomega() const { return omega_edges_.size() - 1; }
    std::size_t n_cells() const { return nx() * nomega(); }

    const std::vector<double>& x_edges() const { return x_edges_; }
    const std::vector<double>& omega_edges() const { return omega_edges_; }

    double x_center(std::size_t ix) const { return 0.5 * (x_edges_[ix] + x_edges_[ix + 1]); }
    double omega_center(std::size_t io) const { return 0.5 * (omega_edges_[io] + omega_edges_[io + 1]); }

    /// Cell measure (uniform spacing assumed by construction).
    double cell_measure() const {
        return (x_edges_[1] - x_edges_[0]) * (omega_edges_[1] - omega_edges_[0]);
    }

    std::size_t index(std::size_t ix, std::size_t io) const { return ix * nomega() + io; }

    PhaseState center(std::size_t cell) const {
        return PhaseState{x_center(cell / nomega()), omega_center(cell % nomega()), std::nullopt};
    }

    std::optional<std::size_t> cell_index(double x, double omega) const {
        const auto ix = axis_bin(x_edges_, x);
        if (!ix) return std::nullopt;
        const auto io = axis_bin(omega_edges_, omega);
        if (!io) return std::nullopt;
        return index(*ix, *io);
    }

    bool same_as(const Mesh& other, double tol = 1e-12) const {
        return edges_close(x_edges_, other.x_edges_, tol) &&
               edges_close(omega_edges_, other.omega_edges_, tol);
    }

private:
    static std::optional<std::size_t> axis_bin(const std::vector<double>& edges, double v) {
        const double lo = edges.front(), hi = edges.back();
        if (v < lo || v > hi) return std::nullopt;
        const std::size_t n = edges.size() - 1;
        if (v == hi) return n - 1;
        const double h = (hi - lo) / static_cast<double>(n);
        auto k = static_cast<std::size_t>((v - lo) / h);
        if (k >= n) k = n - 1;
        // guard against floating-point placement just across an edge
        if (v < edges[k] && k > 0) --k;
        else if (v >= edges[k + 1] && k + 1 < n) ++k;
        return k;
    }

    static bool edges_close(const std::vector<double>& a, const std::vector<double>& b, double tol) {
        if (a.size() != b.size()) return false;
        for (std::size_t i = 0; i < a.size(); ++i) {
            if (std::abs(a[i] - b[i]) > tol) return false;
        }
        return true;
    }

    std::vector<double> x_edges_;
    std::vector<double> omega_edges_;
};

namespace detail {

inline std::vector<double> uniform_edges(const Interval& span, double h, const char* axis) {
    if (!(h > 0.0)) throw ConfigError(std::string("mesh spacing must be positive on the ") + axis + " axis");
    const double width = span.width();
    const double ratio = width / h;
    auto n = static_cast<long long>(std::llround(ratio));
    // exact tiling when the spacing divides the width; otherwise truncate to
    // whole cells starting at the lower edge
    if (n < 1 || std::abs(static_cast<double>(n) * h - width) > 1e-9 * std::max(1.0, std::abs(width))) {
        n = static_cast<long long>(std::floor(ratio + 1e-12));
    }
    if (n < 1) throw ConfigError(std::string("mesh has no cells on the ") + axis + " axis (support narrower than spacing)");
    std::vector<double> edges(static_cast<std::size_t>(n) + 1);
    for (long long i = 0; i <= n; ++i) {
        edges[static_cast<std::size_t>(i)] = std::fma(static_cast<double>(i), h, span.lo);
    }
    return edges;
}

} // namespace detail

/// Build the cell mesh covering a region rectangle with spacings (ds, da).
inline Mesh build_mesh(const Rect& rect, double ds, double da) {
    return Mesh(detail::uniform_edges(rect.x, ds, "x"),
                detail::uniform_edges(rect.omega, da, "omega"));
}

} // namespace boltzmc
