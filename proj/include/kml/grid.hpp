#pragma once

// Spatial substrate: uniform line / radial grids, quadrature, the discrete
// Laplacian and the Dirichlet form it is adjoint to.
//
// Radial grids use finite-volume weights: node i owns the shell
// [r_i - h/2, r_i + h/2] (clipped to [0, R]), so weights are strictly
// positive, node 0 carries the ball of radius h/2, and the weights sum to
// the exact ball volume. The Dirichlet form is
//
//     G(u) = sum_i  F_i (u_{i+1} - u_i)^2,    F_i = |S^{N-1}| r_{i+1/2}^{N-1} / h
//
// and the Laplacian is the unique operator with  <-L u, v>_w = dG(u)[v]/2
// for every v vanishing on Dirichlet nodes. This makes energy gradients exact.

#include "kml/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numbers>
#include <span>
#include <string>
#include <vector>

namespace kml {

enum class Geometry { line, radial };

inline std::string to_string(Geometry g) { return g == Geometry::line ? "line" : "radial"; }

inline Geometry geometry_from_string(const std::string& s)
{
    if (s == "line") return Geometry::line;
    if (s == "radial") return Geometry::radial;
    throw invalid_argument("unknown geometry '" + s + "'");
}

struct GridSpec {
    int dim = 1;
    Geometry geometry = Geometry::line;
    double extent = 40.0;
    std::size_t n = 8001;

    friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

/// |S^{N-1}|: 2 (two points), 2*pi, 4*pi.
inline double sphere_area(int dim)
{
    switch (dim) {
    case 1: return 2.0;
    case 2: return 2.0 * std::numbers::pi;
    case 3: return 4.0 * std::numbers::pi;
    default: throw invalid_argument("dimension must be 1, 2 or 3");
    }
}

class Grid {
public:
    explicit Grid(GridSpec spec) : spec_(spec)
    {
        if (spec_.dim < 1 || spec_.dim > 3)
            throw invalid_argument("grid dimension must be 1, 2 or 3");
        if (spec_.geometry == Geometry::line && spec_.dim != 1)
            throw invalid_argument("line geometry is only available for dim=1");
        if (!(spec_.extent > 0.0) || !std::isfinite(spec_.extent))
            throw invalid_argument("grid extent must be positive");
        if (spec_.n < 16) throw invalid_argument("grid needs at least 16 nodes");

        const std::size_t n = spec_.n;
        const double span = spec_.geometry == Geometry::line ? 2.0 * spec_.extent : spec_.extent;
        h_ = span / static_cast<double>(n - 1);
        weights_.resize(n);
        faces_.resize(n - 1);

        if (spec_.geometry == Geometry::line) {
            std::fill(weights_.begin(), weights_.end(), h_);
            weights_.front() = weights_.back() = 0.5 * h_;
            std::fill(faces_.begin(), faces_.end(), 1.0 / h_);
            return;
        }

        const int N = spec_.dim;
        const double S = sphere_area(N);
        auto ball = [&](double r) { return S / N * std::pow(r, N); };
        for (std::size_t i = 0; i < n; ++i) {
            const double r = radius(i);
            const double lo = i == 0 ? 0.0 : r - 0.5 * h_;
            const double hi = i + 1 == n ? spec_.extent : r + 0.5 * h_;
            weights_[i] = ball(hi) - ball(lo);
        }
        for (std::size_t i = 0; i + 1 < n; ++i) {
            const double mid = radius(i) + 0.5 * h_;
            faces_[i] = S * std::pow(mid, N - 1) / h_;
        }
    }

    const GridSpec& spec() const { return spec_; }
    int dim() const { return spec_.dim; }
    Geometry geometry() const { return spec_.geometry; }
    double extent() const { return spec_.extent; }
    std::size_t size() const { return spec_.n; }
    double spacing() const { return h_; }

    /// Signed coordinate for line grids, radius for radial grids.
    double node(std::size_t i) const
    {
        return spec_.geometry == Geometry::line ? -spec_.extent + static_cast<double>(i) * h_
                                                : static_cast<double>(i) * h_;
    }
    double radius(std::size_t i) const { return std::abs(node(i)); }

    std::span<const double> weights() const { return weights_; }
    std::span<const double> faces() const { return faces_; }

    bool is_dirichlet(std::size_t i) const
    {
        return i + 1 == spec_.n || (spec_.geometry == Geometry::line && i == 0);
    }

    double volume() const
    {
        if (spec_.geometry == Geometry::line) return 2.0 * spec_.extent;
        return sphere_area(spec_.dim) / spec_.dim * std::pow(spec_.extent, spec_.dim);
    }

private:
    GridSpec spec_;
    double h_ = 0.0;
    std::vector<double> weights_;
    std::vector<double> faces_;
};

using GridPtr = std::shared_ptr<const Grid>;

inline GridPtr make_grid(int dim, Geometry geometry, double extent, std::size_t n)
{
    return std::make_shared<const Grid>(GridSpec{dim, geometry, extent, n});
}

inline GridPtr make_grid(const GridSpec& spec) { return std::make_shared<const Grid>(spec); }

/// A real function sampled on the nodes of a grid.
class Field {
public:
    Field() = default;
    explicit Field(GridPtr grid) : grid_(std::move(grid)), values_(grid_->size(), 0.0) {}
    Field(GridPtr grid, std::vector<double> values) : grid_(std::move(grid)), values_(std::move(values))
    {
        if (values_.size() != grid_->size()) throw invalid_argument("field length does not match grid");
        for (double v : values_)
            if (!std::isfinite(v)) throw invalid_argument("field values must be finite");
    }

    /// Samples f(coordinate) at every node; radial grids pass the radius.
    template <class F>
    static Field sample(GridPtr grid, F&& f)
    {
        std::vector<double> v(grid->size());
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = f(grid->node(i));
        return Field(std::move(grid), std::move(v));
    }

    const Grid& grid() const { return *grid_; }
    const GridPtr& grid_ptr() const { return grid_; }
    std::size_t size() const { return values_.size(); }
    std::span<const double> values() const { return values_; }
    std::span<double> values() { return values_; }
    double operator[](std::size_t i) const { return values_[i]; }
    double& operator[](std::size_t i) { return values_[i]; }

    double max_abs() const
    {
        double m = 0.0;
        for (double v : values_) m = std::max(m, std::abs(v));
        return m;
    }

    bool all_finite() const
    {
        return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
    }

private:
    GridPtr grid_;
    std::vector<double> values_;
};

inline void require_on(const Grid& grid, const Field& f)
{
    if (!f.grid_ptr() || (&f.grid() != &grid && f.grid().spec() != grid.spec())) throw grid_mismatch();
}

inline void require_same_grid(const Field& a, const Field& b) { require_on(a.grid(), b); }

inline double integrate(const Grid& grid, const Field& f)
{
    require_on(grid, f);
    const auto w = grid.weights();
    double s = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * f[i];
    return s;
}

inline double integrate(const Field& f) { return integrate(f.grid(), f); }

/// Quadrature inner product <u, v>_w.
inline double inner(const Field& u, const Field& v)
{
    require_same_grid(u, v);
    const auto w = u.grid().weights();
    double s = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * u[i] * v[i];
    return s;
}

inline double lp_norm_pow(const Grid& grid, const Field& f, double p)
{
    require_on(grid, f);
    if (!(p >= 1.0)) throw invalid_argument("lp_norm_pow requires p >= 1");
    const auto w = grid.weights();
    double s = 0.0;
    if (p == 2.0) {
        for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * f[i] * f[i];
    } else {
        for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * std::pow(std::abs(f[i]), p);
    }
    return s;
}

inline double l2_norm(const Grid& grid, const Field& f) { return std::sqrt(lp_norm_pow(grid, f, 2.0)); }
inline double l2_norm(const Field& f) { return l2_norm(f.grid(), f); }

/// Polarized Dirichlet form sum_i F_i (u_{i+1}-u_i)(v_{i+1}-v_i).
inline double grad_bilinear(const Field& u, const Field& v)
{
    require_same_grid(u, v);
    const auto F = u.grid().faces();
    double s = 0.0;
    for (std::size_t i = 0; i < F.size(); ++i) s += F[i] * (u[i + 1] - u[i]) * (v[i + 1] - v[i]);
    return s;
}

/// Discrete  int |grad u|^2.
inline double grad_norm_sq(const Grid& grid, const Field& u)
{
    require_on(grid, u);
    const auto F = grid.faces();
    double s = 0.0;
    for (std::size_t i = 0; i < F.size(); ++i) {
        const double d = u[i + 1] - u[i];
        s += F[i] * d * d;
    }
    return s;
}

inline double grad_norm_sq(const Field& u) { return grad_norm_sq(u.grid(), u); }

/// Discrete Laplacian; zero on Dirichlet nodes.
inline Field laplacian(const Grid& grid, const Field& u)
{
    require_on(grid, u);
    const auto F = grid.faces();
    const auto w = grid.weights();
    const std::size_t n = grid.size();
    Field out(u.grid_ptr());
    for (std::size_t i = 0; i < n; ++i) {
        if (grid.is_dirichlet(i)) continue;
        double flux = 0.0;
        if (i + 1 < n) flux += F[i] * (u[i + 1] - u[i]);
        if (i > 0) flux -= F[i - 1] * (u[i] - u[i - 1]);
        out[i] = flux / w[i];
    }
    return out;
}

inline Field laplacian(const Field& u) { return laplacian(u.grid(), u); }

/// Four-point cubic interpolation at a spatial coordinate. Radial fields are
/// reflected evenly through r = 0; everything beyond the domain is zero.
inline double sample_at(const Field& f, double x)
{
    const Grid& g = f.grid();
    const std::size_t n = g.size();
    const double h = g.spacing();
    double s; // fractional node index
    if (g.geometry() == Geometry::line) {
        s = (x + g.extent()) / h;
    } else {
        s = std::abs(x) / h;
    }
    if (!(s >= -1e-12) || s > static_cast<double>(n - 1) + 1e-12) return 0.0;
    s = std::clamp(s, 0.0, static_cast<double>(n - 1));

    auto value = [&](long j) -> double {
        if (j >= static_cast<long>(n)) return 0.0;
        if (j < 0) {
            if (g.geometry() == Geometry::radial) return f[static_cast<std::size_t>(-j)];
            return 0.0;
        }
        return f[static_cast<std::size_t>(j)];
    };

    long i = static_cast<long>(std::floor(s));
    if (i >= static_cast<long>(n) - 1) i = static_cast<long>(n) - 2;
    const double t = s - static_cast<double>(i);
    const double ym = value(i - 1), y0 = value(i), y1 = value(i + 1), y2 = value(i + 2);
    // Lagrange basis on nodes -1, 0, 1, 2.
    const double lm = -t * (t - 1.0) * (t - 2.0) / 6.0;
    const double l0 = (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0;
    const double l1 = -(t + 1.0) * t * (t - 2.0) / 2.0;
    const double l2 = (t + 1.0) * t * (t - 1.0) / 6.0;
    return lm * ym + l0 * y0 + l1 * y1 + l2 * y2;
}

} // namespace kml
