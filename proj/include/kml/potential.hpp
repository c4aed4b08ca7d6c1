#pragma once

// Trapping potentials V >= 0 with inf V = 0, sampled onto a grid.

#include "kml/error.hpp"
#include "kml/format.hpp"
#include "kml/grid.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace kml {

enum class PotentialKind { zero, harmonic, power, tabulated };

/// One column of abscissae (radius or signed x) and one of values.
struct PotentialTable {
    std::vector<double> x;
    std::vector<double> v;

    /// Piecewise-linear, constant beyond the ends.
    double operator()(double t) const
    {
        if (t <= x.front()) return v.front();
        if (t >= x.back()) return v.back();
        const auto it = std::upper_bound(x.begin(), x.end(), t);
        const std::size_t j = static_cast<std::size_t>(it - x.begin());
        const double s = (t - x[j - 1]) / (x[j] - x[j - 1]);
        return (1.0 - s) * v[j - 1] + s * v[j];
    }

    /// A table whose abscissae are all >= 0 is read as a function of |x|.
    bool radial() const { return x.front() >= 0.0; }
};

inline PotentialTable parse_potential_table(std::istream& in, const std::string& origin = "<stream>")
{
    std::string line;
    if (!std::getline(in, line)) throw invalid_argument(origin + ": empty potential table");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "V-TABLE v1") throw invalid_argument(origin + ": missing 'V-TABLE v1' header");
    PotentialTable t;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos || line[line.find_first_not_of(" \t")] == '#') continue;
        std::istringstream ls(line);
        std::string a, b, extra;
        if (!(ls >> a >> b) || (ls >> extra))
            throw invalid_argument(origin + ":" + std::to_string(lineno) + ": expected two columns");
        const double xv = parse_decimal(a), vv = parse_decimal(b);
        if (!std::isfinite(xv) || !std::isfinite(vv))
            throw invalid_argument(origin + ":" + std::to_string(lineno) + ": non-finite entry");
        if (vv < 0.0) throw invalid_argument(origin + ":" + std::to_string(lineno) + ": negative potential value");
        if (!t.x.empty() && !(xv > t.x.back()))
            throw invalid_argument(origin + ":" + std::to_string(lineno) + ": first column must increase strictly");
        t.x.push_back(xv);
        t.v.push_back(vv);
    }
    if (t.x.size() < 2) throw invalid_argument(origin + ": potential table needs at least two rows");
    return t;
}

inline PotentialTable load_potential_table(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw invalid_argument("cannot open potential table " + path.string());
    return parse_potential_table(in, path.string());
}

struct PotentialSpec {
    PotentialKind kind = PotentialKind::zero;
    double omega = 1.0; ///< harmonic: omega |x|^2
    double s = 2.0;     ///< power: kappa |x|^s
    double kappa = 1.0;
    std::string path;   ///< tabulated
    PotentialTable table;

    static PotentialSpec zero() { return {}; }
    static PotentialSpec harmonic(double omega)
    {
        PotentialSpec p;
        p.kind = PotentialKind::harmonic;
        p.omega = omega;
        return p;
    }
    static PotentialSpec power(double s, double kappa)
    {
        PotentialSpec p;
        p.kind = PotentialKind::power;
        p.s = s;
        p.kappa = kappa;
        return p;
    }
    static PotentialSpec tabulated(PotentialTable table, std::string path = {})
    {
        PotentialSpec p;
        p.kind = PotentialKind::tabulated;
        p.table = std::move(table);
        p.path = std::move(path);
        return p;
    }
    static PotentialSpec from_file(const std::filesystem::path& path)
    {
        return tabulated(load_potential_table(path), path.string());
    }

    bool is_zero() const { return kind == PotentialKind::zero; }

    std::string describe() const
    {
        switch (kind) {
        case PotentialKind::zero: return "zero";
        case PotentialKind::harmonic: return "harmonic(omega=" + to_decimal(omega) + ")";
        case PotentialKind::power: return "power(s=" + to_decimal(s) + ",kappa=" + to_decimal(kappa) + ")";
        case PotentialKind::tabulated: return "tabulated(" + path + ")";
        }
        return "?";
    }

    double operator()(double x) const
    {
        switch (kind) {
        case PotentialKind::zero: return 0.0;
        case PotentialKind::harmonic: return omega * x * x;
        case PotentialKind::power: return kappa * std::pow(std::abs(x), s);
        case PotentialKind::tabulated: return table(table.radial() ? std::abs(x) : x);
        }
        return 0.0;
    }
};

/// V on the grid nodes, shifted so its minimum is exactly 0. Non-zero
/// potentials must be larger on the boundary than at the quartile nodes,
/// the finite-domain stand-in for V -> infinity.
inline Field potential_field(const GridPtr& grid, const PotentialSpec& spec)
{
    if (spec.kind == PotentialKind::harmonic && !(spec.omega > 0.0))
        throw invalid_argument("harmonic potential needs omega > 0");
    if (spec.kind == PotentialKind::power && (!(spec.s > 0.0) || !(spec.kappa > 0.0)))
        throw invalid_argument("power potential needs s > 0 and kappa > 0");
    if (spec.kind == PotentialKind::tabulated && spec.table.x.size() < 2)
        throw invalid_argument("tabulated potential has no table");

    auto V = Field::sample(grid, [&](double x) { return spec(x); });
    if (spec.is_zero()) return V;

    auto vals = V.values();
    const double lo = *std::min_element(vals.begin(), vals.end());
    if (lo != 0.0) {
        for (double& v : vals) v -= lo;
        std::clog << "kml: potential " << spec.describe() << " shifted by " << to_decimal(-lo)
                  << " so that its minimum on the grid is 0\n";
    }

    const std::size_t n = grid->size();
    const bool line = grid->geometry() == Geometry::line;
    const double edge = line ? std::min(V[0], V[n - 1]) : V[n - 1];
    const double quart = line ? std::max(V[n / 4], V[3 * n / 4]) : V[n / 4];
    if (!(edge > quart))
        throw invalid_argument("potential " + spec.describe() + " does not grow towards the domain boundary");
    return V;
}

} // namespace kml
