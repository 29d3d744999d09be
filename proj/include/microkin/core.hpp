#pragma once
// Shared parameter bundles, grids and validation used by every model family.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "microkin/config.hpp"

namespace microkin {

inline constexpr const char* kVersion = "1.0.0";

}  // namespace microkin

namespace microkin::core {

struct ValidationError : std::runtime_error {
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

inline void require(bool ok, const std::string& msg) {
    if (!ok) throw ValidationError(msg);
}

// --------------------------------------------------------------------------
// 1D interval with uniform grid

struct Grid1D {
    double L = 1.0;  // interval [0, L]
    int n = 1;       // number of cells

    double dx() const { return L / n; }
    double center(int i) const { return (i + 0.5) * dx(); }
    int cell_of(double x) const {
        int i = static_cast<int>(std::floor(x / dx()));
        if (i < 0) i = 0;
        if (i >= n) i = n - 1;
        return i;
    }
};

inline void validate(const Grid1D& g) {
    require(g.L > 0.0, "grid length must be positive");
    require(g.n >= 1, "grid must have at least one cell");
    require(std::isfinite(g.L), "grid length must be finite");
    // uniform cells reproduce L exactly up to accumulated rounding
    double sum = g.dx() * g.n;
    require(std::abs(sum - g.L) <= 1e-12 * g.L, "cell widths do not sum to the interval length");
}

// Continuum interval description for the transform-domain solvers.
struct Interval1D {
    double L = 1.0;
    double D = 1.0;
};

inline void validate(const Interval1D& iv) {
    require(iv.L > 0.0 && std::isfinite(iv.L), "interval length must be positive");
    require(iv.D > 0.0 && std::isfinite(iv.D), "diffusivity must be positive");
}

enum class Boundary { Reflecting, Absorbing };

struct BoundaryPair {
    Boundary left = Boundary::Reflecting;
    Boundary right = Boundary::Reflecting;
};

inline std::string to_string(Boundary b) {
    return b == Boundary::Reflecting ? "reflecting" : "absorbing";
}

inline Boundary boundary_from_string(const std::string& s) {
    if (s == "reflecting") return Boundary::Reflecting;
    if (s == "absorbing") return Boundary::Absorbing;
    throw ValidationError("unknown boundary condition: '" + s + "'");
}

// --------------------------------------------------------------------------
// Kinetic rate bundle

struct ReactionRates {
    double k1 = 0.0;       // binding, per free site per unit concentration
    double kminus1 = 0.0;  // unbinding
    double k2 = 0.0;       // catalysis
    double gamma = 0.0;    // injection
    double Kminus1 = 0.0;  // degradation
};

inline void validate(const ReactionRates& r) {
    require(std::isfinite(r.k1) && r.k1 >= 0.0, "negative rate: k1");
    require(std::isfinite(r.kminus1) && r.kminus1 >= 0.0, "negative rate: kminus1");
    require(std::isfinite(r.k2) && r.k2 >= 0.0, "negative rate: k2");
    require(std::isfinite(r.gamma) && r.gamma >= 0.0, "negative rate: gamma");
    require(std::isfinite(r.Kminus1) && r.Kminus1 >= 0.0, "negative rate: Kminus1");
}

// --------------------------------------------------------------------------
// Binding site layout: integer site count per grid cell

struct SiteDensity {
    std::vector<int> counts;  // one entry per grid cell

    int total() const { return std::accumulate(counts.begin(), counts.end(), 0); }
    int max_count() const {
        int m = 0;
        for (int c : counts) m = std::max(m, c);
        return m;
    }
    // support measure |Omega'| for a given grid
    double support_length(const Grid1D& g) const {
        int k = 0;
        for (int c : counts) k += (c > 0);
        return k * g.dx();
    }
};

inline void validate(const SiteDensity& s, const Grid1D& g) {
    require(static_cast<int>(s.counts.size()) == g.n, "site layout does not match grid size");
    for (int c : s.counts) require(c >= 0, "negative site count");
}

inline SiteDensity uniform_sites(const Grid1D& g, int per_cell) {
    SiteDensity s;
    s.counts.assign(g.n, per_cell);
    return s;
}

// Sites on cells with center in [a, b], per_cell each.
inline SiteDensity sites_on_interval(const Grid1D& g, double a, double b, int per_cell) {
    SiteDensity s;
    s.counts.assign(g.n, 0);
    for (int i = 0; i < g.n; ++i)
        if (g.center(i) >= a && g.center(i) <= b) s.counts[i] = per_cell;
    return s;
}

// --------------------------------------------------------------------------
// Initial placement density m0(x), stored per cell, integrates to 1

struct InitialDistribution {
    std::vector<double> density;  // per-length, one entry per cell

    double mass(const Grid1D& g) const {
        double m = 0.0;
        for (double d : density) m += d;
        return m * g.dx();
    }
};

inline void validate(const InitialDistribution& m0, const Grid1D& g) {
    require(static_cast<int>(m0.density.size()) == g.n, "initial distribution does not match grid size");
    for (double d : m0.density) require(d >= 0.0 && std::isfinite(d), "initial distribution must be a nonnegative density");
    require(std::abs(m0.mass(g) - 1.0) <= 1e-9, "initial distribution must integrate to 1");
}

inline InitialDistribution uniform_initial(const Grid1D& g) {
    InitialDistribution m;
    m.density.assign(g.n, 1.0 / g.L);
    return m;
}

// 1 + cos(2 pi x / L) profile, normalized; a smooth nonuniform test input
inline InitialDistribution cosine_initial(const Grid1D& g) {
    InitialDistribution m;
    m.density.resize(g.n);
    double sum = 0.0;
    for (int i = 0; i < g.n; ++i) {
        double v = 1.0 + std::cos(2.0 * std::numbers::pi * g.center(i) / g.L);
        m.density[i] = v;
        sum += v * g.dx();
    }
    for (double& d : m.density) d /= sum;
    return m;
}

// --------------------------------------------------------------------------
// 3D geometry summary for narrow-escape style binding-rate estimates

struct Domain3DParams {
    double volume = 1.0;         // |Omega|
    double boundary_area = 1.0;  // |dOmega|
    double channel_area = 0.0;   // total absorbing area on the boundary
    int channels = 1;            // number of receptor channels
    double D = 1.0;              // bulk diffusivity
};

inline void validate(const Domain3DParams& d) {
    require(d.volume > 0.0 && std::isfinite(d.volume), "domain volume must be positive");
    require(d.boundary_area > 0.0 && std::isfinite(d.boundary_area), "boundary area must be positive");
    require(d.channel_area > 0.0, "channel area must be positive");
    require(d.channel_area < d.boundary_area, "channel area exceeds boundary area");
    require(d.channels >= 1, "channel count must be at least 1");
    require(d.D > 0.0 && std::isfinite(d.D), "diffusivity must be positive");
}

// --------------------------------------------------------------------------
// Config-section serialization (round-trips exactly)

inline cfg::Section to_section(const Grid1D& g, const std::string& name = "grid") {
    cfg::Section s{name, {}};
    s.set("L", g.L);
    s.set("n", g.n);
    return s;
}
inline Grid1D grid_from_section(const cfg::Section& s) {
    Grid1D g;
    g.L = s.get_double("L");
    g.n = static_cast<int>(s.get_int("n"));
    validate(g);
    return g;
}

inline cfg::Section to_section(const ReactionRates& r, const std::string& name = "rates") {
    cfg::Section s{name, {}};
    s.set("k1", r.k1);
    s.set("kminus1", r.kminus1);
    s.set("k2", r.k2);
    s.set("gamma", r.gamma);
    s.set("Kminus1", r.Kminus1);
    return s;
}
inline ReactionRates rates_from_section(const cfg::Section& s) {
    ReactionRates r;
    r.k1 = s.get_double_or("k1", 0.0);
    r.kminus1 = s.get_double_or("kminus1", 0.0);
    r.k2 = s.get_double_or("k2", 0.0);
    r.gamma = s.get_double_or("gamma", 0.0);
    r.Kminus1 = s.get_double_or("Kminus1", 0.0);
    validate(r);
    return r;
}

inline cfg::Section to_section(const Domain3DParams& d, const std::string& name = "domain3d") {
    cfg::Section s{name, {}};
    s.set("volume", d.volume);
    s.set("boundary_area", d.boundary_area);
    s.set("channel_area", d.channel_area);
    s.set("channels", d.channels);
    s.set("D", d.D);
    return s;
}
inline Domain3DParams domain3d_from_section(const cfg::Section& s) {
    Domain3DParams d;
    d.volume = s.get_double("volume");
    d.boundary_area = s.get_double("boundary_area");
    d.channel_area = s.get_double("channel_area");
    d.channels = static_cast<int>(s.get_int_or("channels", 1));
    d.D = s.get_double_or("D", 1.0);
    validate(d);
    return d;
}

}  // namespace microkin::core
