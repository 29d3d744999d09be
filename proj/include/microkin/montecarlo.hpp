#pragma once
// Stochastic referee simulators: Euler-Maruyama Brownian particles with
// binding/killing, and exact-jump (event-driven) chain simulation.  Every
// analytic operation in the other modules is cross-checked against one of
// these.
//
// Reactions use exponential clocks: each particle accumulates its hazard
// integral along the discrete path and fires when the integral passes an
// Exp(1) threshold.  Given the Brownian path this removes per-step Bernoulli
// noise, so runs at dt and dt/2 with the same seed differ by discretization
// bias only (the `wiener_substeps` option draws the path at a fixed finer
// resolution to make such pairs share the path exactly).
//
// Reflection is by coordinate folding (mirror at 0 and L), exact for
// Gaussian increments.  Every replica has its own counter-based RNG stream,
// and particles within a replica have substreams, so results are independent
// of scheduling and bit-identical for a fixed seed.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "microkin/core.hpp"
#include "microkin/renewal_pushpull.hpp"
#include "microkin/markov_channel.hpp"
#include "microkin/rng.hpp"

namespace microkin::mc {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct EnsembleStats {
    long long R = 0;
    std::uint64_t seed = 0;
    std::vector<double> t;     // sample times
    std::vector<double> mean;  // across replicas, per sample time
    std::vector<double> var;
    std::vector<double> se;
    // time averages over [window_start, t_end], one value per replica
    std::vector<double> replica_values;
    double window_start = 0.0;
    double steady_mean = 0.0;
    double steady_mean_se = 0.0;
    double steady_var = 0.0;  // pooled Var of the instantaneous observable
    double steady_var_se = 0.0;
};

struct SimOptions {
    int sample_every = 10;       // record every k-th step
    double avg_start = -1.0;     // steady window start; <0 means t_end/2
    int wiener_substeps = 1;     // Gaussian sub-draws per EM step
};

namespace detail {

inline double fold(double x, double L) {
    while (x < 0.0 || x > L) {
        if (x < 0.0) x = -x;
        if (x > L) x = 2.0 * L - x;
    }
    return x;
}

struct CurveAccum {
    long long n = 0;
    std::vector<double> mean, M2;
    void init(size_t m) {
        n = 0;
        mean.assign(m, 0.0);
        M2.assign(m, 0.0);
    }
    void add(const std::vector<double>& x) {
        ++n;
        for (size_t i = 0; i < x.size(); ++i) {
            const double d = x[i] - mean[i];
            mean[i] += d / n;
            M2[i] += d * (x[i] - mean[i]);
        }
    }
    void finalize(EnsembleStats& out) const {
        out.mean = mean;
        out.var.assign(mean.size(), 0.0);
        out.se.assign(mean.size(), 0.0);
        if (n > 1)
            for (size_t i = 0; i < mean.size(); ++i) {
                out.var[i] = M2[i] / (n - 1);
                out.se[i] = std::sqrt(out.var[i] / n);
            }
    }
};

inline void steady_from_replicas(EnsembleStats& out, const std::vector<double>& a,
                                 const std::vector<double>& b) {
    const long long R = static_cast<long long>(a.size());
    out.replica_values = a;
    if (R == 0) return;
    double A = 0.0, B = 0.0;
    for (long long r = 0; r < R; ++r) {
        A += a[r];
        B += b[r];
    }
    const double am = A / R, bm = B / R;
    out.steady_mean = am;
    double s2 = 0.0;
    for (double v : a) s2 += (v - am) * (v - am);
    if (R > 1) out.steady_mean_se = std::sqrt(s2 / (R - 1) / R);
    out.steady_var = bm - am * am;
    if (R > 1) {
        // jackknife over replicas for the variance estimator
        double vbar = 0.0;
        std::vector<double> vr(R);
        for (long long r = 0; r < R; ++r) {
            const double ar = (A - a[r]) / (R - 1);
            const double br = (B - b[r]) / (R - 1);
            vr[r] = br - ar * ar;
            vbar += vr[r];
        }
        vbar /= R;
        double q = 0.0;
        for (double v : vr) q += (v - vbar) * (v - vbar);
        out.steady_var_se = std::sqrt((R - 1.0) / R * q);
    }
}

struct Particle {
    double x = 0.0;
    bool alive = true;
    bool bound = false;
    int bound_cell = -1;
    double hazard = 0.0;
    double threshold = kInf;
    rng::CounterRng gen{0};
};

// Gaussian EM increment drawn as `m` sub-increments so paths can be shared
// between runs whose dt differ by the same factor.
inline double em_increment(rng::CounterRng& g, double D, double dt, int m) {
    const double s = std::sqrt(2.0 * D * dt / m);
    double dx = 0.0;
    for (int i = 0; i < m; ++i) dx += s * g.normal();
    return dx;
}

}  // namespace detail

using ParticleState = std::vector<detail::Particle>;

// --------------------------------------------------------------------------
// Volume-distributed binding sites: M0 Brownian particles over a site layout
// S0, binding in-cell at rate k1 * (free sites), unbinding at kminus1.
// Observable: total bound count.

inline EnsembleStats simulate_model1(const core::Grid1D& grid, double D,
                                     const core::ReactionRates& rates,
                                     const core::SiteDensity& S0, int M0, core::BoundaryPair bc,
                                     double t_end, double dt, long long R, std::uint64_t seed,
                                     const SimOptions& opt = {}) {
    core::validate(grid);
    core::validate(rates);
    core::validate(S0, grid);
    core::require(D > 0.0 && M0 >= 1 && t_end > 0.0 && dt > 0.0 && R >= 1, "bad run parameters");
    const double dx = grid.dx();
    core::require(dt <= dx * dx / (2.0 * D) * (1.0 + 1e-12),
                  "time step too coarse for the grid (need dt <= dx^2/(2D))");
    core::require(rates.k1 * std::max(S0.max_count(), 1) * dt <= 0.5 && rates.kminus1 * dt <= 0.5,
                  "time step too coarse for the reaction rates");

    const long long nsteps = static_cast<long long>(std::ceil(t_end / dt - 1e-12));
    const int every = std::max(1, opt.sample_every);
    EnsembleStats out;
    out.R = R;
    out.seed = seed;
    for (long long s = 0; s <= nsteps; s += every) out.t.push_back(s * dt);
    out.window_start = (opt.avg_start >= 0.0) ? opt.avg_start : 0.5 * t_end;

    detail::CurveAccum acc;
    acc.init(out.t.size());
    std::vector<double> a(R, 0.0), b(R, 0.0);
    std::vector<double> curve(out.t.size());
    std::vector<int> free_sites;
    ParticleState ps;

    for (long long r = 0; r < R; ++r) {
        free_sites.assign(S0.counts.begin(), S0.counts.end());
        ps.assign(M0, detail::Particle{});
        for (int p = 0; p < M0; ++p) {
            ps[p].gen = rng::stream_for(seed, r, p);
            ps[p].x = grid.L * ps[p].gen.uniform01();
            ps[p].threshold = ps[p].gen.exponential(1.0);
        }
        int bound_count = 0;
        size_t si = 0;
        long long wn = 0;
        double wsum = 0.0, wsum2 = 0.0;
        auto record = [&](long long step) {
            if (step % every) return;
            curve[si++] = bound_count;
            if (step * dt >= out.window_start) {
                ++wn;
                wsum += bound_count;
                wsum2 += static_cast<double>(bound_count) * bound_count;
            }
        };
        record(0);
        for (long long s = 1; s <= nsteps; ++s) {
            for (auto& p : ps) {
                if (!p.alive) continue;
                if (!p.bound) {
                    p.x += detail::em_increment(p.gen, D, dt, opt.wiener_substeps);
                    while (p.x < 0.0 || p.x > grid.L) {
                        if (p.x < 0.0) {
                            if (bc.left == core::Boundary::Reflecting) {
                                p.x = -p.x;
                            } else {
                                p.alive = false;
                                break;
                            }
                        } else {
                            if (bc.right == core::Boundary::Reflecting) {
                                p.x = 2.0 * grid.L - p.x;
                            } else {
                                p.alive = false;
                                break;
                            }
                        }
                    }
                    if (!p.alive) continue;
                    if (rates.k1 > 0.0) {
                        const int cell = grid.cell_of(p.x);
                        const int s_free = free_sites[cell];
                        if (s_free > 0) {
                            p.hazard += rates.k1 * s_free * dt;
                            if (p.hazard >= p.threshold) {
                                p.bound = true;
                                p.bound_cell = cell;
                                --free_sites[cell];
                                ++bound_count;
                                p.hazard = 0.0;
                                p.threshold = p.gen.exponential(1.0);
                            }
                        }
                    }
                } else {
                    p.hazard += rates.kminus1 * dt;
                    if (p.hazard >= p.threshold) {
                        p.bound = false;
                        ++free_sites[p.bound_cell];
                        p.bound_cell = -1;
                        --bound_count;
                        p.hazard = 0.0;
                        p.threshold = p.gen.exponential(1.0);
                    }
                }
            }
            record(s);
        }
        acc.add(curve);
        a[r] = wn ? wsum / wn : 0.0;
        b[r] = wn ? wsum2 / wn : 0.0;
    }
    acc.finalize(out);
    detail::steady_from_replicas(out, a, b);
    return out;
}

// --------------------------------------------------------------------------
// Boundary binding: S0_boundary sites at the left wall.  A particle whose
// step crosses the wall commits to binding with the half-step flux rule
// P = k1 * (free sites) * sqrt(pi dt / D), otherwise it reflects; unbinding
// releases at the wall.

struct BoundaryBindingStats {
    EnsembleStats bound;     // open-channel (bound-site) count
    EnsembleStats interior;  // freely diffusing count
};

inline BoundaryBindingStats simulate_boundary_binding(const core::Grid1D& grid, double D,
                                                      const core::ReactionRates& rates,
                                                      int S0_boundary, int M0, double t_end,
                                                      double dt, long long R, std::uint64_t seed,
                                                      const SimOptions& opt = {}) {
    core::validate(grid);
    core::validate(rates);
    core::require(S0_boundary >= 0 && M0 >= 1 && t_end > 0.0 && dt > 0.0 && R >= 1,
                  "bad run parameters");
    core::require(D > 0.0, "diffusivity must be positive");
    const double commit_scale = rates.k1 * std::sqrt(std::numbers::pi * dt / D);
    core::require(commit_scale * std::max(S0_boundary, 1) <= 1.0,
                  "time step too coarse for the boundary reaction");

    const long long nsteps = static_cast<long long>(std::ceil(t_end / dt - 1e-12));
    const int every = std::max(1, opt.sample_every);
    BoundaryBindingStats out;
    for (auto* e : {&out.bound, &out.interior}) {
        e->R = R;
        e->seed = seed;
        for (long long s = 0; s <= nsteps; s += every) e->t.push_back(s * dt);
        e->window_start = (opt.avg_start >= 0.0) ? opt.avg_start : 0.5 * t_end;
    }

    detail::CurveAccum accb, acci;
    accb.init(out.bound.t.size());
    acci.init(out.bound.t.size());
    std::vector<double> ab(R, 0.0), bb(R, 0.0), ai(R, 0.0), bi(R, 0.0);
    std::vector<double> curveb(out.bound.t.size()), curvei(out.bound.t.size());
    ParticleState ps;

    for (long long r = 0; r < R; ++r) {
        int free_sites = S0_boundary;
        ps.assign(M0, detail::Particle{});
        for (int p = 0; p < M0; ++p) {
            ps[p].gen = rng::stream_for(seed, r, p);
            ps[p].x = grid.L * ps[p].gen.uniform01();
            ps[p].threshold = ps[p].gen.exponential(1.0);
        }
        int bound_count = 0;
        size_t si = 0;
        long long wn = 0;
        double wsb = 0.0, wsb2 = 0.0, wsi = 0.0, wsi2 = 0.0;
        auto record = [&](long long step) {
            if (step % every) return;
            const int interior = M0 - bound_count;
            curveb[si] = bound_count;
            curvei[si] = interior;
            ++si;
            if (step * dt >= out.bound.window_start) {
                ++wn;
                wsb += bound_count;
                wsb2 += static_cast<double>(bound_count) * bound_count;
                wsi += interior;
                wsi2 += static_cast<double>(interior) * interior;
            }
        };
        record(0);
        for (long long s = 1; s <= nsteps; ++s) {
            for (auto& p : ps) {
                if (p.bound) {
                    p.hazard += rates.kminus1 * dt;
                    if (p.hazard >= p.threshold) {
                        p.bound = false;
                        ++free_sites;
                        --bound_count;
                        p.x = 0.0;
                        p.hazard = 0.0;
                        p.threshold = p.gen.exponential(1.0);
                    }
                    continue;
                }
                p.x += detail::em_increment(p.gen, D, dt, opt.wiener_substeps);
                while (p.x < 0.0 || p.x > grid.L) {
                    if (p.x < 0.0) {
                        if (free_sites > 0 && p.gen.uniform01() < commit_scale * free_sites) {
                            p.bound = true;
                            p.x = 0.0;
                            --free_sites;
                            ++bound_count;
                            p.hazard = 0.0;
                            p.threshold = p.gen.exponential(1.0);
                            break;
                        }
                        p.x = -p.x;
                    } else {
                        p.x = 2.0 * grid.L - p.x;
                    }
                }
            }
            record(s);
        }
        accb.add(curveb);
        acci.add(curvei);
        ab[r] = wn ? wsb / wn : 0.0;
        bb[r] = wn ? wsb2 / wn : 0.0;
        ai[r] = wn ? wsi / wn : 0.0;
        bi[r] = wn ? wsi2 / wn : 0.0;
    }
    accb.finalize(out.bound);
    acci.finalize(out.interior);
    detail::steady_from_replicas(out.bound, ab, bb);
    detail::steady_from_replicas(out.interior, ai, bi);
    return out;
}

// --------------------------------------------------------------------------
// Push-pull particles: one initial particle plus a Poisson(gamma) injection
// stream; the point sink k1*delta(x - x1) is realized as a kill rate spread
// over the window [x1-h, x1+h] clipped to [0, L], with the rate set to
// k1 / |window| so the integrated killing strength is k1 regardless of
// clipping (at x1 = 0 the folded density doubles there, which this matches).

inline EnsembleStats simulate_pushpull(const renewal::PushPullParams& pp, double h, double t_end,
                                       double dt, long long R, std::uint64_t seed,
                                       const SimOptions& opt = {}) {
    renewal::validate(pp);
    const double L = pp.interval.L, D = pp.interval.D;
    core::require(h > 0.0 && h < 0.5 * L, "sink half-width must be in (0, L/2)");
    core::require(t_end > 0.0 && dt > 0.0 && R >= 1, "bad run parameters");
    core::require(dt <= h * h / (2.0 * D) * (1.0 + 1e-12),
                  "time step too coarse for the sink window (need dt <= h^2/(2D))");

    const double w_lo = std::max(0.0, pp.x1 - h);
    const double w_hi = std::min(L, pp.x1 + h);
    const double kill_rate = (pp.k1 > 0.0) ? pp.k1 / (w_hi - w_lo) : 0.0;

    const long long nsteps = static_cast<long long>(std::ceil(t_end / dt - 1e-12));
    const int every = std::max(1, opt.sample_every);
    EnsembleStats out;
    out.R = R;
    out.seed = seed;
    for (long long s = 0; s <= nsteps; s += every) out.t.push_back(s * dt);
    out.window_start = (opt.avg_start >= 0.0) ? opt.avg_start : 0.5 * t_end;

    detail::CurveAccum acc;
    acc.init(out.t.size());
    std::vector<double> a(R, 0.0), b(R, 0.0);
    std::vector<double> curve(out.t.size());
    ParticleState ps;

    for (long long r = 0; r < R; ++r) {
        rng::CounterRng rr = rng::stream_for(seed, r);
        ps.clear();
        std::uint64_t pidx = 0;
        auto spawn = [&]() {
            detail::Particle p;
            p.gen = rng::stream_for(seed, r, pidx++);
            p.threshold = p.gen.exponential(1.0);
            p.x = (pp.injection == renewal::Injection::Uniform) ? L * p.gen.uniform01() : pp.y;
            ps.push_back(p);
        };
        spawn();  // the initial particle
        double next_inject = (pp.gamma > 0.0) ? rr.exponential(pp.gamma) : kInf;
        size_t si = 0;
        long long wn = 0;
        double wsum = 0.0, wsum2 = 0.0;
        auto record = [&](long long step) {
            if (step % every) return;
            const double n = static_cast<double>(ps.size());
            curve[si++] = n;
            if (step * dt >= out.window_start) {
                ++wn;
                wsum += n;
                wsum2 += n * n;
            }
        };
        record(0);
        for (long long s = 1; s <= nsteps; ++s) {
            const double tnew = s * dt;
            while (next_inject < tnew) {
                spawn();
                next_inject += rr.exponential(pp.gamma);
            }
            for (size_t i = 0; i < ps.size();) {
                auto& p = ps[i];
                p.x = detail::fold(p.x + detail::em_increment(p.gen, D, dt, opt.wiener_substeps),
                                   L);
                if (kill_rate > 0.0 && p.x >= w_lo && p.x <= w_hi) {
                    p.hazard += kill_rate * dt;
                    if (p.hazard >= p.threshold) {
                        ps[i] = ps.back();
                        ps.pop_back();
                        continue;
                    }
                }
                ++i;
            }
            record(s);
        }
        acc.add(curve);
        a[r] = wn ? wsum / wn : 0.0;
        b[r] = wn ? wsum2 / wn : 0.0;
    }
    acc.finalize(out);
    detail::steady_from_replicas(out, a, b);
    return out;
}

// --------------------------------------------------------------------------
// Single-particle survival under the same sink; empirical curve, binomial
// errors, per-replica death times (for transform checks), and a log-slope
// fit over the last decade of the grid.

struct SurvivalEstimate {
    std::vector<double> t;
    std::vector<double> S;
    std::vector<double> se;
    std::vector<double> death_times;  // infinity if the particle survived
    double alpha_hat = 0.0;
    bool alpha_valid = false;
    long long survivors_end = 0;
};

inline SurvivalEstimate estimate_survival(const renewal::PushPullParams& pp,
                                          const std::vector<double>& t_grid, long long R,
                                          std::uint64_t seed, double dt = 0.0, double h = 0.0) {
    renewal::validate(pp);
    core::require(!t_grid.empty() && R >= 1, "bad run parameters");
    for (size_t j = 1; j < t_grid.size(); ++j)
        core::require(t_grid[j] > t_grid[j - 1], "time grid must increase");
    const double L = pp.interval.L, D = pp.interval.D;
    if (h <= 0.0) h = 0.01 * L;
    if (dt <= 0.0) dt = 0.5 * h * h / (2.0 * D);
    core::require(dt <= h * h / (2.0 * D) * (1.0 + 1e-12),
                  "time step too coarse for the sink window (need dt <= h^2/(2D))");
    const double w_lo = std::max(0.0, pp.x1 - h);
    const double w_hi = std::min(L, pp.x1 + h);
    const double kill_rate = (pp.k1 > 0.0) ? pp.k1 / (w_hi - w_lo) : 0.0;

    SurvivalEstimate out;
    out.t = t_grid;
    out.death_times.assign(R, kInf);
    std::vector<long long> alive_at(t_grid.size(), 0);
    const double t_max = t_grid.back();

    for (long long r = 0; r < R; ++r) {
        detail::Particle p;
        p.gen = rng::stream_for(seed, r, 0);
        p.threshold = p.gen.exponential(1.0);
        p.x = (pp.injection == renewal::Injection::Uniform) ? L * p.gen.uniform01() : pp.y;
        double t = 0.0;
        size_t j = 0;
        while (j < t_grid.size() && t_grid[j] <= 0.0) {
            ++alive_at[j];
            ++j;
        }
        while (t < t_max && j < t_grid.size()) {
            p.x = detail::fold(p.x + detail::em_increment(p.gen, D, dt, 1), L);
            t += dt;
            bool dead = false;
            if (kill_rate > 0.0 && p.x >= w_lo && p.x <= w_hi) {
                p.hazard += kill_rate * dt;
                if (p.hazard >= p.threshold) {
                    dead = true;
                    out.death_times[r] = t;
                }
            }
            while (j < t_grid.size() && t_grid[j] <= t + 1e-12 * t_max) {
                if (!dead) ++alive_at[j];
                ++j;
            }
            if (dead) break;
        }
    }

    out.S.resize(t_grid.size());
    out.se.resize(t_grid.size());
    for (size_t j = 0; j < t_grid.size(); ++j) {
        const double s = static_cast<double>(alive_at[j]) / R;
        out.S[j] = s;
        out.se[j] = std::sqrt(std::max(s * (1.0 - s), 0.0) / R);
    }
    out.survivors_end = alive_at.back();

    // log-slope over the last decade of the grid
    const double t_lo = t_max / 10.0;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    long long npts = 0;
    for (size_t j = 0; j < t_grid.size(); ++j) {
        if (t_grid[j] < t_lo || out.S[j] <= 0.0) continue;
        const double x = t_grid[j], y = std::log(out.S[j]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        ++npts;
    }
    if (npts >= 3 && out.survivors_end >= 25) {
        const double denom = npts * sxx - sx * sx;
        if (denom > 0.0) {
            out.alpha_hat = -(npts * sxy - sx * sy) / denom;
            out.alpha_valid = true;
        }
    }
    return out;
}

// --------------------------------------------------------------------------
// Exact-jump simulation of the free-channel birth-death chain.

struct JumpProcessState {
    int state = 0;
    double clock = 0.0;
    std::vector<double> occupancy;  // time spent per state; sums to clock
};

struct OccupancyStats {
    int k_min = 0;
    std::vector<double> mean;  // occupancy fraction per state
    std::vector<double> se;
    double mean_open = 0.0;
    double var_open = 0.0;
    long long R = 0;
    std::uint64_t seed = 0;
};

namespace detail {

inline void occupancy_moments(OccupancyStats& o, int S) {
    o.mean_open = 0.0;
    double second = 0.0;
    for (size_t j = 0; j < o.mean.size(); ++j) {
        const double n_open = S - (o.k_min + static_cast<double>(j));
        o.mean_open += n_open * o.mean[j];
        second += n_open * n_open * o.mean[j];
    }
    o.var_open = second - o.mean_open * o.mean_open;
}

}  // namespace detail

// R independent trajectories on [0, t_end], each time-averaged after a 20%
// burn-in; across-replica standard errors.
inline OccupancyStats gillespie_birth_death(const markov::BirthDeathSpec& spec, double t_end,
                                            long long R, std::uint64_t seed) {
    markov::validate(spec);
    core::require(t_end > 0.0 && R >= 1, "bad run parameters");
    const int k_min = spec.k_min();
    const int n = spec.S - k_min + 1;
    const double burn = 0.2 * t_end;

    OccupancyStats out;
    out.k_min = k_min;
    out.R = R;
    out.seed = seed;
    out.mean.assign(n, 0.0);
    out.se.assign(n, 0.0);
    std::vector<double> m2(n, 0.0);
    std::vector<double> frac(n);

    for (long long r = 0; r < R; ++r) {
        rng::CounterRng g = rng::stream_for(seed, r);
        JumpProcessState jp;
        jp.state = spec.S;
        jp.occupancy.assign(n, 0.0);
        double t = 0.0;
        while (t < t_end) {
            const int k = jp.state;
            const double lam = markov::binding_rate(k, spec);
            const double mu = spec.kminus1 * (spec.S - k);
            const double total = lam + mu;
            double t_next = (total > 0.0) ? t + g.exponential(total) : t_end;
            const double seg_end = std::min(t_next, t_end);
            const double lo = std::max(t, burn);
            if (seg_end > lo) jp.occupancy[k - k_min] += seg_end - lo;
            if (total <= 0.0) break;
            if (t_next < t_end && g.uniform01() * total < lam)
                jp.state = k - 1;
            else if (t_next < t_end)
                jp.state = k + 1;
            t = t_next;
        }
        const double span = t_end - burn;
        for (int j = 0; j < n; ++j) frac[j] = jp.occupancy[j] / span;
        for (int j = 0; j < n; ++j) {
            const double d = frac[j] - out.mean[j];
            out.mean[j] += d / (r + 1);
            m2[j] += d * (frac[j] - out.mean[j]);
        }
    }
    if (R > 1)
        for (int j = 0; j < n; ++j) out.se[j] = std::sqrt(m2[j] / (R - 1) / R);
    detail::occupancy_moments(out, spec.S);
    return out;
}

// Single long trajectory controlled by event count: 20% burn-in, remaining
// events split into batches, batch-mean standard errors.
inline OccupancyStats gillespie_occupancy_events(const markov::BirthDeathSpec& spec,
                                                 long long n_events, std::uint64_t seed,
                                                 int n_batches = 20) {
    markov::validate(spec);
    core::require(n_events >= 100 && n_batches >= 2, "bad run parameters");
    const int k_min = spec.k_min();
    const int n = spec.S - k_min + 1;
    rng::CounterRng g = rng::stream_for(seed, 0);

    OccupancyStats out;
    out.k_min = k_min;
    out.R = n_batches;
    out.seed = seed;
    out.mean.assign(n, 0.0);
    out.se.assign(n, 0.0);

    int state = spec.S;
    const long long burn_events = n_events / 5;
    const long long per_batch = (n_events - burn_events) / n_batches;
    std::vector<std::vector<double>> batch(n_batches, std::vector<double>(n, 0.0));
    std::vector<double> batch_time(n_batches, 0.0);

    for (long long e = 0; e < n_events; ++e) {
        const double lam = markov::binding_rate(state, spec);
        const double mu = spec.kminus1 * (spec.S - state);
        const double total = lam + mu;
        if (total <= 0.0) {
            // absorbing state: occupancy concentrates there with no error
            std::fill(out.mean.begin(), out.mean.end(), 0.0);
            out.mean[state - k_min] = 1.0;
            detail::occupancy_moments(out, spec.S);
            return out;
        }
        const double wait = g.exponential(total);
        if (e >= burn_events) {
            const int bidx = std::min<long long>((e - burn_events) / per_batch, n_batches - 1);
            batch[bidx][state - k_min] += wait;
            batch_time[bidx] += wait;
        }
        state += (g.uniform01() * total < lam) ? -1 : 1;
    }
    std::vector<double> m2(n, 0.0);
    for (int bi = 0; bi < n_batches; ++bi) {
        for (int j = 0; j < n; ++j) {
            const double f = batch[bi][j] / batch_time[bi];
            const double d = f - out.mean[j];
            out.mean[j] += d / (bi + 1);
            m2[j] += d * (f - out.mean[j]);
        }
    }
    for (int j = 0; j < n; ++j) out.se[j] = std::sqrt(m2[j] / (n_batches - 1) / n_batches);
    detail::occupancy_moments(out, spec.S);
    return out;
}

// --------------------------------------------------------------------------
// Exact-jump Michaelis-Menten kinetics; product-count curve on a uniform
// sample grid with across-replica errors.

struct MMCurveStats {
    std::vector<double> t;
    std::vector<double> mean;
    std::vector<double> var;
    std::vector<double> se;
    std::vector<int> final_products;  // per replica
    long long R = 0;
    std::uint64_t seed = 0;
};

inline MMCurveStats gillespie_mm(const markov::MMSpec& spec, double t_end, long long R,
                                 std::uint64_t seed, int n_samples = 101) {
    markov::validate(spec);
    core::require(t_end > 0.0 && R >= 1 && n_samples >= 2, "bad run parameters");
    MMCurveStats out;
    out.R = R;
    out.seed = seed;
    out.t.resize(n_samples);
    for (int j = 0; j < n_samples; ++j) out.t[j] = t_end * j / (n_samples - 1);
    out.final_products.resize(R);

    detail::CurveAccum acc;
    acc.init(n_samples);
    std::vector<double> curve(n_samples);

    for (long long r = 0; r < R; ++r) {
        rng::CounterRng g = rng::stream_for(seed, r);
        int k = 0, q = 0;
        double t = 0.0;
        int j = 0;
        while (true) {
            const double bind = std::max(spec.M0 - k - q, 0) * (spec.E0 - q) / spec.tau1;
            const double unbind = spec.kminus1 * q;
            const double cat = spec.k2 * q;
            const double total = bind + unbind + cat;
            const double t_next = (total > 0.0) ? t + g.exponential(total) : kInf;
            while (j < n_samples && out.t[j] <= std::min(t_next, t_end) + 1e-15) {
                curve[j++] = k;
            }
            if (t_next >= t_end || j >= n_samples) break;
            const double u = g.uniform01() * total;
            if (u < bind) {
                ++q;
            } else if (u < bind + unbind) {
                --q;
            } else {
                --q;
                ++k;
            }
            t = t_next;
        }
        while (j < n_samples) curve[j++] = k;
        out.final_products[r] = k;
        acc.add(curve);
    }
    out.mean = acc.mean;
    out.var.assign(n_samples, 0.0);
    out.se.assign(n_samples, 0.0);
    if (R > 1)
        for (int j = 0; j < n_samples; ++j) {
            out.var[j] = acc.M2[j] / (R - 1);
            out.se[j] = std::sqrt(out.var[j] / R);
        }
    return out;
}

}  // namespace microkin::mc
