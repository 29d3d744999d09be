#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "microkin/pde_master.hpp"
#include "oracles.hpp"

using namespace microkin;

namespace {

core::ReactionRates rates(double k1, double km1) {
    core::ReactionRates r;
    r.k1 = k1;
    r.kminus1 = km1;
    return r;
}

}  // namespace

TEST_CASE("two-state solve conserves mass and stays nonnegative") {
    core::Grid1D g{1.0, 48};
    auto S0 = core::uniform_sites(g, 1);
    auto m0 = core::cosine_initial(g);
    pde::SolveOptions opt;
    opt.t_end = 0.5;
    opt.dt = 5e-4;
    opt.store_every = 100;
    auto series = pde::solve_two_state(g, 1.0, rates(1.0, 1.0), S0, m0, {}, 128.0, opt);
    REQUIRE(series.max_mass_drift < 1e-12);
    for (const auto& f : series.snapshots) {
        REQUIRE(f.mass() == Catch::Approx(1.0).margin(1e-10));
        for (const auto& cell : f.p)
            for (double v : cell) REQUIRE(v >= -1e-12);
    }
}

TEST_CASE("two-state steady state matches the closed form") {
    core::Grid1D g{1.0, 64};
    auto S0 = core::uniform_sites(g, 1);
    auto m0 = core::cosine_initial(g);
    const double M0 = 512.0;
    pde::SolveOptions opt;
    opt.t_end = 8.0;
    opt.dt = 2e-4;
    auto series = pde::solve_two_state(g, 1.0, rates(1.0, 1.0), S0, m0, {}, M0, opt);
    const auto& f = series.final_state();
    for (int i = 0; i < g.n; ++i) {
        const double closed = pde::steady_cM(g.center(i), rates(1.0, 1.0), S0, M0, g.L);
        REQUIRE(M0 * f.p[i][0] == Catch::Approx(closed).epsilon(1e-8));
    }
    REQUIRE(pde::steady_residual_norm(f, 1.0, rates(1.0, 1.0), S0, M0) < 1e-6);
}

TEST_CASE("uniform steady state is an exact fixed point of the splitting") {
    core::Grid1D g{1.0, 32};
    auto S0 = core::uniform_sites(g, 1);
    const double M0 = 100.0;
    const auto r = rates(0.5, 2.0);
    // normalized free density from the closed form, bound = rest
    const double u = pde::steady_cM(0.5, r, S0, M0, g.L) / M0;
    core::InitialDistribution m0;
    m0.density.assign(g.n, 1.0 / g.L);
    pde::SolveOptions opt;
    opt.t_end = 0.2;
    opt.dt = 1e-3;
    auto series = pde::solve_two_state(g, 1.0, r, S0, m0, {}, M0, opt);
    // run from uniform IC long enough to land on the fixed point, then check
    // a restarted run does not move
    pde::SolveOptions opt2 = opt;
    opt2.t_end = 5.0;
    auto settled = pde::solve_two_state(g, 1.0, r, S0, m0, {}, M0, opt2).final_state();
    for (int i = 0; i < g.n; ++i)
        REQUIRE(settled.p[i][0] == Catch::Approx(u).epsilon(1e-9));
    REQUIRE(series.max_mass_drift < 1e-13);
}

TEST_CASE("ladder with single-site cells reproduces the two-state solution") {
    core::Grid1D g{1.0, 32};
    auto S0 = core::uniform_sites(g, 1);
    auto m0 = core::cosine_initial(g);
    pde::SolveOptions opt;
    opt.t_end = 1.0;
    opt.dt = 1e-3;
    opt.store_every = 200;
    auto a = pde::solve_two_state(g, 0.5, rates(2.0, 1.0), S0, m0, {}, 64.0, opt);
    auto b = pde::solve_ladder(g, 0.5, rates(2.0, 1.0), S0, m0, {}, 64.0, opt);
    REQUIRE(a.snapshots.size() == b.snapshots.size());
    for (size_t s = 0; s < a.snapshots.size(); ++s) {
        const auto ma = pde::moments_bound(a.snapshots[s], S0);
        const auto mb = pde::moments_bound(b.snapshots[s], S0);
        REQUIRE(ma.mean == Catch::Approx(mb.mean).margin(1e-10));
        REQUIRE(ma.fraction == Catch::Approx(mb.fraction).margin(1e-10));
    }
}

TEST_CASE("ladder confinement and conservation on a partial support") {
    core::Grid1D g{2.0, 32};
    auto S0 = core::sites_on_interval(g, 0.5, 1.5, 3);
    auto m0 = core::uniform_initial(g);
    pde::SolveOptions opt;
    opt.t_end = 0.5;
    opt.dt = 1e-3;
    auto series = pde::solve_ladder(g, 1.0, rates(1.0, 0.5), S0, m0, {}, 32.0, opt);
    const auto& f = series.final_state();
    for (int i = 0; i < g.n; ++i) {
        REQUIRE(f.levels(i) == S0.counts[i] + 1);
        double bound_here = 0.0;
        for (int b = 1; b < f.levels(i); ++b) bound_here += f.p[i][b];
        if (S0.counts[i] == 0) REQUIRE(bound_here == 0.0);
    }
    REQUIRE(series.max_mass_drift < 1e-12);
}

TEST_CASE("moments of a hand-built field") {
    pde::SpatialField f;
    f.grid = core::Grid1D{2.0, 2};
    f.p = {{0.3, 0.5, 0.2}, {1.0}};
    core::SiteDensity S0{{2, 0}};
    const auto m = pde::moments_bound(f, S0);
    // phi_0 = 0.5/2 + 2*0.2/2 = 0.45, site density 2/dx = 2
    REQUIRE(m.mean == Catch::Approx(0.9).margin(1e-14));
    REQUIRE(m.second == Catch::Approx(1.8).margin(1e-14));
    REQUIRE(m.variance == Catch::Approx(1.8 - 0.81).margin(1e-14));
    REQUIRE(m.fraction == Catch::Approx(0.45).margin(1e-14));
}

TEST_CASE("occupancy closed forms") {
    REQUIRE(pde::fraction_bound(0.0) == 1.0);
    REQUIRE(pde::fraction_bound(2.0) == Catch::Approx(0.5).margin(1e-15));
    REQUIRE(pde::fraction_bound(6.0) == Catch::Approx(1.0 / 3.0).margin(1e-15));
    SECTION("monotone decreasing with the asymptote") {
        double prev = 1.0;
        for (double rho = 0.25; rho <= 1e6; rho *= 2.0) {
            const double v = pde::fraction_bound(rho);
            REQUIRE(v < prev);
            prev = v;
        }
        REQUIRE(pde::fraction_bound(1e8) / pde::fraction_bound_asymptote(1e8) ==
                Catch::Approx(1.0).margin(2e-4));
    }
    SECTION("variance peak is 1/4 at rho = 2, leftmost argmax on the grid") {
        REQUIRE(pde::variance_bound(2.0) == Catch::Approx(0.25).margin(1e-15));
        std::vector<double> curve;
        std::vector<double> rho_grid;
        for (double rho = 0.0; rho <= 40.0; rho += 0.05) {
            rho_grid.push_back(rho);
            curve.push_back(pde::variance_bound(rho));
            REQUIRE(curve.back() <= 0.25 + 1e-15);
        }
        size_t best = 0;
        for (size_t i = 1; i < curve.size(); ++i)
            if (curve[i] > curve[best]) best = i;  // strict: leftmost on plateaus
        REQUIRE(std::abs(rho_grid[best] - 2.0) <= 0.05 + 1e-12);
        REQUIRE(oracles::unimodal(curve));
    }
}

TEST_CASE("absorbing wall drains mass") {
    core::Grid1D g{1.0, 32};
    auto S0 = core::uniform_sites(g, 0);  // pure diffusion
    auto m0 = core::uniform_initial(g);
    pde::SolveOptions opt;
    opt.t_end = 0.3;
    opt.dt = 1e-3;
    opt.store_every = 50;
    core::BoundaryPair bc{core::Boundary::Absorbing, core::Boundary::Reflecting};
    auto series = pde::solve_two_state(g, 1.0, rates(0.0, 0.0), S0, m0, bc, 8.0, opt);
    double prev = 1.0;
    for (size_t s = 1; s < series.snapshots.size(); ++s) {
        const double m = series.snapshots[s].mass();
        REQUIRE(m < prev);
        prev = m;
    }
    REQUIRE(prev < 0.6);
}

TEST_CASE("conservation tolerance violations are reported") {
    core::Grid1D g{1.0, 16};
    auto S0 = core::uniform_sites(g, 1);
    auto m0 = core::cosine_initial(g);
    pde::SolveOptions opt;
    opt.t_end = 0.1;
    opt.dt = 1e-3;
    opt.conservation_tol = 0.0;  // even round-off must trip it
    REQUIRE_THROWS_WITH(pde::solve_two_state(g, 1.0, rates(1.0, 1.0), S0, m0, {}, 64.0, opt),
                        Catch::Matchers::ContainsSubstring("conservation drift"));
}

TEST_CASE("boundary binding: no binding leaves the wall empty") {
    core::Grid1D g{2.0, 32};
    auto m0 = core::uniform_initial(g);
    pde::SolveOptions opt;
    opt.t_end = 0.5;
    opt.dt = 1e-3;
    auto series = pde::solve_boundary_binding(g, 1.0, rates(0.0, 1.0), 4, m0, 16.0, opt);
    const auto& st = series.final_state();
    REQUIRE(st.S_bound == 0.0);
    REQUIRE(st.P[0] == Catch::Approx(1.0).margin(1e-12));
    REQUIRE(st.mean_bound() == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("boundary binding: conservation and the self-consistent steady state") {
    core::Grid1D g{4.0, 64};
    auto m0 = core::uniform_initial(g);
    const int S0b = 4;
    const double M0 = 32.0;
    const auto r = rates(0.5, 1.0);
    pde::SolveOptions opt;
    opt.t_end = 25.0;
    opt.dt = 5e-4;
    opt.store_every = 5000;
    auto series = pde::solve_boundary_binding(g, 1.0, r, S0b, m0, M0, opt);
    REQUIRE(series.max_conservation_drift < 1e-8);
    REQUIRE(series.max_prob_leak < 1e-8);
    const auto& st = series.final_state();
    REQUIRE(st.S_bound >= 0.0);
    REQUIRE(st.S_bound <= S0b);

    const double sb_star = oracles::wall_steady_bound(S0b, static_cast<int>(M0), g.L, r.k1,
                                                      r.kminus1);
    REQUIRE(st.S_bound == Catch::Approx(sb_star).epsilon(1e-5));
    // steady balance against the boundary-cell density
    const double c0 = st.c[0];
    REQUIRE(st.S_bound ==
            Catch::Approx(r.k1 * c0 * S0b / (r.k1 * c0 + r.kminus1)).epsilon(1e-5));

    // the ladder's birth rate is state-independent, so its stationary law is
    // a Poisson truncated at S0 with lambda = k1 c0 (S0 - S_bound) / kminus1
    const double lam = r.k1 * c0 * (S0b - st.S_bound) / r.kminus1;
    double z = 0.0, m1 = 0.0, m2 = 0.0, term = 1.0;
    for (int k = 0; k <= S0b; ++k) {
        if (k > 0) term *= lam / k;
        z += term;
        m1 += k * term;
        m2 += static_cast<double>(k) * k * term;
    }
    m1 /= z;
    m2 /= z;
    REQUIRE(st.mean_bound() == Catch::Approx(m1).epsilon(1e-4));
    REQUIRE(st.variance_bound() == Catch::Approx(m2 - m1 * m1).epsilon(1e-3));
}
