#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "microkin/markov_channel.hpp"
#include "microkin/montecarlo.hpp"
#include "microkin/pde_master.hpp"
#include "microkin/renewal_pushpull.hpp"
#include "oracles.hpp"

using namespace microkin;

namespace {

renewal::PushPullParams wallsink(double gamma, double k1) {
    renewal::PushPullParams p;
    p.interval = {1.0, 1.0};
    p.x1 = 0.0;
    p.injection = renewal::Injection::Uniform;
    p.gamma = gamma;
    p.k1 = k1;
    return p;
}

size_t index_of_time(const std::vector<double>& t, double value) {
    for (size_t i = 0; i < t.size(); ++i)
        if (std::abs(t[i] - value) < 1e-9) return i;
    throw std::runtime_error("sample time not on the grid");
}

}  // namespace

TEST_CASE("fixed seed reproduces runs bitwise") {
    auto pp = wallsink(1.0, 1.0);
    const auto a = mc::simulate_pushpull(pp, 0.05, 1.0, 1e-3, 20, 42);
    const auto b = mc::simulate_pushpull(pp, 0.05, 1.0, 1e-3, 20, 42);
    REQUIRE(a.mean == b.mean);
    REQUIRE(a.replica_values == b.replica_values);
    REQUIRE(a.steady_mean == b.steady_mean);
    const auto c = mc::simulate_pushpull(pp, 0.05, 1.0, 1e-3, 20, 43);
    REQUIRE(a.mean != c.mean);
}

TEST_CASE("volume binding with no forward rate stays unbound") {
    core::Grid1D grid{1.0, 8};
    core::ReactionRates rates{0.0, 1.0, 0.0};
    const auto S0 = core::uniform_sites(grid, 2);
    const auto st = mc::simulate_model1(grid, 1.0, rates, S0, 4,
                                        {core::Boundary::Reflecting, core::Boundary::Reflecting},
                                        0.1, 1e-3, 3, 7);
    for (double v : st.mean) REQUIRE(v == 0.0);
    REQUIRE(st.steady_mean == 0.0);
}

TEST_CASE("volume binding reproduces the occupancy closed form") {
    // symmetric configuration (one site per unit cell, M0 = n): the
    // mean-field fixed point is rho*phi^2 = 1 - phi in the free fraction phi
    const int n = 200;
    core::Grid1D grid{static_cast<double>(n), n};
    const auto S0 = core::uniform_sites(grid, 1);
    const core::BoundaryPair bc{core::Boundary::Reflecting, core::Boundary::Reflecting};
    for (double rho : {1.0, 4.0}) {
        core::ReactionRates rates{rho, 1.0, 0.0};
        const auto st = mc::simulate_model1(grid, 5.0, rates, S0, n, bc, 30.0, 0.02, 10,
                                            2026001);
        const double phi_mc = (n - st.steady_mean) / n;
        INFO("rho=" << rho << " phi_mc=" << phi_mc);
        REQUIRE(phi_mc == Catch::Approx(pde::fraction_bound(rho)).epsilon(0.03));
    }
}

TEST_CASE("particle ensemble agrees with the occupancy-ladder solver") {
    const int n = 32;
    core::Grid1D grid{static_cast<double>(n), n};
    const auto S0 = core::uniform_sites(grid, 1);
    core::ReactionRates rates{1.0, 1.0, 0.0};
    const core::BoundaryPair bc{core::Boundary::Reflecting, core::Boundary::Reflecting};

    pde::SolveOptions opt;
    opt.t_end = 40.0;
    opt.dt = 1e-3;
    const auto sol = pde::solve_ladder(grid, 5.0, rates, S0, core::uniform_initial(grid), bc,
                                       static_cast<double>(n), opt);
    const double pde_bound = n * sol.final_state().level_mass(1);

    const auto st = mc::simulate_model1(grid, 5.0, rates, S0, n, bc, 30.0, 0.02, 150, 90210);
    INFO("pde=" << pde_bound << " mc=" << st.steady_mean << " se=" << st.steady_mean_se);
    REQUIRE(std::abs(st.steady_mean - pde_bound) <=
            3.0 * st.steady_mean_se + 0.05 * pde_bound);
}

TEST_CASE("wall binding matches the boundary solver and the balance law") {
    core::Grid1D grid{4.0, 32};
    core::ReactionRates rates{0.5, 1.0, 0.0};
    const int S0b = 4, M0 = 32;

    pde::SolveOptions opt;
    opt.t_end = 25.0;
    opt.dt = 5e-4;
    const auto sol =
        pde::solve_boundary_binding(grid, 1.0, rates, S0b, core::uniform_initial(grid),
                                    static_cast<double>(M0), opt);
    const double sb = sol.final_state().S_bound;
    REQUIRE(sb == Catch::Approx(oracles::wall_steady_bound(S0b, M0, grid.L, rates.k1,
                                                           rates.kminus1))
                      .epsilon(1e-4));

    const auto st =
        mc::simulate_boundary_binding(grid, 1.0, rates, S0b, M0, 25.0, 2e-3, 100, 5150);
    INFO("pde=" << sb << " mc=" << st.bound.steady_mean << " se=" << st.bound.steady_mean_se);
    REQUIRE(std::abs(st.bound.steady_mean - sb) <=
            3.0 * st.bound.steady_mean_se + 0.04 * sb);
    // interior + bound is the fixed total
    for (size_t i = 0; i < st.bound.mean.size(); ++i)
        REQUIRE(st.bound.mean[i] + st.interior.mean[i] == Catch::Approx(M0).margin(1e-9));
}

TEST_CASE("push-pull count with no sink grows linearly") {
    auto pp = wallsink(1.0, 0.0);
    const auto st = mc::simulate_pushpull(pp, 0.05, 5.0, 1e-3, 300, 777);
    for (double tq : {1.0, 3.0, 5.0}) {
        const size_t i = index_of_time(st.t, tq);
        REQUIRE(std::abs(st.mean[i] - (1.0 + pp.gamma * tq)) <= 3.0 * st.se[i] + 1e-9);
    }
}

TEST_CASE("push-pull sink-width refinement is consistent") {
    auto pp = wallsink(1.0, 1.0);
    const auto wide = mc::simulate_pushpull(pp, 0.05, 6.0, 2.5e-4, 400, 1234);
    const auto narrow = mc::simulate_pushpull(pp, 0.025, 6.0, 2.5e-4, 400, 4321);
    const double se = std::hypot(wide.steady_mean_se, narrow.steady_mean_se);
    INFO("wide=" << wide.steady_mean << " narrow=" << narrow.steady_mean << " se=" << se);
    REQUIRE(std::abs(wide.steady_mean - narrow.steady_mean) <= 3.0 * se);
}

TEST_CASE("push-pull step refinement under a shared Wiener path") {
    auto pp = wallsink(1.0, 1.0);
    mc::SimOptions coarse;
    coarse.wiener_substeps = 2;
    const auto a = mc::simulate_pushpull(pp, 0.05, 5.0, 1e-3, 200, 31337, coarse);
    const auto b = mc::simulate_pushpull(pp, 0.05, 5.0, 5e-4, 200, 31337);
    INFO("dt=1e-3: " << a.steady_mean << "  dt=5e-4: " << b.steady_mean);
    REQUIRE(std::abs(a.steady_mean - b.steady_mean) <=
            3.0 * std::max(a.steady_mean_se, b.steady_mean_se));
}

TEST_CASE("survival estimator") {
    SECTION("no sink means certain survival") {
        auto pp = wallsink(0.0, 0.0);
        std::vector<double> grid{0.5, 1.0, 1.5, 2.0, 2.5, 3.0};
        const auto s = mc::estimate_survival(pp, grid, 40, 11, 1e-3, 0.05);
        for (double v : s.S) REQUIRE(v == 1.0);
        for (double v : s.se) REQUIRE(v == 0.0);
        REQUIRE(s.survivors_end == 40);
        REQUIRE(s.alpha_valid);
        REQUIRE(s.alpha_hat == 0.0);
    }
    SECTION("death times reproduce the survival transform") {
        renewal::PushPullParams pp;
        pp.interval = {renewal::kPi, 1.0};
        pp.x1 = 0.7;
        pp.injection = renewal::Injection::Point;
        pp.y = 1.9;
        pp.gamma = 0.0;
        pp.k1 = 1.3;
        const long long R = 2000;
        std::vector<double> grid;
        for (int j = 1; j <= 25; ++j) grid.push_back(j * 1.0);
        const auto s = mc::estimate_survival(pp, grid, R, 314159, 6.4e-4, 0.04);
        for (double tau : {0.5, 2.0}) {
            // E[(1 - e^{-tau T}) / tau] equals the transform of S(t)
            double acc = 0.0, acc2 = 0.0;
            for (double T : s.death_times) {
                const double w = std::isinf(T) ? 1.0 / tau : (1.0 - std::exp(-tau * T)) / tau;
                acc += w;
                acc2 += w * w;
            }
            const double est = acc / R;
            const double se = std::sqrt((acc2 / R - est * est) / (R - 1));
            const double truth = renewal::survival_laplace(tau, pp);
            INFO("tau=" << tau << " est=" << est << " truth=" << truth << " se=" << se);
            REQUIRE(std::abs(est - truth) <= 3.0 * se + 0.015 * truth);
        }
    }
}

TEST_CASE("jump simulation of the gating chain matches the stationary law") {
    markov::BirthDeathSpec spec{3, 5, 0.7, 2.0};
    const auto d = markov::stationary_dist(spec);
    SECTION("replica ensemble") {
        const auto oc = mc::gillespie_birth_death(spec, 400.0, 30, 2718);
        REQUIRE(oc.k_min == d.k_min);
        for (size_t j = 0; j < d.P.size(); ++j) {
            INFO("state " << j << ": mc=" << oc.mean[j] << " exact=" << d.P[j]
                          << " se=" << oc.se[j]);
            REQUIRE(std::abs(oc.mean[j] - d.P[j]) <= 3.0 * oc.se[j] + 1e-3);
        }
        REQUIRE(oc.mean_open == Catch::Approx(d.mean_open).epsilon(0.05));
    }
    SECTION("event-budget single trajectory") {
        markov::BirthDeathSpec spec2{4, 6, 0.5, 1.5};
        const auto d2 = markov::stationary_dist(spec2);
        const auto oc = mc::gillespie_occupancy_events(spec2, 40000, 1618);
        for (size_t j = 0; j < d2.P.size(); ++j)
            REQUIRE(std::abs(oc.mean[j] - d2.P[j]) <= 3.0 * oc.se[j] + 1e-3);
    }
    SECTION("absorbing chain concentrates with no error") {
        markov::BirthDeathSpec spec3{2, 5, 1.0, 0.0};
        const auto oc = mc::gillespie_occupancy_events(spec3, 1000, 99);
        REQUIRE(oc.mean[0] == 1.0);
        REQUIRE(oc.mean_open == Catch::Approx(2.0).margin(1e-15));
    }
}

TEST_CASE("jump simulation of enzyme kinetics matches the master equation") {
    markov::MMSpec spec{5, 2, 1.0, 1.0, 1.0};
    const auto det = markov::mm_master(spec, 8.0, 0.01);
    const auto sim = mc::gillespie_mm(spec, 8.0, 800, 171717, 41);
    for (double tq : {0.4, 2.0, 4.0, 8.0}) {
        const size_t i = index_of_time(sim.t, tq);
        const size_t j = index_of_time(det.t, tq);
        INFO("t=" << tq << " mc=" << sim.mean[i] << " exact=" << det.mean_product[j]
                  << " se=" << sim.se[i]);
        REQUIRE(std::abs(sim.mean[i] - det.mean_product[j]) <= 3.0 * sim.se[i] + 1e-6);
    }
    for (int fp : sim.final_products) REQUIRE((fp >= 0 && fp <= spec.M0));
}
