#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "microkin/markov_channel.hpp"
#include "oracles.hpp"

using namespace microkin;
using markov::BirthDeathSpec;

TEST_CASE("single channel, single agonist coin") {
    BirthDeathSpec s{1, 1, 2.0, 0.5};  // binding 1/2, unbinding 1/2
    const auto d = markov::stationary_dist(s);
    REQUIRE(d.k_min == 0);
    REQUIRE(d.P.size() == 2);
    REQUIRE(d.P[0] == Catch::Approx(0.5).margin(1e-15));
    REQUIRE(d.P[1] == Catch::Approx(0.5).margin(1e-15));
    REQUIRE(d.mean_open == Catch::Approx(0.5).margin(1e-15));
    REQUIRE(d.variance == Catch::Approx(0.25).margin(1e-15));
}

TEST_CASE("single channel occupancy is the flux ratio") {
    BirthDeathSpec s{1, 7, 0.3, 2.0};
    const double lam = markov::binding_rate(1, s);
    const auto d = markov::stationary_dist(s);
    REQUIRE(d.mean_open == Catch::Approx(lam / (lam + s.kminus1)).epsilon(1e-13));
}

TEST_CASE("stationary law satisfies detailed balance for randomized specs") {
    std::mt19937_64 gen(20260825ull);
    std::uniform_int_distribution<int> Sd(1, 10), Md(0, 15);
    std::uniform_real_distribution<double> lr(std::log(0.05), std::log(20.0));
    for (int rep = 0; rep < 12; ++rep) {
        BirthDeathSpec s{Sd(gen), Md(gen), std::exp(lr(gen)), std::exp(lr(gen))};
        INFO("S=" << s.S << " M=" << s.M << " tau1=" << s.tau1 << " kminus1=" << s.kminus1);
        const auto d = markov::stationary_dist(s);
        double sum = 0.0;
        for (double p : d.P) sum += p;
        REQUIRE(sum == Catch::Approx(1.0).margin(1e-12));
        for (int k = d.k_min + 1; k <= s.S; ++k) {
            const double down = markov::binding_rate(k, s) * d.prob_free(k);
            const double up = s.kminus1 * (s.S - (k - 1)) * d.prob_free(k - 1);
            REQUIRE(std::abs(down - up) <= 1e-10 * (down + up + 1e-300));
        }
    }
}

TEST_CASE("degenerate chains") {
    SECTION("no unbinding pins the fewest free channels") {
        BirthDeathSpec s{3, 2, 1.0, 0.0};
        const auto d = markov::stationary_dist(s);
        REQUIRE(d.k_min == 1);
        REQUIRE(d.P[0] == 1.0);
        REQUIRE(d.mean_open == Catch::Approx(2.0).margin(1e-15));
    }
    SECTION("no agonists means no gating") {
        BirthDeathSpec s{4, 0, 1.0, 3.0};
        const auto d = markov::stationary_dist(s);
        REQUIRE(d.k_min == 4);
        REQUIRE(d.P.size() == 1);
        REQUIRE(d.mean_open == 0.0);
        REQUIRE(d.variance == 0.0);
    }
}

TEST_CASE("transient master equation relaxes onto the stationary law") {
    SECTION("coin case") {
        BirthDeathSpec s{1, 1, 1.0, 1.0};
        const auto tr = markov::transient_master(s, 10.0, 0.005, 0);
        REQUIRE(tr.max_leak < 1e-10);
        REQUIRE(tr.final_dist()[0] == Catch::Approx(0.5).margin(1e-8));
        REQUIRE(tr.final_dist()[1] == Catch::Approx(0.5).margin(1e-8));
    }
    SECTION("wider chain") {
        BirthDeathSpec s{3, 5, 0.7, 2.0};
        const auto tr = markov::transient_master(s, 15.0, 0.01, 0);
        const auto d = markov::stationary_dist(s);
        REQUIRE(tr.max_leak < 1e-10);
        for (size_t j = 0; j < d.P.size(); ++j)
            REQUIRE(tr.final_dist()[j] == Catch::Approx(d.P[j]).margin(1e-8));
    }
}

TEST_CASE("geometric mean binding time") {
    core::Domain3DParams d;
    d.volume = markov::kPi;
    d.boundary_area = 100.0;
    d.channel_area = 1.0;
    d.D = 1.0;
    REQUIRE(markov::mfpt_tau1(d) == Catch::Approx(std::log(100.0)).epsilon(1e-14));
    SECTION("absorbing patch cannot exceed the boundary") {
        d.channel_area = 200.0;
        REQUIRE_THROWS_AS(markov::mfpt_tau1(d), core::ValidationError);
    }
}

TEST_CASE("self-consistent mean bound count") {
    SECTION("undamped limits") {
        REQUIRE(markov::mean_bound_selfconsistent(6.0, 3.0, 0.0, 1.0, 1.0).root == 6.0);
        REQUIRE(markov::mean_bound_selfconsistent(0.0, 3.0, 2.0, 1.0, 1.0).root == 0.0);
    }
    SECTION("small-occupancy approximation") {
        const auto r = markov::mean_bound_selfconsistent(4.0, 5.0, 0.5, 0.2, 2.0);
        REQUIRE(r.approx == Catch::Approx(4.0 / (1.0 + 0.05 * 4.0 * 5.0)).epsilon(1e-14));
    }
    SECTION("multiple fixed points resolve to the smallest") {
        // c = 1: roots at 5 - 2 sqrt(6), 5 + 2 sqrt(6), and M itself
        const auto r = markov::mean_bound_selfconsistent(10.0, 10.0, 1.0, 1.0, 1.0);
        REQUIRE(r.root == Catch::Approx(5.0 - 2.0 * std::sqrt(6.0)).margin(1e-9));
    }
    SECTION("no admissible root reports instead of guessing") {
        REQUIRE_THROWS_WITH(markov::mean_bound_selfconsistent(20.0, 5.0, 0.001, 1.0, 1.0),
                            Catch::Matchers::ContainsSubstring("no self-consistent root"));
    }
}

TEST_CASE("enzyme-substrate master equation") {
    SECTION("irreversible single pair is a pure exponential") {
        markov::MMSpec s{1, 1, 0.0, 0.0, 1.0};
        const auto r = markov::mm_master(s, 1.0, 0.005);
        REQUIRE(r.mean_bound.back() == Catch::Approx(1.0 - std::exp(-1.0)).margin(1e-8));
        REQUIRE(r.mean_product.back() == Catch::Approx(0.0).margin(1e-12));
    }
    SECTION("full conversion and conservation") {
        markov::MMSpec s{5, 2, 1.0, 1.0, 1.0};
        const auto r = markov::mm_master(s, 40.0, 0.01);
        REQUIRE(r.max_leak < 1e-10);
        double mass = 0.0;
        for (double v : r.P_final) mass += v;
        REQUIRE(mass == Catch::Approx(1.0).margin(1e-10));
        REQUIRE(r.mean_product.back() == Catch::Approx(5.0).margin(1e-6));
        REQUIRE(r.mean_bound.back() == Catch::Approx(0.0).margin(1e-6));
        for (size_t i = 1; i < r.mean_product.size(); ++i)
            REQUIRE(r.mean_product[i] >= r.mean_product[i - 1] - 1e-9);
    }
    SECTION("state-space cap") {
        markov::MMSpec s{1000, 200, 1.0, 1.0, 1.0};
        REQUIRE_THROWS_WITH(markov::mm_master(s, 1.0, 0.01),
                            Catch::Matchers::ContainsSubstring("state space"));
    }
}

TEST_CASE("agonist-coupled chain") {
    markov::PushPullChainSpec spec;
    spec.S = 2;
    spec.kminus1 = 1.0;
    spec.tau1 = 0.5;
    spec.gamma = 2.0;
    spec.Kminus1 = 1.0;

    SECTION("stationary solve matches an event-driven simulation") {
        const auto st = markov::stationary_pushpull_chain(spec);
        REQUIRE(st.tail_mass < 1e-6);
        const auto mc = oracles::gillespie_chain(spec.S, spec.kminus1, spec.tau1, spec.gamma,
                                                 spec.Kminus1, 4000.0, 998877ull);
        REQUIRE(std::abs(st.moments.mean_open - mc.mean_open) <= 3.0 * mc.se_mean_open);
        REQUIRE(std::abs(st.moments.mean_q - mc.mean_q) <= 3.0 * mc.se_mean_q);
        REQUIRE(st.moments.var_open == Catch::Approx(mc.var_open).epsilon(0.10));
    }
    SECTION("transient relaxes onto the stationary moments") {
        const auto st = markov::stationary_pushpull_chain(spec);
        const auto tr = markov::pushpull_chain(spec, 30.0, 0.01);
        REQUIRE(tr.max_leak < 1e-8);
        REQUIRE(tr.moments.back().mean_open ==
                Catch::Approx(st.moments.mean_open).margin(1e-6));
        REQUIRE(tr.moments.back().mean_q == Catch::Approx(st.moments.mean_q).margin(1e-6));
    }
    SECTION("the two agonist bookkeepings describe the same chain") {
        // q counts every agonist in one reading and only unbound ones in the
        // other; rates coincide under q_total = q_free + (S - k), so channel
        // moments agree and the q means differ by the mean bound count
        auto lit = spec;
        lit.rule = markov::AgonistRule::LiteralFreeQ;
        const auto a = markov::stationary_pushpull_chain(spec);
        const auto b = markov::stationary_pushpull_chain(lit);
        REQUIRE(b.moments.mean_open == Catch::Approx(a.moments.mean_open).margin(1e-9));
        REQUIRE(b.moments.var_open == Catch::Approx(a.moments.var_open).margin(1e-9));
        REQUIRE(a.moments.mean_q - b.moments.mean_q ==
                Catch::Approx(a.moments.mean_open).margin(1e-7));
    }
    SECTION("a cap that clips the agonist tail is rejected") {
        auto low = spec;
        low.q_max = 3;
        REQUIRE_THROWS_WITH(markov::pushpull_chain(low, 30.0, 0.01),
                            Catch::Matchers::ContainsSubstring("tail mass"));
    }
    SECTION("automatic cap needs a degradation scale") {
        auto free = spec;
        free.Kminus1 = 0.0;
        REQUIRE_THROWS_WITH(markov::resolve_q_max(free),
                            Catch::Matchers::ContainsSubstring("q_max"));
    }
}

TEST_CASE("slow agonist modulation") {
    SECTION("two-point mixture by hand") {
        const auto m = markov::slow_pushpull_mixing(1, 1.0, 1.0, {0.5, 0.5});
        REQUIRE(m.mean == Catch::Approx(0.25).margin(1e-14));
        REQUIRE(m.second == Catch::Approx(0.125).margin(1e-14));
        REQUIRE(m.variance == Catch::Approx(0.0625).margin(1e-14));
    }
    SECTION("weights must be a distribution") {
        REQUIRE_THROWS(markov::slow_pushpull_mixing(1, 1.0, 1.0, {0.4, 0.4}));
    }
    SECTION("mixture mean tracks the full chain when gating is fast") {
        markov::PushPullChainSpec spec;
        spec.S = 3;
        spec.kminus1 = 100.0;
        spec.tau1 = 1.0;
        spec.gamma = 0.3;
        spec.Kminus1 = 0.1;
        const auto st = markov::stationary_pushpull_chain(spec);
        const auto w = markov::poisson_weights(spec.gamma / spec.Kminus1, st.spec.q_max);
        const auto m = markov::slow_pushpull_mixing(spec.S, spec.kminus1, spec.tau1, w);
        REQUIRE(m.mean == Catch::Approx(st.moments.mean_open).epsilon(0.05));
    }
    SECTION("poisson weights normalize and keep the mean") {
        const auto w = markov::poisson_weights(3.0, 60);
        double sum = 0.0, mean = 0.0;
        for (size_t k = 0; k < w.size(); ++k) {
            sum += w[k];
            mean += k * w[k];
        }
        REQUIRE(sum == Catch::Approx(1.0).margin(1e-12));
        REQUIRE(mean == Catch::Approx(3.0).margin(1e-10));
    }
}
