#pragma once
// Markovian channel gating: a birth-death chain over the number of FREE
// channels, its exact stationary law and moments, the transient master
// equation, the geometry-based binding time, the mean-field self-consistency
// equation, a Michaelis-Menten master equation, and the agonist-coupled
// (push-pull) two-variable chain.
//
// Index convention, fixed once for the whole artifact: the chain state k
// counts FREE channels and the open-channel count is n_open = S - k.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "microkin/core.hpp"

namespace microkin::markov {

inline constexpr double kPi = std::numbers::pi;

// --------------------------------------------------------------------------
// Birth-death chain for S channels and M agonists

struct BirthDeathSpec {
    int S = 1;              // channel count
    int M = 0;              // agonist count
    double tau1 = 1.0;      // mean binding time
    double kminus1 = 0.0;   // unbinding rate

    int k_min() const { return std::max(0, S - M); }
};

inline void validate(const BirthDeathSpec& s) {
    core::require(s.S >= 1, "channel count must be at least 1");
    core::require(s.M >= 0, "negative agonist count");
    core::require(s.tau1 > 0.0 && std::isfinite(s.tau1), "binding time must be positive");
    core::require(s.kminus1 >= 0.0, "negative rate: kminus1");
}

// Binding propensity out of state k (k -> k-1): each of the k free channels
// binds one of the (M - S + k)+ free agonists.
inline double binding_rate(int k, const BirthDeathSpec& s) {
    validate(s);
    core::require(k >= s.k_min() && k <= s.S, "state out of range");
    return k * std::max(s.M - s.S + k, 0) / s.tau1;
}

struct StationaryDist {
    int k_min = 0;
    std::vector<double> P;   // P[j] = Pr{k_free = k_min + j}
    double mean_open = 0.0;  // <S - k>
    double second_open = 0.0;
    double variance = 0.0;

    double prob_free(int k) const {
        int j = k - k_min;
        return (j >= 0 && j < static_cast<int>(P.size())) ? P[j] : 0.0;
    }
};

namespace detail {

inline void fill_open_moments(StationaryDist& d, int S) {
    d.mean_open = d.second_open = 0.0;
    for (size_t j = 0; j < d.P.size(); ++j) {
        const double n_open = S - (d.k_min + static_cast<double>(j));
        d.mean_open += n_open * d.P[j];
        d.second_open += n_open * n_open * d.P[j];
    }
    d.variance = d.second_open - d.mean_open * d.mean_open;
    if (d.variance < 0 && d.variance > -1e-12) d.variance = 0.0;
}

}  // namespace detail

// Exact stationary law via the downward product formula, accumulated in log
// space so large S and M cannot overflow.
inline StationaryDist stationary_dist(const BirthDeathSpec& s) {
    validate(s);
    const int k_min = s.k_min();
    const int n = s.S - k_min + 1;
    StationaryDist out;
    out.k_min = k_min;
    out.P.assign(n, 0.0);
    if (s.kminus1 == 0.0) {
        // binding is absorbing; everything ends at the fewest free channels
        out.P[0] = 1.0;
        detail::fill_open_moments(out, s.S);
        return out;
    }
    // logw[j] relative to the all-free state k = S (index n-1)
    std::vector<double> logw(n, 0.0);
    for (int j = 1; j < n; ++j) {
        const int i = s.S - j + 1;  // state whose binding feeds this level
        const double lam = static_cast<double>(i) * (s.M - s.S + i);
        logw[n - 1 - j] = logw[n - j] + std::log(lam) -
                          std::log(static_cast<double>(j) * s.tau1 * s.kminus1);
    }
    const double m = *std::max_element(logw.begin(), logw.end());
    double z = 0.0;
    for (double lw : logw) z += std::exp(lw - m);
    for (int j = 0; j < n; ++j) out.P[j] = std::exp(logw[j] - m) / z;
    detail::fill_open_moments(out, s.S);
    return out;
}

// --------------------------------------------------------------------------
// Generic dense master-equation utilities

namespace detail {

// One RK4 step of dP/dt = L(P); the generator has zero column sums, so the
// step preserves total probability exactly.
template <typename ApplyFn>
void rk4_linear(std::vector<double>& P, double h, const ApplyFn& L) {
    const size_t n = P.size();
    static thread_local std::vector<double> k1, k2, k3, k4, tmp;
    k1.resize(n);
    k2.resize(n);
    k3.resize(n);
    k4.resize(n);
    tmp.resize(n);
    L(P, k1);
    for (size_t i = 0; i < n; ++i) tmp[i] = P[i] + 0.5 * h * k1[i];
    L(tmp, k2);
    for (size_t i = 0; i < n; ++i) tmp[i] = P[i] + 0.5 * h * k2[i];
    L(tmp, k3);
    for (size_t i = 0; i < n; ++i) tmp[i] = P[i] + h * k3[i];
    L(tmp, k4);
    for (size_t i = 0; i < n; ++i) P[i] += h / 6.0 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
}

// Dense LU with partial pivoting; A is row-major n x n, b the RHS.
// Solves in place, returns the solution in b.
inline void lu_solve(std::vector<double>& A, std::vector<double>& b, int n) {
    std::vector<int> piv(n);
    for (int i = 0; i < n; ++i) piv[i] = i;
    for (int c = 0; c < n; ++c) {
        int p = c;
        for (int r = c + 1; r < n; ++r)
            if (std::abs(A[r * n + c]) > std::abs(A[p * n + c])) p = r;
        if (A[p * n + c] == 0.0) throw std::runtime_error("singular generator matrix");
        if (p != c) {
            for (int j = 0; j < n; ++j) std::swap(A[p * n + j], A[c * n + j]);
            std::swap(b[p], b[c]);
        }
        for (int r = c + 1; r < n; ++r) {
            const double w = A[r * n + c] / A[c * n + c];
            if (w == 0.0) continue;
            for (int j = c; j < n; ++j) A[r * n + j] -= w * A[c * n + j];
            b[r] -= w * b[c];
        }
    }
    for (int r = n - 1; r >= 0; --r) {
        double s = b[r];
        for (int j = r + 1; j < n; ++j) s -= A[r * n + j] * b[j];
        b[r] = s / A[r * n + r];
    }
}

}  // namespace detail

// --------------------------------------------------------------------------
// Transient master equation for the birth-death chain, starting all-free.

struct TransientSeries {
    int k_min = 0;
    std::vector<double> t;
    std::vector<std::vector<double>> P;  // P[snap][j], j = k - k_min
    double max_leak = 0.0;

    const std::vector<double>& final_dist() const { return P.back(); }
};

inline TransientSeries transient_master(const BirthDeathSpec& s, double t_end, double dt,
                                        int store_every = 1) {
    validate(s);
    core::require(t_end >= 0.0 && dt > 0.0, "bad time grid");
    const int k_min = s.k_min();
    const int n = s.S - k_min + 1;
    std::vector<double> P(n, 0.0);
    P[n - 1] = 1.0;  // all channels free

    std::vector<double> lam(n), mu(n);
    double rate_max = 0.0;
    for (int j = 0; j < n; ++j) {
        const int k = k_min + j;
        lam[j] = binding_rate(k, s);        // k -> k-1
        mu[j] = s.kminus1 * (s.S - k);      // k -> k+1
        rate_max = std::max(rate_max, lam[j] + mu[j]);
    }
    auto L = [&](const std::vector<double>& p, std::vector<double>& dp) {
        for (int j = 0; j < n; ++j) {
            dp[j] = -(lam[j] + mu[j]) * p[j];
            if (j + 1 < n) dp[j] += lam[j + 1] * p[j + 1];
            if (j - 1 >= 0) dp[j] += mu[j - 1] * p[j - 1];
        }
    };

    TransientSeries out;
    out.k_min = k_min;
    const long long nsteps = static_cast<long long>(std::ceil(t_end / dt - 1e-12));
    const int nsub = std::max(1, static_cast<int>(std::ceil(dt * rate_max / 0.2)));
    out.t.push_back(0.0);
    out.P.push_back(P);
    double tcur = 0.0;
    for (long long step = 0; step < nsteps; ++step) {
        for (int u = 0; u < nsub; ++u) detail::rk4_linear(P, dt / nsub, L);
        tcur += dt;
        double sum = 0.0;
        for (double v : P) sum += v;
        out.max_leak = std::max(out.max_leak, std::abs(sum - 1.0));
        if (store_every > 0 && (step + 1) % store_every == 0) {
            out.t.push_back(tcur);
            out.P.push_back(P);
        }
    }
    if (out.t.back() != tcur) {
        out.t.push_back(tcur);
        out.P.push_back(P);
    }
    if (out.max_leak > 1e-8) throw std::runtime_error("probability leak exceeds 1e-8");
    return out;
}

// --------------------------------------------------------------------------
// Mean binding time from domain geometry (narrow-escape log law).

inline double mfpt_tau1(const core::Domain3DParams& d) {
    core::validate(d);
    return d.volume / (kPi * d.D) * std::log(d.boundary_area / d.channel_area);
}

// --------------------------------------------------------------------------
// Mean-field self-consistency for the mean bound count:
//   n = M / (1 + c (M - n)(S - n)),  c = tau1 kminus1 / S_ch,
// solved on [0, min(M, S)] (smallest root), plus the small-n approximation
// M / (1 + c M S).

struct SelfConsistentMean {
    double root = 0.0;
    double approx = 0.0;
};

inline SelfConsistentMean mean_bound_selfconsistent(double M, double S, double kminus1,
                                                    double tau1, double S_ch) {
    core::require(M >= 0.0 && S >= 0.0, "counts must be nonnegative");
    core::require(tau1 > 0.0 && S_ch > 0.0, "tau1 and S_ch must be positive");
    core::require(kminus1 >= 0.0, "negative rate: kminus1");
    const double c = tau1 * kminus1 / S_ch;
    SelfConsistentMean out;
    out.approx = M / (1.0 + c * M * S);
    if (kminus1 == 0.0 || M == 0.0) {
        out.root = M;  // undamped fixed point
        return out;
    }
    auto g = [&](double x) { return (x - M) * (1.0 - c * x * (S - x)); };
    const double hi = std::min(M, S);
    const int ngrid = 1024;
    double a = 0.0, b = -1.0;
    double ga = g(0.0);
    for (int j = 1; j <= ngrid; ++j) {
        const double x = hi * j / ngrid;
        const double gx = g(x);
        if (gx == 0.0) {
            out.root = x;
            return out;
        }
        if (ga * gx < 0.0) {
            a = hi * (j - 1) / ngrid;
            b = x;
            break;
        }
        ga = gx;
    }
    if (b < 0.0) throw core::ValidationError("no self-consistent root in [0, min(M, S)]");
    double fa = g(a);
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (a + b);
        const double fm = g(mid);
        if (fm == 0.0) {
            a = b = mid;
            break;
        }
        if (fa * fm < 0.0) {
            b = mid;
        } else {
            a = mid;
            fa = fm;
        }
    }
    out.root = 0.5 * (a + b);
    return out;
}

// --------------------------------------------------------------------------
// Michaelis-Menten master equation over (k products, q bound enzymes).

struct MMSpec {
    int M0 = 1;   // substrate count
    int E0 = 1;   // enzyme count
    double kminus1 = 0.0;
    double k2 = 0.0;
    double tau1 = 1.0;
};

inline void validate(const MMSpec& s) {
    core::require(s.M0 >= 0 && s.E0 >= 0, "negative counts");
    core::require(s.tau1 > 0.0, "binding time must be positive");
    core::require(s.kminus1 >= 0.0 && s.k2 >= 0.0, "negative rate");
    core::require(static_cast<long long>(s.M0 + 1) * (s.E0 + 1) <= 100000,
                  "joint state space exceeds the 1e5 cap");
}

struct MMResult {
    MMSpec spec;
    std::vector<double> t;
    std::vector<double> mean_product;  // <k>(t)
    std::vector<double> mean_bound;    // <q>(t)
    std::vector<double> P_final;       // flattened k*(E0+1)+q
    double max_leak = 0.0;

    double prob(int k, int q) const { return P_final[k * (spec.E0 + 1) + q]; }
};

inline MMResult mm_master(const MMSpec& s, double t_end, double dt) {
    validate(s);
    core::require(t_end >= 0.0 && dt > 0.0, "bad time grid");
    const int nk = s.M0 + 1, nq = s.E0 + 1;
    const int N = nk * nq;
    auto idx = [&](int k, int q) { return k * nq + q; };
    std::vector<double> P(N, 0.0);
    P[idx(0, 0)] = 1.0;

    auto L = [&](const std::vector<double>& p, std::vector<double>& dp) {
        std::fill(dp.begin(), dp.end(), 0.0);
        for (int k = 0; k < nk; ++k)
            for (int q = 0; q < nq; ++q) {
                const double pv = p[idx(k, q)];
                if (pv == 0.0) continue;
                const double bind = std::max(s.M0 - k - q, 0) * (s.E0 - q) / s.tau1;
                const double unbind = s.kminus1 * q;
                const double cat = s.k2 * q;
                dp[idx(k, q)] -= (bind + unbind + cat) * pv;
                if (q + 1 < nq) dp[idx(k, q + 1)] += bind * pv;
                if (q - 1 >= 0) dp[idx(k, q - 1)] += unbind * pv;
                if (k + 1 < nk && q - 1 >= 0) dp[idx(k + 1, q - 1)] += cat * pv;
            }
    };

    const double rate_max =
        static_cast<double>(s.M0) * s.E0 / s.tau1 + (s.kminus1 + s.k2) * s.E0;
    const long long nsteps = static_cast<long long>(std::ceil(t_end / dt - 1e-12));
    const int nsub = std::max(1, static_cast<int>(std::ceil(dt * rate_max / 0.2)));

    MMResult out;
    out.spec = s;
    auto record = [&](double tcur) {
        double mk = 0.0, mq = 0.0;
        for (int k = 0; k < nk; ++k)
            for (int q = 0; q < nq; ++q) {
                mk += k * P[idx(k, q)];
                mq += q * P[idx(k, q)];
            }
        out.t.push_back(tcur);
        out.mean_product.push_back(mk);
        out.mean_bound.push_back(mq);
    };
    record(0.0);
    double tcur = 0.0;
    for (long long step = 0; step < nsteps; ++step) {
        for (int u = 0; u < nsub; ++u) detail::rk4_linear(P, dt / nsub, L);
        tcur += dt;
        double sum = 0.0;
        for (double v : P) sum += v;
        out.max_leak = std::max(out.max_leak, std::abs(sum - 1.0));
        record(tcur);
    }
    if (out.max_leak > 1e-8) throw std::runtime_error("probability leak exceeds 1e-8");
    out.P_final = std::move(P);
    return out;
}

// --------------------------------------------------------------------------
// Agonist-coupled chain over (k free channels, q agonists in the domain).
// The binding propensity uses the FREE agonist count; the printed rate's
// stray symbol admits two readings, both kept:
//   TotalMinusBound: q counts all agonists present, free = (q - (S-k))+,
//                    binding leaves q unchanged (the agonist stays, bound);
//   LiteralFreeQ:    q counts free agonists only, binding consumes one.

enum class AgonistRule { TotalMinusBound, LiteralFreeQ };

struct PushPullChainSpec {
    int S = 1;
    double kminus1 = 0.0;
    double tau1 = 1.0;
    double gamma = 0.0;    // agonist injection rate
    double Kminus1 = 0.0;  // agonist degradation rate (acts on free agonists)
    int q_max = 0;         // 0 selects the automatic Poisson-tail cap
    AgonistRule rule = AgonistRule::TotalMinusBound;
};

inline int resolve_q_max(const PushPullChainSpec& s) {
    if (s.q_max > 0) return s.q_max;
    if (s.gamma == 0.0) return 20;
    core::require(s.Kminus1 > 0.0,
                  "automatic agonist cap needs Kminus1 > 0 (or set q_max explicitly)");
    const double m = s.gamma / s.Kminus1;
    return std::max(20, static_cast<int>(std::ceil(m + 10.0 * std::sqrt(m))));
}

inline void validate(const PushPullChainSpec& s) {
    core::require(s.S >= 1, "channel count must be at least 1");
    core::require(s.tau1 > 0.0, "binding time must be positive");
    core::require(s.kminus1 >= 0.0 && s.gamma >= 0.0 && s.Kminus1 >= 0.0, "negative rate");
    core::require(s.q_max >= 0, "negative agonist cap");
}

namespace detail {

struct ChainLayout {
    int S, qm;  // k = 0..S, q = 0..qm
    int size() const { return (S + 1) * (qm + 1); }
    int idx(int k, int q) const { return k * (qm + 1) + q; }
};

inline double free_agonists(const PushPullChainSpec& s, int k, int q) {
    return (s.rule == AgonistRule::TotalMinusBound) ? std::max(q - (s.S - k), 0) : q;
}

// dP/dt = L P, shared by the transient and stationary paths.  The injection
// stream reflects at q = qm; the tail check guards the truncation.
template <typename Emit>
void for_each_transition(const PushPullChainSpec& s, const ChainLayout& lay, Emit&& emit) {
    const bool literal = (s.rule == AgonistRule::LiteralFreeQ);
    for (int k = 0; k <= lay.S; ++k)
        for (int q = 0; q <= lay.qm; ++q) {
            const int from = lay.idx(k, q);
            const double fa = free_agonists(s, k, q);
            if (k >= 1 && fa > 0.0) {
                const double r = k * fa / s.tau1;
                const int kq = literal ? q - 1 : q;
                if (kq >= 0) emit(from, lay.idx(k - 1, kq), r);
            }
            if (k < lay.S) {
                const double r = s.kminus1 * (lay.S - k);
                const int uq = literal ? q + 1 : q;
                if (r > 0.0 && uq <= lay.qm) emit(from, lay.idx(k + 1, uq), r);
            }
            if (q < lay.qm && s.gamma > 0.0) emit(from, lay.idx(k, q + 1), s.gamma);
            if (q >= 1) {
                const double r = s.Kminus1 * fa;
                if (r > 0.0) emit(from, lay.idx(k, q - 1), r);
            }
        }
}

}  // namespace detail

struct ChainMoments {
    double mean_open = 0.0;
    double var_open = 0.0;
    double mean_q = 0.0;
};

inline ChainMoments chain_moments(const std::vector<double>& P, int S, int qm) {
    detail::ChainLayout lay{S, qm};
    ChainMoments m;
    double second = 0.0;
    for (int k = 0; k <= S; ++k)
        for (int q = 0; q <= qm; ++q) {
            const double pv = P[lay.idx(k, q)];
            const double n_open = S - k;
            m.mean_open += n_open * pv;
            second += n_open * n_open * pv;
            m.mean_q += q * pv;
        }
    m.var_open = second - m.mean_open * m.mean_open;
    return m;
}

struct ChainSeries {
    PushPullChainSpec spec;  // q_max resolved
    std::vector<double> t;
    std::vector<ChainMoments> moments;
    std::vector<double> P_final;
    double max_leak = 0.0;
    double tail_mass = 0.0;  // final mass at q = q_max
};

inline ChainSeries pushpull_chain(const PushPullChainSpec& spec_in, double t_end, double dt) {
    PushPullChainSpec s = spec_in;
    validate(s);
    core::require(t_end >= 0.0 && dt > 0.0, "bad time grid");
    s.q_max = resolve_q_max(s);
    detail::ChainLayout lay{s.S, s.q_max};
    std::vector<double> P(lay.size(), 0.0);
    P[lay.idx(s.S, 0)] = 1.0;

    double rate_max = s.S * static_cast<double>(s.q_max) / s.tau1 + s.kminus1 * s.S + s.gamma +
                      s.Kminus1 * s.q_max;
    auto L = [&](const std::vector<double>& p, std::vector<double>& dp) {
        std::fill(dp.begin(), dp.end(), 0.0);
        detail::for_each_transition(s, lay, [&](int from, int to, double r) {
            dp[from] -= r * p[from];
            dp[to] += r * p[from];
        });
    };

    const long long nsteps = static_cast<long long>(std::ceil(t_end / dt - 1e-12));
    const int nsub = std::max(1, static_cast<int>(std::ceil(dt * rate_max / 0.2)));
    ChainSeries out;
    out.spec = s;
    out.t.push_back(0.0);
    out.moments.push_back(chain_moments(P, s.S, s.q_max));
    double tcur = 0.0;
    for (long long step = 0; step < nsteps; ++step) {
        for (int u = 0; u < nsub; ++u) detail::rk4_linear(P, dt / nsub, L);
        tcur += dt;
        double sum = 0.0;
        for (double v : P) sum += v;
        out.max_leak = std::max(out.max_leak, std::abs(sum - 1.0));
        out.t.push_back(tcur);
        out.moments.push_back(chain_moments(P, s.S, s.q_max));
    }
    for (int k = 0; k <= s.S; ++k) out.tail_mass += P[lay.idx(k, s.q_max)];
    if (out.max_leak > 1e-8) throw std::runtime_error("probability leak exceeds 1e-8");
    if (out.tail_mass > 1e-6)
        throw std::runtime_error("agonist cap too low: tail mass at q_max exceeds 1e-6");
    out.P_final = std::move(P);
    return out;
}

struct ChainStationary {
    PushPullChainSpec spec;
    std::vector<double> P;
    ChainMoments moments;
    std::vector<double> k_marginal;
    std::vector<double> q_marginal;
    double tail_mass = 0.0;
};

inline ChainStationary stationary_pushpull_chain(const PushPullChainSpec& spec_in) {
    PushPullChainSpec s = spec_in;
    validate(s);
    s.q_max = resolve_q_max(s);
    detail::ChainLayout lay{s.S, s.q_max};
    const int N = lay.size();
    std::vector<double> A(static_cast<size_t>(N) * N, 0.0);
    detail::for_each_transition(s, lay, [&](int from, int to, double r) {
        A[static_cast<size_t>(from) * N + from] -= r;
        A[static_cast<size_t>(to) * N + from] += r;
    });
    std::vector<double> b(N, 0.0);
    for (int j = 0; j < N; ++j) A[static_cast<size_t>(N - 1) * N + j] = 1.0;
    b[N - 1] = 1.0;
    detail::lu_solve(A, b, N);
    ChainStationary out;
    out.spec = s;
    out.P = std::move(b);
    for (double& v : out.P)
        if (v < 0 && v > -1e-12) v = 0.0;
    out.moments = chain_moments(out.P, s.S, s.q_max);
    out.k_marginal.assign(s.S + 1, 0.0);
    out.q_marginal.assign(s.q_max + 1, 0.0);
    for (int k = 0; k <= s.S; ++k)
        for (int q = 0; q <= s.q_max; ++q) {
            out.k_marginal[k] += out.P[lay.idx(k, q)];
            out.q_marginal[q] += out.P[lay.idx(k, q)];
        }
    out.tail_mass = out.q_marginal[s.q_max];
    return out;
}

// --------------------------------------------------------------------------
// Slow-mixing limit: moments of the open-channel count when the agonist
// number M is frozen on the gating timescale and distributed by `weights`
// (weights[M] = Pr{N = M}).  The second mixed moment averages the SQUARED
// conditional means, per the closed-form limit.

struct MixedMoments {
    double mean = 0.0;
    double second = 0.0;
    double variance = 0.0;
};

inline MixedMoments slow_pushpull_mixing(int S, double kminus1, double tau1,
                                         const std::vector<double>& weights) {
    core::require(!weights.empty(), "empty agonist distribution");
    double wsum = 0.0;
    for (double w : weights) {
        core::require(w >= 0.0, "negative weight");
        wsum += w;
    }
    core::require(std::abs(wsum - 1.0) <= 1e-8, "agonist distribution must sum to 1");
    MixedMoments out;
    for (size_t M = 0; M < weights.size(); ++M) {
        if (weights[M] == 0.0) continue;
        BirthDeathSpec s{S, static_cast<int>(M), tau1, kminus1};
        const StationaryDist d = stationary_dist(s);
        out.mean += d.mean_open * weights[M];
        out.second += d.mean_open * d.mean_open * weights[M];
    }
    out.variance = out.second - out.mean * out.mean;
    return out;
}

inline std::vector<double> poisson_weights(double mean, int n_max) {
    core::require(mean >= 0.0 && n_max >= 0, "bad Poisson parameters");
    std::vector<double> w(n_max + 1);
    double lw = -mean;  // log pmf at 0
    double sum = 0.0;
    for (int k = 0; k <= n_max; ++k) {
        w[k] = std::exp(lw);
        sum += w[k];
        lw += std::log(mean) - std::log(k + 1.0);
        if (mean == 0.0) lw = -1e300;
    }
    for (double& v : w) v /= sum;  // renormalize the truncated tail
    return w;
}

}  // namespace microkin::markov
