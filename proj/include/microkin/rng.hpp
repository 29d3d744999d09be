#pragma once
// Counter-based pseudorandom generator with explicit substream derivation.
//
// Output i of a stream is a pure function of (key, i), so replica streams can
// be created independently of execution order and the simulation results are
// reproducible across platforms and thread counts.  The mixing function is
// the splitmix64 finalizer applied to a Weyl sequence.

#include <cmath>
#include <cstdint>

namespace microkin::rng {

constexpr std::uint64_t kWeylIncrement = 0x9E3779B97F4A7C15ull;

inline std::uint64_t mix64(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ull;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBull;
    z ^= z >> 31;
    return z;
}

class CounterRng {
  public:
    explicit CounterRng(std::uint64_t key = 0, std::uint64_t counter = 0)
        : key_(key), ctr_(counter) {}

    std::uint64_t next() {
        std::uint64_t z = key_ + (++ctr_) * kWeylIncrement;
        return mix64(z);
    }

    std::uint64_t key() const { return key_; }
    std::uint64_t counter() const { return ctr_; }

    // uniform in [0, 1), 53-bit resolution
    double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    // uniform in (0, 1], safe as a log argument
    double uniform_pos() { return 1.0 - uniform01(); }

    double exponential(double rate) { return -std::log(uniform_pos()) / rate; }

    // Box-Muller with a cached spare; avoids libm distribution differences
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform_pos();
        double u2 = uniform01();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    // integer in [0, n)
    std::uint64_t below(std::uint64_t n) {
        return static_cast<std::uint64_t>(uniform01() * static_cast<double>(n)) % n;
    }

  private:
    std::uint64_t key_;
    std::uint64_t ctr_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

// Derives a decorrelated substream for one replica of an ensemble.
inline CounterRng stream_for(std::uint64_t master_seed, std::uint64_t replica_id) {
    std::uint64_t k0 = mix64(master_seed + kWeylIncrement * (replica_id + 1));
    std::uint64_t k1 = mix64(k0 ^ 0x94D049BB133111EBull);
    return CounterRng(k1);
}

// Two-level split: one stream per (replica, entity) pair, e.g. per particle.
inline CounterRng stream_for(std::uint64_t master_seed, std::uint64_t replica_id,
                             std::uint64_t entity_id) {
    std::uint64_t k0 = mix64(master_seed + kWeylIncrement * (replica_id + 1));
    std::uint64_t k1 = mix64(k0 + kWeylIncrement * (entity_id + 1));
    std::uint64_t k2 = mix64(k1 ^ 0xBF58476D1CE4E5B9ull);
    return CounterRng(k2);
}

}  // namespace microkin::rng
