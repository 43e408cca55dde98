#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace foca {

// splitmix64 finalizer. Stateless; used both as the RNG core and as the
// stable hash for seed-stream derivation and config hashing.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b) {
    return mix64(a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2)));
}

inline std::uint64_t hash_str(std::string_view s, std::uint64_t seed = 0) {
    std::uint64_t h = mix64(seed ^ 0xcbf29ce484222325ULL);
    for (unsigned char c : s) h = mix64(h ^ c);
    return h;
}

// Derive an independent seed stream: (seed, label, index) -> u64.
inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view label, std::uint64_t index = 0) {
    return hash_combine(hash_combine(seed, hash_str(label)), index);
}

// Deterministic counter-based generator. The whole state is two u64s, so
// it serializes into checkpoints trivially and regenerates bit-identically
// on any platform. No distribution objects from <random> are used anywhere;
// their output is implementation-defined.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : seed_(seed), counter_(0) {}

    std::uint64_t next_u64() { return mix64(seed_ ^ mix64(counter_++)); }

    // uniform in [0,1)
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    // integer in [0, n)
    std::uint64_t next_below(std::uint64_t n) {
        return n == 0 ? 0 : next_u64() % n;
    }

    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) { // inclusive range
        return lo + static_cast<std::int64_t>(next_below(static_cast<std::uint64_t>(hi - lo + 1)));
    }

    bool next_bool() { return (next_u64() & 1ULL) != 0; }

    // Box-Muller without caching: always consumes two draws, returns one.
    // Keeps the state a pure counter so resume never depends on a half-used pair.
    double gaussian() {
        double u1 = next_double();
        double u2 = next_double();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    std::uint64_t seed() const { return seed_; }
    std::uint64_t counter() const { return counter_; }
    void set_counter(std::uint64_t c) { counter_ = c; }

private:
    std::uint64_t seed_;
    std::uint64_t counter_;
};

} // namespace foca
