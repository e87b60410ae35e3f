#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>

namespace coopperc {

// Counter-based generator built on the SplitMix64 finalizer. Each draw hashes
// (key, counter), so streams are splittable: a child stream derived from
// (seed, path...) never overlaps its siblings, and replicate k can be sampled
// without generating replicates 0..k-1. Output is identical regardless of how
// work is scheduled across threads.
class CounterRng {
  public:
    explicit CounterRng(std::uint64_t key) : key_(key) {}

    // Derives a stream key from a seed and a path of stream indices.
    static CounterRng keyed(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
        return CounterRng(derive(seed, path));
    }

    static std::uint64_t derive(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
        std::uint64_t k = mix(seed ^ 0x2545F4914F6CDD1DULL);
        for (std::uint64_t part : path) k = mix(k ^ mix(part + 0x9E3779B97F4A7C15ULL));
        return k;
    }

    std::uint64_t next_u64() { return mix(key_ + (++counter_) * 0x9E3779B97F4A7C15ULL); }

    // Uniform on (0, 1]: never returns 0, so -log() is always finite.
    double next_unit() {
        return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    }

    // Uniform on [0, 1).
    double next_unit_co() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double next_exponential(double rate) { return -std::log(next_unit()) / rate; }

    // Box-Muller with a cached spare. Deterministic for a fixed key.
    double next_normal(double mean, double sd) {
        if (has_spare_) {
            has_spare_ = false;
            return mean + sd * spare_;
        }
        double u1 = next_unit();
        double u2 = next_unit_co();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return mean + sd * r * std::cos(a);
    }

    // Unbiased integer on [0, n) by rejection.
    std::uint64_t next_below(std::uint64_t n) {
        std::uint64_t threshold = (0 - n) % n;
        for (;;) {
            std::uint64_t r = next_u64();
            if (r >= threshold) return r % n;
        }
    }

  private:
    static std::uint64_t mix(std::uint64_t z) {
        z ^= z >> 30;
        z *= 0xBF58476D1CE4E5B9ULL;
        z ^= z >> 27;
        z *= 0x94D049BB133111EBULL;
        z ^= z >> 31;
        return z;
    }

    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace coopperc
