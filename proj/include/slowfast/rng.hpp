#pragma once

#include <cmath>
#include <cstdint>

namespace slowfast {

// Counter mode random numbers: every draw is a pure function of
// (seed, step, particle, axis). Nothing is stateful, so a parallel sweep
// over particles consumes exactly the same increments as a serial one,
// and a run can be replayed from its seed alone.
//
// The hash is a chain of SplitMix64 finalizers, one per counter word.
// Axis indices form a single namespace per (step, particle): a normal
// draw at axis a consumes the uniforms at axes 2a and 2a + 1, so callers
// that mix uniform and normal draws within one step must keep their axis
// ranges disjoint.
class CounterRng {
public:
    explicit CounterRng(std::uint64_t seed) : seed_(seed) {}

    std::uint64_t seed() const { return seed_; }

    // Uniform on (0, 1), endpoints excluded.
    double uniform(std::uint64_t step, std::uint64_t particle,
                   std::uint64_t axis) const {
        std::uint64_t h = mix(seed_);
        h = mix(h + step);
        h = mix(h + particle);
        h = mix(h + axis);
        return (static_cast<double>(h >> 11) + 0.5) * 0x1p-53;
    }

    // Standard normal via Box-Muller on the uniforms at axes (2a, 2a+1).
    double normal(std::uint64_t step, std::uint64_t particle,
                  std::uint64_t axis) const {
        const double u1 = uniform(step, particle, 2 * axis);
        const double u2 = uniform(step, particle, 2 * axis + 1);
        return std::sqrt(-2.0 * std::log(u1)) *
               std::cos(6.283185307179586476925286766559 * u2);
    }

private:
    static std::uint64_t mix(std::uint64_t x) {
        x += 0x9E3779B97F4A7C15ull;
        x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
        x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
        return x ^ (x >> 31);
    }

    std::uint64_t seed_;
};

} // namespace slowfast
