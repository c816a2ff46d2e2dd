#pragma once

#include "binpick/common.hpp"

#include <cmath>
#include <cstdint>

namespace binpick {

// Self-contained deterministic generator (splitmix64 core). The standard
// <random> distributions are implementation-defined, which would break
// byte-identical artifact reruns across toolchains.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() {
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1).
    double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Box-Muller; consumes two uniforms per sample.
    double gaussian() {
        double u1 = 1.0 - uniform(); // (0, 1]
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
    }

    // Uniform over SO(3): four Gaussians, normalized.
    Quat uniform_quaternion() {
        Quat q(gaussian(), gaussian(), gaussian(), gaussian());
        while (q.norm() < 1e-12)
            q = Quat(gaussian(), gaussian(), gaussian(), gaussian());
        q.normalize();
        return q;
    }

    Vec3 uniform_unit_vector() {
        Vec3 v(gaussian(), gaussian(), gaussian());
        while (v.norm() < 1e-12) v = Vec3(gaussian(), gaussian(), gaussian());
        return v.normalized();
    }

private:
    uint64_t state_;
};

// Derives an independent stream from a master seed and a stream tag.
inline uint64_t mix_seed(uint64_t seed, uint64_t tag) {
    Rng r(seed ^ (0x632be59bd9b4e019ULL * (tag + 1)));
    return r.next_u64();
}

} // namespace binpick
