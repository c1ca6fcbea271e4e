// Deterministic random number generation (xoshiro256++ seeded by splitmix64).
// Used instead of <random> distributions so that experiment reruns with a
// fixed seed are byte-identical across standard library versions.
#pragma once

#include <cmath>
#include <cstdint>

namespace geolab {

class Rng {
  public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t x = seed;
        for (auto& s : state_) {
            // splitmix64
            x += 0x9e3779b97f4a7c15ULL;
            std::uint64_t z = x;
            z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
            z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
            s = z ^ (z >> 31);
        }
    }

    std::uint64_t next() {
        auto rotl = [](std::uint64_t v, int k) { return (v << k) | (v >> (64 - k)); };
        const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    /// Uniform double in [0, 1).
    double uniform() { return std::ldexp(static_cast<double>(next() >> 11), -53); }

    /// Uniform double in [a, b).
    double uniform(double a, double b) { return a + (b - a) * uniform(); }

    /// Standard normal via Box-Muller (deterministic pairing).
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double r, s;
        do {
            r = uniform();
        } while (r <= 0.0);
        s = uniform();
        const double mag = std::sqrt(-2.0 * std::log(r));
        spare_ = mag * std::sin(6.283185307179586477 * s);
        have_spare_ = true;
        return mag * std::cos(6.283185307179586477 * s);
    }

    /// Derive an independent stream (for indexed fan-out work).
    Rng fork(std::uint64_t stream) const {
        Rng r(state_[0] ^ (0x9e3779b97f4a7c15ULL * (stream + 1)));
        return r;
    }

  private:
    std::uint64_t state_[4];
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace geolab
