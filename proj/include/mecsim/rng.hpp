#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace mecsim {

// splitmix64 step; used to derive independent substream seeds from one
// master seed so that draw sequences of different subsystems never
// interleave (changing one parameter must not shift another stream).
inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
    std::uint64_t s = master ^ (0xd1b54a32d192ed03ull * (stream + 1));
    const std::uint64_t a = splitmix64(s);
    const std::uint64_t b = splitmix64(s);
    return a ^ (b << 1) ^ (b >> 1);
}

// Deterministic RNG over mt19937_64 (whose output sequence is fixed by the
// standard). All distributions are implemented explicitly so the draw
// sequence does not depend on the standard library vendor.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t bits() { return eng_(); }

    // uniform in [0, 1) with 53-bit resolution
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // uniform integer in [0, n); n is tiny here, modulo bias is irrelevant
    std::uint64_t uniform_int(std::uint64_t n) { return n <= 1 ? 0 : eng_() % n; }

    // standard normal via Box-Muller; exactly two uniforms per call so the
    // per-call draw count is fixed
    double normal() {
        double u1 = uniform();
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
    }

    // Gamma(shape, 1), Marsaglia-Tsang squeeze; shape < 1 uses the usual
    // boost draw gamma(shape+1) * U^(1/shape).
    double gamma(double shape) {
        if (shape < 1.0) {
            const double u = std::max(uniform(), 0x1.0p-53);
            return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
        }
        const double d = shape - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x = normal();
            double v = 1.0 + c * x;
            if (v <= 0.0) continue;
            v = v * v * v;
            const double u = uniform();
            const double x2 = x * x;
            if (u < 1.0 - 0.0331 * x2 * x2) return d * v;
            if (u > 0.0 && std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v;
        }
    }

    // Beta(a, b) as a ratio of two gamma draws
    double beta(double a, double b) {
        const double x = gamma(a);
        const double y = gamma(b);
        const double s = x + y;
        if (s <= 0.0) return 0.5;
        return x / s;
    }

private:
    std::mt19937_64 eng_;
};

} // namespace mecsim
