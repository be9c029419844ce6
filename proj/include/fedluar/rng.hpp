#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "fedluar/errors.hpp"

namespace fedluar {

// splitmix64 finalizer. Used to turn (master seed, stream, indices) into
// well-separated engine seeds so that adding a consumer to one stream never
// perturbs another.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

enum class Stream : std::uint64_t {
    model_init = 1,
    data_gen = 2,
    partition = 3,
    eval_split = 4,
    client_sample = 5,
    client_batch = 6,
    recycle_sample = 7,
    probe = 8,
};

inline std::uint64_t derive_seed(std::uint64_t master, Stream stream,
                                 std::uint64_t a = 0, std::uint64_t b = 0) {
    std::uint64_t h = mix64(master);
    h = mix64(h ^ static_cast<std::uint64_t>(stream));
    h = mix64(h ^ a);
    h = mix64(h ^ b);
    return h;
}

// Deterministic distributions on top of mt19937_64. The standard library's
// distribution objects are implementation-defined, so every draw that must
// reproduce across toolchains goes through this class instead.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t raw() { return engine_(); }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    // Uniform integer in [0, n). Rejection sampling, no modulo bias.
    std::size_t uniform_index(std::size_t n) {
        if (n == 0) throw InternalError("uniform_index: n must be positive");
        const std::uint64_t bound = static_cast<std::uint64_t>(n);
        const std::uint64_t threshold = (0 - bound) % bound;
        for (;;) {
            std::uint64_t r = engine_();
            if (r >= threshold) return static_cast<std::size_t>(r % bound);
        }
    }

    // Standard normal via Box-Muller, cosine branch only so that each call
    // consumes exactly two engine draws (no hidden cache).
    double normal() {
        double u1 = 1.0 - uniform();  // (0, 1], keeps log finite
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    // Gamma(alpha, 1) via Marsaglia-Tsang squeeze; alpha < 1 handled with the
    // boost Gamma(alpha + 1) * U^(1/alpha).
    double gamma(double alpha) {
        if (!(alpha > 0.0)) throw InternalError("gamma: alpha must be positive");
        if (alpha < 1.0) {
            double g = gamma(alpha + 1.0);
            double u = 1.0 - uniform();  // (0, 1], pow stays positive
            return g * std::pow(u, 1.0 / alpha);
        }
        const double d = alpha - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x = normal();
            double v = 1.0 + c * x;
            if (v <= 0.0) continue;
            v = v * v * v;
            double u = uniform();
            double x2 = x * x;
            if (u < 1.0 - 0.0331 * x2 * x2) return d * v;
            if (u > 0.0 && std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v;
        }
    }

    // Dirichlet(alpha, ..., alpha) of dimension k. Retries the degenerate
    // all-zero draw, which can only occur through underflow at tiny alpha.
    std::vector<double> dirichlet_symmetric(double alpha, std::size_t k) {
        if (k == 0) throw InternalError("dirichlet: dimension must be positive");
        std::vector<double> g(k);
        for (int attempt = 0; attempt < 100; ++attempt) {
            double sum = 0.0;
            for (std::size_t i = 0; i < k; ++i) {
                g[i] = gamma(alpha);
                sum += g[i];
            }
            if (sum > 0.0) {
                for (double& v : g) v /= sum;
                return g;
            }
        }
        throw GenerationError("dirichlet: all gamma draws underflowed to zero");
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace fedluar
