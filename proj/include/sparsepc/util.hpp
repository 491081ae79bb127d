#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace sparsepc {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Log-sum-exp over a span; all -inf inputs yield -inf, never NaN.
inline double logSumExp(std::span<const double> xs) {
    double m = kNegInf;
    for (double x : xs) m = std::max(m, x);
    if (m == kNegInf) return kNegInf;
    double s = 0.0;
    for (double x : xs) s += std::exp(x - m);
    return m + std::log(s);
}

inline double logAdd(double a, double b) {
    if (a == kNegInf) return b;
    if (b == kNegInf) return a;
    double m = std::max(a, b);
    return m + std::log(std::exp(a - m) + std::exp(b - m));
}

// Counter-based deterministic RNG (splitmix64 core). Draw semantics are
// fully specified here so results do not depend on the standard library.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1).
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    // Standard normal via Box-Muller.
    double gaussian() {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        constexpr double twoPi = 6.283185307179586476925286766559;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(twoPi * u2);
    }

    std::uint64_t below(std::uint64_t bound) { return next() % bound; }

    // Independent substream for (seed, index); used for per-row parallel draws.
    static Rng substream(std::uint64_t seed, std::uint64_t index) {
        Rng mix(seed ^ (index * 0xd1342543de82ef95ull + 0x2545f4914f6cdd1dull));
        std::uint64_t s = mix.next();
        return Rng(s);
    }

private:
    std::uint64_t state_;
};

// Categorical draw by inverse CDF over linear-space weights (must sum ~1).
inline std::size_t drawCategorical(Rng& rng, std::span<const double> probs) {
    double u = rng.uniform();
    double acc = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        acc += probs[i];
        if (u < acc) return i;
    }
    return probs.size() - 1;
}

// FNV-1a 64 over a byte range; used as the trailing checksum of binary files.
inline std::uint64_t fnv1a64(const void* data, std::size_t size, std::uint64_t seed = 0xcbf29ce484222325ull) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = seed;
    for (std::size_t i = 0; i < size; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

std::size_t threadCount();

// Runs fn(chunkIndex, begin, end) over [0, n) in fixed-size chunks. Chunk
// boundaries depend only on (n, chunk), not on the thread count, so callers
// that combine per-chunk results in chunk order stay deterministic.
void parallelChunks(std::size_t n, std::size_t chunk,
                    const std::function<void(std::size_t, std::size_t, std::size_t)>& fn);

}  // namespace sparsepc
