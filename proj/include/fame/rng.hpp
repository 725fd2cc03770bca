#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>

namespace fame {

/// Mixes a 64-bit value (splitmix64 finalizer). Used to derive independent
/// stream seeds from a run seed and a tag.
constexpr std::uint64_t mix_seed(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) noexcept {
    return mix_seed(mix_seed(seed) ^ mix_seed(tag + 0x632be59bd9b4e019ULL));
}

/**
Seeded random stream.

The engine is std::mt19937_64, whose output sequence is fixed by the
standard. The standard distributions are implementation-defined, so the
conversions to doubles, normals and bounded integers are done here; that
keeps every run bit-reproducible across standard libraries.
*/
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double low, double high) { return low + (high - low) * uniform(); }

    /// Uniform integer on [0, n). Rejection sampling, no modulo bias.
    std::size_t uniform_index(std::size_t n) {
        if (n == 0) throw std::invalid_argument("uniform_index: empty range");
        const std::uint64_t bound = static_cast<std::uint64_t>(n);
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
        std::uint64_t x = engine_();
        while (x >= limit) x = engine_();
        return static_cast<std::size_t>(x % bound);
    }

    bool bernoulli(double p) { return uniform() < p; }

    /// Standard normal via Box-Muller; the second variate is cached.
    double normal() {
        if (has_cached_) {
            has_cached_ = false;
            return cached_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        cached_ = radius * std::sin(angle);
        has_cached_ = true;
        return radius * std::cos(angle);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    /// Samples an index from a discrete distribution given by (unnormalized) weights.
    template <typename Range>
    std::size_t categorical(const Range& weights) {
        double total = 0.0;
        for (double w : weights) total += w;
        if (!(total > 0.0)) throw std::invalid_argument("categorical: weights sum to zero");
        double u = uniform() * total;
        std::size_t index = 0;
        std::size_t last_positive = 0;
        for (double w : weights) {
            if (w > 0.0) {
                last_positive = index;
                if (u < w) return index;
                u -= w;
            }
            ++index;
        }
        return last_positive;
    }

    /// Full engine state as text, for checkpoints.
    std::string serialize() const {
        std::ostringstream out;
        out << engine_ << ' ' << has_cached_ << ' ';
        out.precision(17);
        out << cached_;
        return out.str();
    }

    static Rng deserialize(const std::string& text) {
        Rng rng;
        std::istringstream in(text);
        in >> rng.engine_ >> rng.has_cached_ >> rng.cached_;
        if (!in) throw std::runtime_error("Rng::deserialize: malformed state");
        return rng;
    }

private:
    std::mt19937_64 engine_;
    bool has_cached_ = false;
    double cached_ = 0.0;
};

}  // namespace fame
