#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ncad {

// Error taxonomy mirrored by the CLI exit codes: config 2, data 3, numeric 4.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ConfigError : Error {
    using Error::Error;
};
struct DataError : Error {
    using Error::Error;
};
struct NumericError : Error {
    using Error::Error;
};

// Deterministic random source. The engine is std::mt19937_64, whose output
// sequence is fixed by the standard; all distributions are hand-rolled here so
// that a seed pins the exact draw sequence on every platform.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1), 53-bit resolution.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform in [0, n). Rejection sampling keeps the draw unbiased.
    std::int64_t index(std::int64_t n) {
        if (n <= 0) throw std::invalid_argument("Rng::index: n must be positive");
        const std::uint64_t un = static_cast<std::uint64_t>(n);
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % un;
        std::uint64_t x = next_u64();
        while (x >= limit) x = next_u64();
        return static_cast<std::int64_t>(x % un);
    }

    // Uniform integer in [lo, hi] inclusive.
    std::int64_t range(std::int64_t lo, std::int64_t hi) {
        if (hi < lo) throw std::invalid_argument("Rng::range: empty range");
        return lo + index(hi - lo + 1);
    }

    bool bernoulli(double p) { return uniform() < p; }

    double sign() { return bernoulli(0.5) ? 1.0 : -1.0; }

    // Box-Muller; draws two uniforms per call, no cached state.
    double normal(double mean = 0.0, double stddev = 1.0) {
        const double u1 = 1.0 - uniform();  // (0, 1]
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        return mean + stddev * r * std::cos(2.0 * M_PI * u2);
    }

    // Marsaglia-Tsang for alpha >= 1; boosted by U^{1/alpha} below 1.
    double gamma(double alpha) {
        if (alpha <= 0.0) throw std::invalid_argument("Rng::gamma: alpha must be positive");
        if (alpha < 1.0) {
            const double u = 1.0 - uniform();  // avoid log(0) in pow
            return gamma(alpha + 1.0) * std::pow(u, 1.0 / alpha);
        }
        const double d = alpha - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x = normal();
            double v = 1.0 + c * x;
            if (v <= 0.0) continue;
            v = v * v * v;
            const double u = uniform();
            if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
            if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
        }
    }

    double beta(double a, double b) {
        const double ga = gamma(a);
        const double gb = gamma(b);
        const double s = ga + gb;
        if (s <= 0.0) return bernoulli(0.5) ? 0.0 : 1.0;  // both underflowed
        return ga / s;
    }

    // Uniformly chosen nonempty subset of {0, ..., d-1}.
    std::vector<std::int64_t> nonempty_subset(std::int64_t d) {
        if (d <= 0) throw std::invalid_argument("Rng::nonempty_subset: d must be positive");
        std::vector<std::int64_t> picked;
        do {
            picked.clear();
            for (std::int64_t i = 0; i < d; ++i)
                if (bernoulli(0.5)) picked.push_back(i);
        } while (picked.empty());
        return picked;
    }

    // Independent child stream; same (seed, stream) always yields the same child.
    Rng fork(std::uint64_t stream) const {
        std::uint64_t z = seed_ + 0x9E3779B97F4A7C15ull * (stream + 1);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return Rng(z ^ (z >> 31));
    }

    std::uint64_t seed() const { return seed_; }

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
};

// Linear-interpolation quantile (the numpy default). `sorted_values` ascending.
inline double quantile_sorted(std::span<const double> sorted_values, double p) {
    if (sorted_values.empty()) throw DataError("quantile of empty range");
    if (p <= 0.0) return sorted_values.front();
    if (p >= 1.0) return sorted_values.back();
    const double pos = p * static_cast<double>(sorted_values.size() - 1);
    const auto lo = static_cast<std::size_t>(pos);
    const double frac = pos - static_cast<double>(lo);
    if (lo + 1 >= sorted_values.size()) return sorted_values.back();
    return sorted_values[lo] + frac * (sorted_values[lo + 1] - sorted_values[lo]);
}

inline double interquartile_range(std::span<const double> values) {
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    return quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
}

inline double mean_of(std::span<const double> values) {
    if (values.empty()) throw DataError("mean of empty range");
    double s = 0.0;
    for (double v : values) s += v;
    return s / static_cast<double>(values.size());
}

// Population standard deviation.
inline double stddev_of(std::span<const double> values) {
    const double m = mean_of(values);
    double s = 0.0;
    for (double v : values) s += (v - m) * (v - m);
    return std::sqrt(s / static_cast<double>(values.size()));
}

}  // namespace ncad
