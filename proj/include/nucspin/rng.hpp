#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace nucspin::rng {

// SplitMix64 finalizer; also used as the mixing function for stream derivation.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

// Named path components for hierarchical stream derivation. Each experiment
// derives child streams keyed by (tag, grid point, shot, ...) so sampling is
// independent of evaluation order.
enum class StreamTag : std::uint64_t {
    rabi = 1,
    ramsey = 2,
    tomography = 3,
    t1_down = 4,
    t1_up = 5,
    t2 = 6,
    bootstrap = 7,
    generic = 8,
};

// Counter-based deterministic random stream. Copyable value type; a copy
// replays the same sequence. Children are derived by hashing, never by
// drawing, so sibling streams are independent of how much the parent drew.
class Stream {
  public:
    explicit Stream(std::uint64_t seed)
        : key_(mix64(seed ^ 0x5851F42D4C957F2Dull)), counter_(0) {}

    Stream child(std::uint64_t index) const {
        Stream s(*this);
        s.key_ = mix64(key_ ^ mix64(index + 0xD1B54A32D192ED03ull));
        s.counter_ = 0;
        return s;
    }
    Stream child(StreamTag tag) const { return child(static_cast<std::uint64_t>(tag) ^ 0xA24BAED4963EE407ull); }

    std::uint64_t next_u64() {
        ++counter_;
        std::uint64_t z = key_ + counter_ * 0x9E3779B97F4A7C15ull;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1), 53-bit resolution.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    bool bernoulli(double p) {
        if (p <= 0.0) return false;
        if (p >= 1.0) return true;
        return uniform01() < p;
    }

    // Standard normal via Box-Muller.
    double gaussian() {
        const double u1 = 1.0 - uniform01();
        const double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(kGaussTwoPi * u2);
    }

    // Exact Binomial(n, p) sample. Inversion for small means, Hormann's BTRS
    // transformed rejection otherwise; both consume uniforms from this stream
    // only, so results are reproducible per stream.
    long binomial(long n, double p) {
        if (n < 0) throw std::invalid_argument("binomial: negative trial count");
        if (n == 0 || p <= 0.0) return 0;
        if (p >= 1.0) return n;
        const bool flip = p > 0.5;
        const double q = flip ? 1.0 - p : p;
        const long k = (static_cast<double>(n) * q < 10.0) ? binomial_inversion(n, q)
                                                           : binomial_btrs(n, q);
        return flip ? n - k : k;
    }

  private:
    static constexpr double kGaussTwoPi = 6.28318530717958647692;

    long binomial_inversion(long n, double p) {
        const double r = p / (1.0 - p);
        double pk = std::exp(static_cast<double>(n) * std::log1p(-p));
        double cdf = pk;
        const double u = uniform01();
        long k = 0;
        while (u > cdf && k < n) {
            ++k;
            pk *= r * static_cast<double>(n - k + 1) / static_cast<double>(k);
            cdf += pk;
            if (pk < 1e-320) break;  // tail exhausted below double range
        }
        return k;
    }

    long binomial_btrs(long n, double p) {
        // Hormann (1993), algorithm BTRS; valid for n*p >= 10, p <= 0.5.
        const double np = static_cast<double>(n) * p;
        const double q = 1.0 - p;
        const double spq = std::sqrt(np * q);
        const double b = 1.15 + 2.53 * spq;
        const double a = -0.0873 + 0.0248 * b + 0.01 * p;
        const double c = np + 0.5;
        const double vr = 0.92 - 4.2 / b;
        const double urvr = 0.86 * vr;
        const double alpha = (2.83 + 5.1 / b) * spq;
        const double lpq = std::log(p / q);
        const long m = static_cast<long>(std::floor((static_cast<double>(n) + 1.0) * p));
        const double h = std::lgamma(static_cast<double>(m) + 1.0) +
                         std::lgamma(static_cast<double>(n - m) + 1.0);
        for (;;) {
            double v = uniform01();
            double u;
            if (v <= urvr) {
                u = v / vr - 0.43;
                return static_cast<long>(
                    std::floor((2.0 * a / (0.5 - std::abs(u)) + b) * u + c));
            }
            if (v >= vr) {
                u = uniform01() - 0.5;
            } else {
                u = v / vr - 0.93;
                u = (u < 0.0 ? -0.5 : 0.5) - u;
                v = uniform01() * vr;
            }
            const double us = 0.5 - std::abs(u);
            const long k = static_cast<long>(std::floor((2.0 * a / us + b) * u + c));
            if (k < 0 || k > n) continue;
            v = v * alpha / (a / (us * us) + b);
            if (std::log(v) <= h - std::lgamma(static_cast<double>(k) + 1.0) -
                                   std::lgamma(static_cast<double>(n - k) + 1.0) +
                                   static_cast<double>(k - m) * lpq) {
                return k;
            }
        }
    }

    std::uint64_t key_;      // path identity, fixed at derivation
    std::uint64_t counter_;  // draws consumed
};

}  // namespace nucspin::rng
