#pragma once

#include <array>
#include <cstdint>
#include <cmath>
#include <utility>

namespace kips::rng {

// Counter-based random number generation (Philox4x32-10). Every draw is a
// pure function of (seed, particle, step, stream), so simulated paths do not
// depend on thread scheduling and any draw can be regenerated in isolation.

namespace detail {
inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
    const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(p >> 32);
    lo = static_cast<std::uint32_t>(p);
}
}  // namespace detail

inline std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                               std::array<std::uint32_t, 2> key) {
    constexpr std::uint32_t M0 = 0xD2511F53u, M1 = 0xCD9E8D57u;
    constexpr std::uint32_t W0 = 0x9E3779B9u, W1 = 0xBB67AE85u;
    for (int r = 0; r < 10; ++r) {
        std::uint32_t hi0, lo0, hi1, lo1;
        detail::mulhilo(M0, ctr[0], hi0, lo0);
        detail::mulhilo(M1, ctr[2], hi1, lo1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        key[0] += W0;
        key[1] += W1;
    }
    return ctr;
}

// Independent sub-streams of one seed. Values are folded into the Philox key,
// so streams never share counters.
enum class Stream : std::uint32_t {
    Noise = 1,       // Brownian increments of the particle system
    Init = 2,        // initial conditions
    RefNoise = 3,    // independent reference system in the coupled simulation
    Probe = 4,       // assumption / rank probes
    Start = 5,       // optimizer multi-start points
    Synthetic = 6,   // synthetic draws in diagnostics self-tests
};

inline std::array<std::uint64_t, 2> bits128(std::uint64_t seed, std::uint64_t particle,
                                            std::uint64_t step, Stream stream) {
    const std::array<std::uint32_t, 4> ctr = {
        static_cast<std::uint32_t>(particle), static_cast<std::uint32_t>(particle >> 32),
        static_cast<std::uint32_t>(step), static_cast<std::uint32_t>(step >> 32)};
    const std::array<std::uint32_t, 2> key = {
        static_cast<std::uint32_t>(seed),
        static_cast<std::uint32_t>(seed >> 32) ^
            (static_cast<std::uint32_t>(stream) * 0x9E3779B9u)};
    const auto r = philox4x32(ctr, key);
    return {(static_cast<std::uint64_t>(r[0]) << 32) | r[1],
            (static_cast<std::uint64_t>(r[2]) << 32) | r[3]};
}

inline double u01_open(std::uint64_t b) {  // (0, 1]
    return static_cast<double>((b >> 11) + 1) * 0x1.0p-53;
}

inline double u01(std::uint64_t b) {  // [0, 1)
    return static_cast<double>(b >> 11) * 0x1.0p-53;
}

// One uniform in [0,1) per (seed, particle, step, stream).
inline double uniform(std::uint64_t seed, std::uint64_t particle, std::uint64_t step, Stream s) {
    return u01(bits128(seed, particle, step, s)[0]);
}

// Box-Muller pair of independent standard normals.
inline std::pair<double, double> normal_pair(std::uint64_t seed, std::uint64_t particle,
                                             std::uint64_t step, Stream s) {
    const auto b = bits128(seed, particle, step, s);
    const double u1 = u01_open(b[0]);
    const double u2 = u01(b[1]);
    const double rad = std::sqrt(-2.0 * std::log(u1));
    const double ang = 6.28318530717958647692528676656 * u2;
    return {rad * std::cos(ang), rad * std::sin(ang)};
}

inline double normal(std::uint64_t seed, std::uint64_t particle, std::uint64_t step, Stream s) {
    return normal_pair(seed, particle, step, s).first;
}

// splitmix64-style mix for deriving child seeds (per replicate, per cell, ...).
inline std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
    std::uint64_t z = a + 0x9E3779B97F4A7C15ull * (b + 0x632BE59BD9B4E019ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

}  // namespace kips::rng
