#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace evadkit {

// Error categories used across the file formats. Each failure mode the
// formats can produce maps to one distinct Kind so callers can dispatch
// without string matching.
class IoError : public std::runtime_error {
public:
    enum class Kind {
        BadMagic,
        Truncated,
        BadChecksum,
        Parse,
        OutOfBounds,
        Missing,
    };

    IoError(Kind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

// Deterministic RNG. std::mt19937_64 is bit-exact per the standard; the
// distribution mappings below are hand-rolled because the standard library
// distributions are not portable across implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform double in [0,1) with 53 random bits.
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        return static_cast<std::uint64_t>(uniform() * static_cast<double>(n)) % n;
    }

    // Standard normal via Box-Muller, one spare cached.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        while (u1 <= 0.0) u1 = uniform();
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Stable sub-seed derivation: mixes a master seed with a label so that
// per-video / per-purpose streams are independent and reproducible.
std::uint64_t derive_seed(std::uint64_t master, const std::string& label);

std::uint32_t crc32(const void* data, std::size_t size, std::uint32_t seed = 0);

// Round half up, the fixed rounding convention of the toolkit.
inline std::int64_t round_half_up(double v) {
    return static_cast<std::int64_t>(std::floor(v + 0.5));
}

// Fixed-format float printing: shortest text that round-trips the double.
std::string format_double(double v);

// Thread cap from EVADKIT_THREADS (0 or unset = hardware concurrency).
unsigned thread_cap();

// Runs fn(i) for i in [0,n). Results must be index-addressed; the schedule
// is unspecified but every invariant-relevant output is per-index.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace evadkit
