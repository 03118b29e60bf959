#ifndef TILTFORGE_RNG_HPP
#define TILTFORGE_RNG_HPP

#include <cmath>
#include <cstdint>

namespace tiltforge::rng {

// SplitMix64 finalizer. Used as the output hash of the counter streams below,
// so every draw is a pure function of (seed, stream, counter).
inline std::uint64_t mix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t stream_key(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
    return mix(mix(mix(seed) ^ a) ^ b);
}

/// Derives an independent seed from a base seed, for pipeline stages that
/// need their own noise draws.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
    return mix(seed ^ mix(tag));
}

/// Counter-based generator: value(i) = mix(key + i * odd_constant). Streams
/// with distinct keys are independent; draws do not depend on thread schedule.
class Stream {
public:
    explicit Stream(std::uint64_t key) : key_(key) {}
    Stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0)
        : key_(stream_key(seed, a, b)) {}

    std::uint64_t next_u64() { return mix(key_ + (counter_++) * 0xd1342543de82ef95ULL); }

    /// Uniform double in (0, 1].
    double next_unit() {
        return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
    }

    /// Standard normal via Box-Muller; pairs are cached.
    double next_normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = next_unit();
        const double u2 = next_unit();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

private:
    std::uint64_t key_ = 0;
    std::uint64_t counter_ = 0;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

} // namespace tiltforge::rng

#endif
