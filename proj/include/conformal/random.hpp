#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace conformal {

/// Seed used when none is given, so that every default run is reproducible.
inline constexpr std::uint64_t kDefaultSeed = 20240601;

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Counter-based substream key: a pure function of (seed, counters...).
inline std::uint64_t substream_key(std::uint64_t seed, std::initializer_list<std::uint64_t> counters) {
    std::uint64_t h = splitmix64(seed);
    for (std::uint64_t c : counters) h = splitmix64(h ^ splitmix64(c + 0x632be59bd9b4e019ULL));
    return h;
}

/// Generator for one substream. Uniform draws use 53 bits and avoid the endpoints,
/// so inverse-CDF sampling never sees 0 or 1.
class Stream {
public:
    explicit Stream(std::uint64_t key) : engine_(key) {}
    Stream(std::uint64_t seed, std::initializer_list<std::uint64_t> counters)
        : engine_(substream_key(seed, counters)) {}

    double uniform() { return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53; }

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
};

}  // namespace conformal
