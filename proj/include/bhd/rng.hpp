#pragma once

#include <cstdint>
#include <random>

namespace bhd {

// splitmix64 (Steele, Lea, Flood 2014). Used only to derive independent
// per-trajectory seeds from (base_seed, trajectory_index); the trajectory
// stream itself is std::mt19937_64, which the standard pins bit-exactly.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// Decorrelates nearby (seed, index) pairs; identical inputs always map to
// the identical stream, which is what makes parallel ensembles replayable.
inline std::uint64_t trajectory_seed(std::uint64_t base_seed, std::uint64_t index) {
    return splitmix64(splitmix64(base_seed) ^ splitmix64(index + 1));
}

class RandomStream {
public:
    explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

    // Uniform on [0,1) with 53 random bits; avoids std::uniform_real_distribution,
    // whose output is implementation-defined.
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
};

} // namespace bhd
