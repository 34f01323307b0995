#pragma once

#include <cstdint>
#include <random>

namespace fase {

// splitmix64 step (Vigna). Used for seed mixing only, never as the sampling
// engine itself.
inline std::uint64_t splitmix64_next(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    std::uint64_t s = a;
    s = splitmix64_next(s) ^ (b + 0x9e3779b97f4a7c15ULL);
    return splitmix64_next(s);
}

// Deterministic substream id for (seed, index, lane). Per-signal generation
// draws from its own substream, so results do not depend on the order in
// which signals are produced.
inline std::uint64_t substream(std::uint64_t seed, std::uint64_t index, std::uint64_t lane = 0) {
    return mix_seed(mix_seed(seed, index), lane);
}

class Rng {
public:
    explicit Rng(std::uint64_t stream_id) : engine_(stream_id) {}

    double gaussian() { return normal_(engine_); }
    double uniform() { return uniform_(engine_); }
    std::uint64_t next_u64() { return engine_(); }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace fase
