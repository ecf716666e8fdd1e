#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace mcalf {

// Purpose tags for per-rollout random substreams. The numeric values are part
// of the seed-derivation rule and must not be renumbered.
enum class StreamPurpose : std::uint64_t {
    Initial = 1,
    Environment = 2,
    Acceptance = 3,
    BasePolicy = 4,
    AltPolicy = 5,
};

// SplitMix64 finalizer; used only to derive substream seeds.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Seed of substream (master, rollout, purpose). Pure function of its inputs, so
// any rollout can be replayed in isolation and in any order.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t rollout,
                                    StreamPurpose purpose) noexcept {
    return mix64(mix64(mix64(master) ^ rollout) + static_cast<std::uint64_t>(purpose));
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    // Uniform on [0, 1) with 53 bits of resolution. Never returns 1.0.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Index drawn from a discrete distribution with the given weights.
    std::size_t categorical(std::span<const double> weights);

    std::uint64_t next_u64() { return engine_(); }

private:
    std::mt19937_64 engine_;
};

struct RolloutStreams {
    Rng initial;
    Rng environment;
    Rng acceptance;
    Rng base;
    Rng alternative;

    static RolloutStreams derive(std::uint64_t master_seed, std::uint64_t rollout_index) {
        return RolloutStreams{
            Rng(derive_seed(master_seed, rollout_index, StreamPurpose::Initial)),
            Rng(derive_seed(master_seed, rollout_index, StreamPurpose::Environment)),
            Rng(derive_seed(master_seed, rollout_index, StreamPurpose::Acceptance)),
            Rng(derive_seed(master_seed, rollout_index, StreamPurpose::BasePolicy)),
            Rng(derive_seed(master_seed, rollout_index, StreamPurpose::AltPolicy)),
        };
    }
};

}  // namespace mcalf
