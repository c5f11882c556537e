#pragma once

#include <cstdint>
#include <cstddef>
#include <vector>

namespace pointcolor {

// splitmix64 finalizer; full avalanche on 64 bits.
constexpr std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Derives an independent stream key from a parent key and a stream id.
constexpr std::uint64_t rng_stream(std::uint64_t key, std::uint64_t stream) {
    return mix64(key ^ mix64(stream + 0x6a09e667f3bcc909ULL));
}

// Counter-based generator: the n-th draw is a pure function of (key, n),
// so independent consumers keyed by (seed, frame, op) never interact and
// results do not depend on scheduling.
class CounterRng {
public:
    explicit CounterRng(std::uint64_t key) : key_(key) {}

    std::uint64_t next_u64() { return mix64(key_ ^ mix64(counter_++)); }

    // Uniform in [0, 1) with 53 random bits.
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform integer in [0, n); n must be positive.
    std::uint64_t next_index(std::uint64_t n) {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    // Standard normal via Box-Muller; consumes two uniforms per draw.
    double next_normal();

    // Fisher-Yates permutation of {0, ..., n-1}.
    std::vector<std::size_t> permutation(std::size_t n);

    // The first m entries of a random permutation of {0, ..., n-1}; m <= n.
    std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t m);

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

// Stream ids used to key training-time randomness. Keeping them in one
// place guards against accidental stream collisions between subsystems.
namespace streams {
constexpr std::uint64_t kAugmentFlip = 1;
constexpr std::uint64_t kAugmentRotate = 2;
constexpr std::uint64_t kAugmentScale = 3;
constexpr std::uint64_t kAugmentSample = 4;
constexpr std::uint64_t kAugmentShuffle = 5;
constexpr std::uint64_t kParamInit = 10;
constexpr std::uint64_t kEpochShuffle = 11;
constexpr std::uint64_t kFrameAugment = 12;
constexpr std::uint64_t kFrameHints = 13;
constexpr std::uint64_t kEvalHints = 14;
constexpr std::uint64_t kSceneGeometry = 20;
constexpr std::uint64_t kSceneColor = 21;
constexpr std::uint64_t kSceneNoise = 22;
constexpr std::uint64_t kPaletteInit = 30;
constexpr std::uint64_t kPixelSample = 31;
} // namespace streams

} // namespace pointcolor
