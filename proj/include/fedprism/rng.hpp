#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace fedprism {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

// Derives an independent sub-seed from a parent seed and a path of tags,
// e.g. derive_seed(master, {round, client_id, 2}).
inline std::uint64_t derive_seed(std::uint64_t parent, std::initializer_list<std::uint64_t> tags) {
    std::uint64_t s = splitmix64(parent);
    for (auto t : tags) s = splitmix64(s ^ splitmix64(t + 0x632BE59BD9B4E019ull));
    return s;
}

// Stream tags so seeds from different subsystems never collide.
namespace seed_tag {
inline constexpr std::uint64_t kInit = 1;
inline constexpr std::uint64_t kData = 2;
inline constexpr std::uint64_t kPartition = 3;
inline constexpr std::uint64_t kSampling = 4;
inline constexpr std::uint64_t kClient = 5;
inline constexpr std::uint64_t kKMeans = 6;
}  // namespace seed_tag

}  // namespace fedprism
