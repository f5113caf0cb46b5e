#pragma once

#include <cstdint>
#include <random>

namespace fovex {

// Every random draw in a run derives from one user seed. Each consumer owns a
// stream id; its engine is seeded with splitmix64(seed + stream).
namespace stream {
inline constexpr std::uint64_t model_init = 1;
inline constexpr std::uint64_t train_shuffle = 2;
inline constexpr std::uint64_t train_data = 3;
inline constexpr std::uint64_t test_data = 4;
inline constexpr std::uint64_t gaze = 5;
// Per-image streams are offset by the image's manifest index.
inline constexpr std::uint64_t scanpath_init = 1'000'000;
inline constexpr std::uint64_t random_cam = 2'000'000;
}  // namespace stream

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t stream_id) {
  return std::mt19937_64(splitmix64(seed + stream_id));
}

}  // namespace fovex
