#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace mecopt {

// Stream tags keep independent random quantities on disjoint generators, so
// adding a UE or a realization never perturbs the draws of existing ones.
enum class Stream : std::uint32_t {
  kBsCount = 1,
  kBsPosition,
  kUeParent,
  kUePosition,
  kShadowing,
  kSmallScale,
  kPreferences,
  kRequests,
  kScaSamples,
  kBeamInit,
  kRandomPlacement,
  kClustering,
};

/// Returns a generator seeded from (seed, stream, indices...). Same inputs
/// give the same sequence on every platform that shares the standard library.
inline std::mt19937_64 make_stream(std::uint64_t seed, Stream stream,
                                   std::initializer_list<std::uint64_t> indices = {}) {
  std::vector<std::uint32_t> words;
  words.reserve(4 + 2 * indices.size());
  words.push_back(static_cast<std::uint32_t>(seed));
  words.push_back(static_cast<std::uint32_t>(seed >> 32));
  words.push_back(static_cast<std::uint32_t>(stream));
  for (auto v : indices) {
    words.push_back(static_cast<std::uint32_t>(v));
    words.push_back(static_cast<std::uint32_t>(v >> 32));
  }
  std::seed_seq seq(words.begin(), words.end());
  return std::mt19937_64(seq);
}

}  // namespace mecopt
