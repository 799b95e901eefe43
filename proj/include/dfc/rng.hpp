#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace dfc {

using Rng = std::mt19937_64;

// Counter-based split of one root seed into named, indexed substreams.
// substream(seed, "env", 3) is stable across runs and independent of call
// order, so episode i always sees the same randomness.
std::uint64_t derive_seed(std::uint64_t root, std::string_view name,
                          std::uint64_t index = 0);

inline Rng substream(std::uint64_t root, std::string_view name,
                     std::uint64_t index = 0) {
  return Rng(derive_seed(root, name, index));
}

double uniform01(Rng& rng);
double normal01(Rng& rng);

}  // namespace dfc
