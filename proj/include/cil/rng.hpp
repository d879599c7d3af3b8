#ifndef CIL_RNG_HPP
#define CIL_RNG_HPP

#include <cstdint>
#include <random>
#include <string_view>

namespace cil {

using Rng = std::mt19937_64;

/// Derive a child seed from a base seed, a component tag and an index.
/// All randomness in the pipeline flows from one user-visible seed through
/// this function, so every component gets an independent, reproducible stream.
inline std::uint64_t derive_seed(std::uint64_t base, std::string_view tag,
                                 std::uint64_t index = 0) {
    // FNV-1a over the tag, then splitmix64 finalization.
    std::uint64_t h = 1469598103934665603ULL;
    for (char c : tag) {
        h ^= static_cast<std::uint8_t>(c);
        h *= 1099511628211ULL;
    }
    std::uint64_t z = base ^ h ^ (index * 0x9E3779B97F4A7C15ULL);
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

}  // namespace cil

#endif
