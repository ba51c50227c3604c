#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace statiocl {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Derives a stream seed from a global seed and a list of coordinates:
/// h0 = splitmix64(global), h_{k+1} = splitmix64(h_k ^ c_k). Order matters.
constexpr std::uint64_t mix_seed(std::uint64_t global, std::initializer_list<std::uint64_t> coords) noexcept {
    std::uint64_t h = splitmix64(global);
    for (std::uint64_t c : coords) h = splitmix64(h ^ c);
    return h;
}

/// Stream tags keep independent consumers of the same coordinates apart.
namespace stream {
inline constexpr std::uint64_t kWeakView = 0x7765616B;     // "weak"
inline constexpr std::uint64_t kStrongView = 0x7374726E;   // "strn"
inline constexpr std::uint64_t kShuffle = 0x73687566;      // "shuf"
inline constexpr std::uint64_t kInit = 0x696E6974;         // "init"
inline constexpr std::uint64_t kSplit = 0x73706C74;        // "splt"
inline constexpr std::uint64_t kSynth = 0x73796E74;        // "synt"
inline constexpr std::uint64_t kProbe = 0x70726F62;        // "prob"
inline constexpr std::uint64_t kSubsample = 0x73756273;    // "subs"
}  // namespace stream

inline Rng make_rng(std::uint64_t global, std::initializer_list<std::uint64_t> coords) {
    return Rng(mix_seed(global, coords));
}

}  // namespace statiocl
