#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace twinforge {

// Every stochastic draw in the library goes through an explicitly passed
// stream; nothing touches global RNG state.
using RandomStream = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Independent sub-stream seed for a named purpose ("layout", "explore", ...).
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view purpose) {
    std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
    for (unsigned char c : purpose) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return splitmix64(master ^ splitmix64(h));
}

inline RandomStream make_stream(std::uint64_t master, std::string_view purpose) {
    return RandomStream{derive_seed(master, purpose)};
}

}  // namespace twinforge
