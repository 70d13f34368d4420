#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace posuite {

// splitmix64, used to derive independent sub-seeds from one master seed.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Sub-seed for a named purpose ("env", "wrapper", "agent", "action", "eval").
// Deterministic in (master, purpose); distinct purposes give independent
// streams.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view purpose) {
    return splitmix64(master ^ fnv1a(purpose));
}

inline std::mt19937_64 make_rng(std::uint64_t master, std::string_view purpose) {
    return std::mt19937_64(derive_seed(master, purpose));
}

}  // namespace posuite
