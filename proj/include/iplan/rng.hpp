#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace iplan {

// All randomness in a run flows from one master seed through named streams,
// so that independent components (env, per-agent policy, dropout, eval)
// never perturb each other's draws.

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

inline uint64_t hash_str(std::string_view s) {
    uint64_t h = 0xcbf29ce484222325ull;  // FNV-1a
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline uint64_t mix_seed(std::initializer_list<uint64_t> parts) {
    uint64_t h = 0x6a09e667f3bcc909ull;
    for (uint64_t p : parts) h = splitmix64(h ^ splitmix64(p));
    return h;
}

inline std::mt19937_64 make_rng(uint64_t master, std::string_view stream, uint64_t a = 0,
                                uint64_t b = 0) {
    return std::mt19937_64(mix_seed({master, hash_str(stream), a, b}));
}

}  // namespace iplan
