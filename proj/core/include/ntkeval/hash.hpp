#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace ntkeval {

// FNV-1a, 64-bit. Used for stable record ids, cache keys and seed derivation;
// must stay identical across runs and platforms.
inline constexpr uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
inline constexpr uint64_t kFnvPrime = 0x100000001b3ULL;

constexpr uint64_t fnv1a(std::string_view bytes, uint64_t h = kFnvOffset) {
    for (unsigned char c : bytes) {
        h ^= c;
        h *= kFnvPrime;
    }
    return h;
}

constexpr uint64_t fnv1a_u64(uint64_t v, uint64_t h = kFnvOffset) {
    for (int i = 0; i < 8; ++i) {
        h ^= (v >> (8 * i)) & 0xff;
        h *= kFnvPrime;
    }
    return h;
}

// splitmix64 finalizer; spreads FNV output over the full 64-bit space.
constexpr uint64_t mix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Deterministic seed streams: derive_seed(root, "gen", question_id) etc.
// Children derived with distinct tags are independent for practical purposes.
inline uint64_t derive_seed(uint64_t root, std::string_view tag) {
    return mix64(fnv1a(tag, fnv1a_u64(root)));
}

inline uint64_t derive_seed(uint64_t root, std::string_view tag, uint64_t index) {
    return mix64(fnv1a_u64(index, fnv1a(tag, fnv1a_u64(root))));
}

inline uint64_t derive_seed(uint64_t root, std::string_view tag, std::string_view key) {
    return mix64(fnv1a(key, fnv1a(tag, fnv1a_u64(root))));
}

inline std::string hex64(uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<size_t>(i)] = digits[v & 0xf];
        v >>= 4;
    }
    return out;
}

}  // namespace ntkeval
