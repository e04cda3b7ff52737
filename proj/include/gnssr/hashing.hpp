#pragma once

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <string>
#include <string_view>

namespace gnssr {

// FNV-1a, 64-bit. Used for config/data/weights fingerprints that end up in
// provenance attributes, so the constants must never change.
inline constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ull;
inline constexpr std::uint64_t kFnvPrime = 0x100000001b3ull;

inline std::uint64_t fnv1a(const void* data, std::size_t n,
                           std::uint64_t h = kFnvOffset) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= kFnvPrime;
  }
  return h;
}

inline std::uint64_t fnv1a(std::string_view s, std::uint64_t h = kFnvOffset) {
  return fnv1a(s.data(), s.size(), h);
}

std::uint64_t fnv1a_file(const std::filesystem::path& path);

// splitmix64: cheap stateless mixer for keyed deterministic draws.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Key-chaining helpers: hash_key(seed, a, b, ...) folds integer tags into one
// well-mixed 64-bit value.
inline std::uint64_t hash_key(std::uint64_t h) { return splitmix64(h); }

template <typename... Rest>
std::uint64_t hash_key(std::uint64_t h, std::uint64_t next, Rest... rest) {
  return hash_key(splitmix64(h ^ (next + 0x9e3779b97f4a7c15ull)), rest...);
}

inline std::uint64_t hash_key_str(std::uint64_t h, std::string_view tag) {
  return splitmix64(h ^ fnv1a(tag));
}

// Uniform double in [0, 1) from a hashed key.
inline double hash01(std::uint64_t key) {
  return static_cast<double>(key >> 11) * 0x1.0p-53;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return std::string(buf);
}

}  // namespace gnssr
