#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace agirisk {

// FNV-1a 64-bit. Used for dataset content hashes and config hashes; not
// cryptographic.
constexpr std::uint64_t fnv1a64(std::string_view bytes,
                                std::uint64_t seed = 0xcbf29ce484222325ull) {
  std::uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string hash_hex(std::uint64_t h);

// Hash of a whole file's bytes; throws IoError if unreadable.
std::uint64_t hash_file(const std::string& path);

}  // namespace agirisk
