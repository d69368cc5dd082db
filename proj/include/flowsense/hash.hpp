#pragma once

#include <cstdint>
#include <string>

namespace flowsense {

// FNV-1a 64-bit. Non-cryptographic; used for manifest provenance checks only.
inline uint64_t fnv1a64(const void* data, size_t n, uint64_t h = 0xCBF29CE484222325ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001B3ull;
  }
  return h;
}

uint64_t fnv1a64_file(const std::string& path);
std::string hash_hex(uint64_t h);

}  // namespace flowsense
