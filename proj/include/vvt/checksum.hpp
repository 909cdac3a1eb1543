#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

namespace vvt {

inline std::uint64_t fnv1a64(const void* data, std::size_t len,
                             std::uint64_t seed = 1469598103934665603ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

std::uint64_t fnv1a64_file(const std::string& path);
std::string to_hex(std::uint64_t v);

}  // namespace vvt
