#include "vvt/checksum.hpp"

#include <cstdio>
#include <fstream>
#include <vector>

#include "vvt/errors.hpp"

namespace vvt {

std::uint64_t fnv1a64_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file for checksum: " + path);
  std::uint64_t h = 1469598103934665603ull;
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    const std::streamsize got = in.gcount();
    if (got > 0) h = fnv1a64(buf.data(), static_cast<std::size_t>(got), h);
  }
  return h;
}

std::string to_hex(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace vvt
