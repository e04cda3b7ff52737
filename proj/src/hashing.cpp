#include "gnssr/hashing.hpp"

#include <fstream>
#include <stdexcept>

namespace gnssr {

std::uint64_t fnv1a_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot hash missing file: " + path.string());
  }
  char buf[1 << 16];
  std::uint64_t h = kFnvOffset;
  while (in) {
    in.read(buf, sizeof buf);
    h = fnv1a(buf, static_cast<std::size_t>(in.gcount()), h);
  }
  return h;
}

}  // namespace gnssr
