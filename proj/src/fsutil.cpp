#include "gnssr/fsutil.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace gnssr::io {

namespace fs = std::filesystem;

std::vector<std::byte> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open for reading: " + path.string());
  }
  in.seekg(0, std::ios::end);
  const auto n = static_cast<std::size_t>(in.tellg());
  in.seekg(0);
  std::vector<std::byte> buf(n);
  if (n > 0) {
    in.read(reinterpret_cast<char*>(buf.data()),
            static_cast<std::streamsize>(n));
  }
  if (!in) {
    throw std::runtime_error("short read: " + path.string());
  }
  return buf;
}

void write_bytes_atomic(const fs::path& path,
                        std::span<const std::byte> data) {
  const fs::path dir = path.parent_path();
  if (!dir.empty()) fs::create_directories(dir);
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw std::runtime_error("cannot open for writing: " + tmp.string());
    }
    out.write(reinterpret_cast<const char*>(data.data()),
              static_cast<std::streamsize>(data.size()));
    out.flush();
    if (!out) {
      std::remove(tmp.string().c_str());
      throw std::runtime_error("short write: " + tmp.string());
    }
  }
  fs::rename(tmp, path);
}

std::string read_text(const fs::path& path) {
  const auto bytes = read_bytes(path);
  return std::string(reinterpret_cast<const char*>(bytes.data()),
                     bytes.size());
}

void write_text_atomic(const fs::path& path, const std::string& text) {
  write_bytes_atomic(path,
                     std::span(reinterpret_cast<const std::byte*>(text.data()),
                               text.size()));
}

}  // namespace gnssr::io
