#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

namespace gnssr::io {

std::vector<std::byte> read_bytes(const std::filesystem::path& path);

// Creates parent directories, writes to a temporary sibling and renames into
// place, so readers never observe a half-written file.
void write_bytes_atomic(const std::filesystem::path& path,
                        std::span<const std::byte> data);

std::string read_text(const std::filesystem::path& path);
void write_text_atomic(const std::filesystem::path& path,
                       const std::string& text);

}  // namespace gnssr::io
