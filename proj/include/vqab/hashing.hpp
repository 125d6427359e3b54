#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace vqab {

/// Lowercase hex SHA-256 of `bytes`.
std::string sha256_hex(std::string_view bytes);

/// SHA-256 of a file's contents; throws IoError if unreadable.
std::string sha256_file(const std::filesystem::path& file);

}  // namespace vqab
