#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace uwf {

/// 64-bit FNV-1a over a byte range.
std::uint64_t fnv1a64(const void* data, std::size_t n,
                      std::uint64_t seed = 14695981039346656037ull);

/// FNV-1a of a string, as 16 lowercase hex digits.
std::string fnv1a_hex(std::string_view bytes);

/// FNV-1a of a file's contents; unreadable file -> FormatError.
std::string file_fnv1a_hex(const std::string& path);

} // namespace uwf
