#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace gpxharvest {

using Bytes = std::vector<std::uint8_t>;
using Sha256Digest = std::array<std::uint8_t, 32>;

class GzipError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// True when the buffer starts with the gzip magic bytes 1f 8b.
bool is_gzip(std::span<const std::uint8_t> data);

/// Inflates exactly one gzip member. Trailing bytes after the member are
/// ignored, so a member sliced out of a multi-member WARC decodes cleanly.
Bytes gunzip_member(std::span<const std::uint8_t> data);

/// Inflates every concatenated member.
Bytes gunzip_all(std::span<const std::uint8_t> data);

Bytes gzip_compress(std::span<const std::uint8_t> data);

Sha256Digest sha256(std::span<const std::uint8_t> data);
std::string to_hex(std::span<const std::uint8_t> data);

Bytes to_bytes(std::string_view s);
std::string_view as_string_view(std::span<const std::uint8_t> data);

Bytes read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> data);
void write_file(const std::filesystem::path& path, std::string_view data);

/// Writes to a sibling temp file then renames it over the target.
void write_file_atomic(const std::filesystem::path& path, std::string_view data);

std::string to_lower_ascii(std::string_view s);
bool iequals_ascii(std::string_view a, std::string_view b);
bool icontains_ascii(std::string_view haystack, std::string_view needle);
bool iends_with_ascii(std::string_view s, std::string_view suffix);
std::string_view trim(std::string_view s);

/// Number of Unicode scalar values in a UTF-8 string.
std::size_t utf8_length(std::string_view s);

/// Appends a code point as UTF-8.
void append_utf8(std::string& out, char32_t cp);

/// Decodes one code point starting at `pos`, advancing it. Invalid
/// sequences decode to U+FFFD and advance by one byte.
char32_t decode_utf8(std::string_view s, std::size_t& pos);

std::string getenv_or(const char* name, std::string fallback);

}  // namespace gpxharvest
