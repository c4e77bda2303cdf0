#pragma once

#include "gpxharvest/index_scan.hpp"
#include "gpxharvest/util.hpp"

#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>

namespace gpxharvest::warc {

/// The raw bytes of one WARC record as stored in the archive: a single
/// gzip member.
struct WarcSlice {
    Bytes record_bytes;
    index::CandidateRecord candidate;
};

/// "bytes=<offset>-<offset+length-1>". Throws std::invalid_argument on an
/// empty range.
std::string build_range_header(std::uint64_t offset, std::uint64_t length);

enum class ExtractErrorKind {
    decode_error,    // not gzip, truncated, or unparsable envelope
    skipped_record,  // well-formed but not a 200 response
};

class ExtractError : public std::runtime_error {
public:
    ExtractError(ExtractErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ExtractErrorKind kind() const noexcept { return kind_; }

private:
    ExtractErrorKind kind_;
};

/// Case-insensitive header map; the last occurrence of a name wins.
struct HeaderBlock {
    std::string first_line;
    std::map<std::string, std::string> fields;  // keys lowercased

    const std::string* find(const std::string& lower_name) const;
};

/// Parses a CRLF (or bare LF) delimited header block terminated by a blank
/// line. Returns the offset just past the terminator.
std::size_t parse_header_block(std::string_view data, HeaderBlock& out);

/// Decodes a chunked HTTP body.
Bytes dechunk(std::string_view body);

/// Unwraps gzip -> WARC response -> HTTP 200 and returns the HTTP body.
Bytes extract_payload(const WarcSlice& slice);
Bytes extract_payload(std::span<const std::uint8_t> record_bytes);

}  // namespace gpxharvest::warc
