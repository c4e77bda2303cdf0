#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <istream>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace gpxharvest::index {

/// One GPX-bearing hit from a crawl index: where the record lives inside a
/// WARC archive and what the crawler detected it as.
struct CandidateRecord {
    std::string url;
    std::string mime_detected;  // lowercase, may be empty
    std::string warc_file;      // crawl-relative path
    std::uint64_t warc_offset = 0;
    std::uint64_t warc_len = 0;  // > 0
    std::string crawl_id;        // e.g. "CC-MAIN-2024-10", empty when unknown

    bool operator==(const CandidateRecord&) const = default;
};

void to_json(nlohmann::json& j, const CandidateRecord& r);
void from_json(const nlohmann::json& j, CandidateRecord& r);

struct ScanCounts {
    std::uint64_t lines_read = 0;
    std::uint64_t candidates = 0;
    std::uint64_t malformed = 0;
    std::uint64_t non_candidates = 0;  // well-formed lines that are not GPX

    ScanCounts& operator+=(const ScanCounts& o) {
        lines_read += o.lines_read;
        candidates += o.candidates;
        malformed += o.malformed;
        non_candidates += o.non_candidates;
        return *this;
    }
};

class ShardError : public std::runtime_error {
public:
    ShardError(std::string shard, const std::string& what)
        : std::runtime_error("index shard " + shard + ": " + what), shard_(std::move(shard)) {}
    const std::string& shard() const noexcept { return shard_; }

private:
    std::string shard_;
};

/// True for "scheme://host..." with an alphabetic scheme and non-empty host.
bool is_absolute_url(std::string_view url);

/// Extracts the release label ("CC-MAIN-YYYY-WW") from a crawl-relative path.
std::string crawl_id_from_path(std::string_view warc_file);

/// Parses one CDX-J line ("<surt> <timestamp> <json>"). Blank and '#'
/// comment lines yield nothing without touching the counter; any other
/// line that cannot produce a valid record bumps `malformed`.
std::optional<CandidateRecord> parse_index_line(std::string_view line, std::uint64_t& malformed);

/// MIME contains "gpx", or the URL path (query and fragment removed) ends
/// in ".gpx"; both tests ignore case.
bool is_gpx_candidate(const CandidateRecord& record);

using CandidateSink = std::function<void(CandidateRecord&&)>;

/// Streams lines from `source`, forwarding GPX candidates in input order.
ScanCounts scan_index(std::istream& source, const CandidateSink& sink);

/// Opens a plain or gzip-compressed shard file and scans it.
ScanCounts scan_shard_file(const std::filesystem::path& shard, const CandidateSink& sink);

/// Same, over shard bytes already in memory (e.g. fetched over HTTP).
ScanCounts scan_shard_bytes(std::string_view shard_name, std::string_view bytes, const CandidateSink& sink);

/// Expands a shell glob to a sorted list of paths; no match is an error.
std::vector<std::filesystem::path> expand_glob(const std::string& pattern);

}  // namespace gpxharvest::index
