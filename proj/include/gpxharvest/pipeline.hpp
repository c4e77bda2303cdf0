#pragma once

#include "gpxharvest/elevation.hpp"
#include "gpxharvest/geo.hpp"
#include "gpxharvest/gpx.hpp"
#include "gpxharvest/index_scan.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace gpxharvest::pipeline {

/// Every numeric threshold the pipeline applies.
struct FilterConfig {
    double min_length_m = 500.0;
    double max_length_m = 100'000.0;
    double min_points_per_100m = 1.0;
    std::size_t desc_min_chars = 50;
    std::size_t desc_max_chars_exclusive = 2000;
    double circular_radius_m = 350.0;
    std::size_t rare_lang_cutoff = 5;  // 0 disables the corpus-level language filter
    double elevation_deadband_m = 0.0;

    /// Throws std::invalid_argument naming the offending field.
    void validate() const;
};

void to_json(nlohmann::json& j, const FilterConfig& c);
void from_json(const nlohmann::json& j, FilterConfig& c);

/// Exclusion reasons in stage order. The first failing rule names the
/// exclusion; a track is never counted under two reasons.
enum class Reason {
    malformed_index_line,
    not_candidate,
    fetch_failed,
    warc_decode_error,
    warc_skipped,
    duplicate_url,
    duplicate_content,
    parse_error,
    no_track,
    multi_track,
    too_short,
    too_long,
    low_density,
    desc_too_short,
    desc_too_long,
    low_quality,
    pii,
    judge_unavailable,
    unknown_lang,
    translation_failed,
    elevation_unavailable,
    rare_lang,
};

inline constexpr std::array kAllReasons = {
    Reason::malformed_index_line, Reason::not_candidate,     Reason::fetch_failed,   Reason::warc_decode_error,
    Reason::warc_skipped,         Reason::duplicate_url,     Reason::duplicate_content, Reason::parse_error,
    Reason::no_track,             Reason::multi_track,       Reason::too_short,      Reason::too_long,
    Reason::low_density,          Reason::desc_too_short,    Reason::desc_too_long,  Reason::low_quality,
    Reason::pii,                  Reason::judge_unavailable, Reason::unknown_lang,   Reason::translation_failed,
    Reason::elevation_unavailable, Reason::rare_lang,
};

std::string_view to_string(Reason r);
std::optional<Reason> reason_from_string(std::string_view s);

/// Reasons that mean an item failed (as opposed to being filtered out);
/// any of these makes the run exit with the partial-failure code.
bool is_item_failure(Reason r);

struct FilterVerdict {
    bool pass = true;
    std::optional<Reason> reason;
};

/// 500 <= length_2d <= 100000 and an average of at least one point per
/// 100 m of length_2d. Reports the first rule that fails.
FilterVerdict passes_track_filters(std::size_t point_count, double length_2d, const FilterConfig& config);
FilterVerdict passes_track_filters(const gpx::Track& track, const geo::TrackMetrics& metrics,
                                   const FilterConfig& config);

/// A downloaded payload on its way into dedup.
struct FetchedItem {
    index::CandidateRecord candidate;
    std::string sha256;  // hex digest of the payload bytes
    std::uint64_t payload_bytes = 0;
};

void to_json(nlohmann::json& j, const FetchedItem& f);
void from_json(const nlohmann::json& j, FetchedItem& f);

struct DedupResult {
    std::vector<FetchedItem> survivors;
    std::size_t duplicate_url = 0;
    std::size_t duplicate_content = 0;
};

/// Orders by (url, crawl_id), keeps the first item per URL, then the first
/// per content hash.
DedupResult dedup(std::vector<FetchedItem> items);

struct Vertex {
    double lat = 0.0;
    double lon = 0.0;
    double ele = 0.0;
};

struct Description {
    std::string text;     // cleaned and masked original
    std::string lang;
    std::string text_en;
};

/// Table 1 record; `geometry` has one line string per segment.
struct OutputRecord {
    std::string url;
    std::string warc_file;
    std::uint64_t warc_offset = 0;
    std::uint64_t warc_len = 0;
    std::string country;
    std::string desc;
    std::string desc_lang;
    std::string desc_en;
    std::string elev_source;
    double elev_highest = 0.0;
    double elev_lowest = 0.0;
    double uphill = 0.0;
    double downhill = 0.0;
    double length_2d = 0.0;
    double length_3d = 0.0;
    bool is_circular = false;
    std::vector<std::vector<Vertex>> geometry;
};

inline constexpr std::array<std::string_view, 17> kPropertyNames = {
    "url",          "warc_file",   "warc_offset", "warc_len", "country",   "desc",      "desc_lang",
    "desc_en",      "elev_source", "elev_highest", "elev_lowest", "uphill", "downhill", "length_2d",
    "length_3d",    "is_circular", "geometry",
};

/// A programming error: some stage failed to supply a field.
class AssemblyError : public std::logic_error {
public:
    explicit AssemblyError(const std::string& field) : std::logic_error("cannot assemble record: missing " + field) {}
};

OutputRecord assemble_record(const index::CandidateRecord& candidate, const gpx::Track& track,
                             const geo::TrackMetrics& metrics, const Description& desc, const std::string& country,
                             elevation::ElevationSource elev_source);

/// Rounds to centimetres for export; never yields -0.
double round2(double v);

std::string to_geojson(std::span<const OutputRecord> records);
std::string to_jsonl(std::span<const OutputRecord> records);
std::string to_csv(std::span<const OutputRecord> records);

nlohmann::ordered_json feature_properties(const OutputRecord& r);
nlohmann::ordered_json geometry_json(const OutputRecord& r);

struct ExportPaths {
    std::filesystem::path geojson;
    std::filesystem::path jsonl;
    std::filesystem::path csv;
};

/// Writes dataset.geojson, dataset.jsonl and dataset.csv into `dir`.
ExportPaths export_records(std::span<const OutputRecord> records, const std::filesystem::path& dir);

}  // namespace gpxharvest::pipeline
