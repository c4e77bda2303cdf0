#pragma once

#include "gpxharvest/util.hpp"

#include <chrono>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace gpxharvest::gpx {

using Timestamp = std::chrono::sys_time<std::chrono::milliseconds>;

struct TrackPoint {
    double lat = 0.0;  // [-90, 90]
    double lon = 0.0;  // [-180, 180]
    std::optional<double> ele;
    std::optional<Timestamp> time;

    bool operator==(const TrackPoint&) const = default;
};

struct Segment {
    std::vector<TrackPoint> points;

    bool operator==(const Segment&) const = default;
};

struct Track {
    std::optional<std::string> name;
    std::optional<std::string> desc;  // raw <desc> text, entities already decoded by XML
    std::vector<Segment> segments;

    std::size_t point_count() const;
    bool operator==(const Track&) const = default;
};

struct ParseCounters {
    std::uint64_t points_dropped = 0;        // unparsable or out-of-range lat/lon
    std::uint64_t tracks_dropped_invalid = 0;  // lost more than 1% of points to validation
    std::uint64_t empty_segments_dropped = 0;
    std::uint64_t routes_converted = 0;
};

struct GpxDocument {
    std::vector<Track> tracks;
    std::optional<std::string> metadata_desc;
    std::string source_url;
    Sha256Digest content_hash{};
    ParseCounters counters;
};

class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Max fraction of a track's points that may fail validation before the
/// whole track is discarded.
inline constexpr double kMaxInvalidPointFraction = 0.01;

/// Parses GPX 1.0, 1.1 or namespace-less documents. Elements in foreign
/// namespaces (extensions) are skipped along with their subtrees. When the
/// document has no usable <trk>, each <rte> becomes a one-segment track.
GpxDocument parse_gpx(std::span<const std::uint8_t> payload, std::string url);

/// ISO-8601 UTC timestamp ("2024-03-01T10:15:30Z", fractional seconds and
/// numeric offsets accepted).
std::optional<Timestamp> parse_timestamp(std::string_view text);

/// The only track when exactly one track carries points; nothing otherwise.
std::optional<Track> extract_single_track(const GpxDocument& doc);

/// Track desc, falling back to the document-level description.
std::optional<std::string> description_of(const Track& track, const GpxDocument& doc);

Track strip_timestamps(Track track);

}  // namespace gpxharvest::gpx
