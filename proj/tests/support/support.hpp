#pragma once

#include "gpxharvest/desc.hpp"
#include "gpxharvest/elevation.hpp"
#include "gpxharvest/gpx.hpp"
#include "gpxharvest/index_scan.hpp"
#include "gpxharvest/stages.hpp"
#include "gpxharvest/util.hpp"

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace gpxharvest::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& prefix = "gpxh");
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::filesystem::path& p) const { return path_ / p; }

private:
    std::filesystem::path path_;
};

struct WarcOptions {
    std::string warc_type = "response";
    std::string http_status_line = "HTTP/1.1 200 OK";
    std::string content_type = "application/gpx+xml";
    bool chunked = false;
    bool http_content_length = true;
    bool gzip_body = false;  // Content-Encoding: gzip
};

/// One gzip member: WARC record wrapping an HTTP response carrying `payload`.
Bytes make_warc_record(const std::string& url, std::span<const std::uint8_t> payload, const WarcOptions& opts = {});
Bytes make_warcinfo_record();

/// CDX-J index line for a record.
std::string cdx_line(const index::CandidateRecord& r, int status = 200);

struct GpxWriteOptions {
    std::string version = "1.1";  // "1.1", "1.0" or "" (no namespace)
    std::optional<std::string> metadata_desc{};
    bool as_route = false;  // write <rte>/<rtept> instead of <trk>
};

/// Serializes tracks as GPX text. Coordinates are written with 17
/// significant digits so parsing reproduces them exactly.
std::string write_gpx(const std::vector<gpx::Track>& tracks, const GpxWriteOptions& opts = {});

/// Point reached from (lat, lon) after `distance_m` on initial bearing
/// `bearing_deg` over the haversine sphere.
std::pair<double, double> destination_point(double lat, double lon, double bearing_deg, double distance_m);

/// Straight-ish polyline of `n` points spaced `step_m` apart.
gpx::Segment line_segment(double lat, double lon, double bearing_deg, double step_m, std::size_t n,
                          std::function<std::optional<double>(std::size_t)> ele = {});

/// Closed loop of `n` points whose polygon perimeter is about `perimeter_m`.
gpx::Segment loop_segment(double lat, double lon, double perimeter_m, std::size_t n);

/// Track of independently summed segment lengths, for comparing against
/// the library.
double oracle_length_2d(const gpx::Track& track);

/// SRTM3 tile whose samples come from `value(row, col)`.
elevation::SrtmTile make_tile(int sw_lat, int sw_lon, const std::function<std::int16_t(int, int)>& value,
                              int n = elevation::kSrtm3Size);

/// Everything needed to run the pipeline against the bundled fixture crawl.
struct FixtureCrawl {
    std::filesystem::path root;
    std::filesystem::path shard;
    std::filesystem::path warc_dir;
    std::filesystem::path srtm_dir;
    std::filesystem::path boundaries;
    std::filesystem::path judge_script;
    std::filesystem::path translator_script;
    std::filesystem::path config_file;
    pipeline::PipelineConfig config;
};

inline constexpr const char* kGoldenEnglishDesc =
    "Gentle riverside walk from the old mill to the village green, with a tea room halfway "
    "and firm paths the whole way.";
inline constexpr const char* kGoldenGermanDesc =
    "Der Weg ist sehr gut gekennzeichnet mit einem schwarzen Hirschk\xC3\xA4" "fer auf wei\xC3\x9F" "em Grund. "
    "Die Runde f\xC3\xBChrt durch den Wald und \xC3\xBC" "ber die Felder zur\xC3\xBC" "ck zum Parkplatz.";
inline constexpr const char* kGoldenGermanDescEn =
    "The path is very well marked with a black stag beetle on a white background. The loop leads "
    "through the forest and across the fields back to the car park.";

/// Writes a fixture crawl with six GPX documents: a UK linear walk with
/// device elevation, a German loop without elevation, and one document
/// each that is multi-track, too short, too sparse, and has a too-short
/// description. Work output goes to `root/work`.
FixtureCrawl build_golden_crawl(const std::filesystem::path& root);

struct PiiCase {
    const char* input;
    const char* masked;
    desc::PiiFlags flags;
};

// Hand-built table: positives for each class and negatives that a loose
// digit pattern would wrongly catch.
inline constexpr PiiCase kPiiTable[] = {
    {"mail me at jo@hill.example", "mail me at <EMAIL>", {true, false, false}},
    {"see https://example.org/track and www.foo.example", "see <URL> and <URL>", {false, true, false}},
    {"call +44 20 7946 0958 after 5", "call <TELEPHONE> after 5", {false, false, true}},
    {"Contact: anna.berg+trails@post.example.co.uk.", "Contact: <EMAIL>.", {true, false, false}},
    {"Map at http://maps.example.com/route?id=12&x=3, enjoy", "Map at <URL>, enjoy", {false, true, false}},
    {"Details (see www.trail.example/info) here", "Details (see <URL>) here", {false, true, false}},
    {"Files on ftp://files.example.net/t.gpx today", "Files on <URL> today", {false, true, false}},
    {"Ring 020 7946 0958 to book", "Ring <TELEPHONE> to book", {false, false, true}},
    {"Tel. (0761) 123-4567 weekdays", "Tel. <TELEPHONE> weekdays", {false, false, true}},
    {"Appelez le 04.76.12.34.56 svp", "Appelez le <TELEPHONE> svp", {false, false, true}},
    {"US office 555-123-4567 until noon", "US office <TELEPHONE> until noon", {false, false, true}},
    {"Email jo@hill.example or visit https://hill.example", "Email <EMAIL> or visit <URL>", {true, true, false}},
    {"Start at 51.50722, -0.12750 near the bridge", "Start at 51.50722, -0.12750 near the bridge", {}},
    {"Walked it in 2019 and again in 2023", "Walked it in 2019 and again in 2023", {}},
    {"Open 1998-2005 only", "Open 1998-2005 only", {}},
    {"Climb of 1234 m over 12.5 km", "Climb of 1234 m over 12.5 km", {}},
    {"Ride on 12.05.2021 with friends", "Ride on 12.05.2021 with friends", {}},
    {"Track id 1234567890123456789 is long", "Track id 1234567890123456789 is long", {}},
    {"Route GR20 stage 7 takes 6 hours", "Route GR20 stage 7 takes 6 hours", {}},
    {"Waypoint N 47\xC2\xB0" "12.345 E 008\xC2\xB0" "30.123 at the hut",
     "Waypoint N 47\xC2\xB0" "12.345 E 008\xC2\xB0" "30.123 at the hut", {}},
};

/// Country rectangles used by the fixture crawl.
std::string fixture_boundaries_geojson();

}  // namespace gpxharvest::testing
