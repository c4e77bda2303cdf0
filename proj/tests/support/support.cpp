#include "support.hpp"

#include "gpxharvest/geo.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdlib>
#include <ctime>
#include <numbers>
#include <stdexcept>

namespace gpxharvest::testing {

namespace fs = std::filesystem;
using nlohmann::json;

TempDir::TempDir(const std::string& prefix) {
    auto tmpl = (fs::temp_directory_path() / (prefix + "-XXXXXX")).string();
    if (!mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
}

TempDir::~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
}

Bytes make_warc_record(const std::string& url, std::span<const std::uint8_t> payload, const WarcOptions& opts) {
    Bytes body(payload.begin(), payload.end());
    if (opts.gzip_body) body = gzip_compress(body);

    std::string http = opts.http_status_line + "\r\n";
    http += "Content-Type: " + opts.content_type + "\r\n";
    if (opts.gzip_body) http += "Content-Encoding: gzip\r\n";
    std::string encoded;
    if (opts.chunked) {
        http += "Transfer-Encoding: chunked\r\n";
        std::size_t pos = 0;
        while (pos < body.size()) {
            auto n = std::min<std::size_t>(100, body.size() - pos);
            encoded += fmt::format("{:x}\r\n", n);
            encoded.append(reinterpret_cast<const char*>(body.data()) + pos, n);
            encoded += "\r\n";
            pos += n;
        }
        encoded += "0\r\n\r\n";
    } else {
        if (opts.http_content_length) http += fmt::format("Content-Length: {}\r\n", body.size());
        encoded.assign(body.begin(), body.end());
    }
    http += "\r\n";
    http += encoded;

    std::string warc = "WARC/1.0\r\n";
    warc += "WARC-Type: " + opts.warc_type + "\r\n";
    warc += "WARC-Target-URI: " + url + "\r\n";
    warc += "WARC-Date: 2024-03-01T12:00:00Z\r\n";
    warc += "WARC-Record-ID: <urn:uuid:00000000-0000-4000-8000-000000000000>\r\n";
    warc += "Content-Type: application/http; msgtype=response\r\n";
    warc += fmt::format("Content-Length: {}\r\n\r\n", http.size());
    warc += http;
    warc += "\r\n\r\n";
    return gzip_compress(to_bytes(warc));
}

Bytes make_warcinfo_record() {
    std::string info = "software: gpxh-fixture\r\nformat: WARC File Format 1.0\r\n";
    std::string warc = "WARC/1.0\r\nWARC-Type: warcinfo\r\nWARC-Date: 2024-03-01T12:00:00Z\r\n";
    warc += "Content-Type: application/warc-fields\r\n";
    warc += fmt::format("Content-Length: {}\r\n\r\n", info.size());
    warc += info + "\r\n\r\n";
    return gzip_compress(to_bytes(warc));
}

std::string cdx_line(const index::CandidateRecord& r, int status) {
    nlohmann::ordered_json j;
    j["url"] = r.url;
    j["mime"] = r.mime_detected;
    j["mime-detected"] = r.mime_detected;
    j["status"] = std::to_string(status);
    j["length"] = std::to_string(r.warc_len);
    j["offset"] = std::to_string(r.warc_offset);
    j["filename"] = r.warc_file;
    return "org,example)/fixture 20240301120000 " + j.dump();
}

namespace {

std::string xml_escape(std::string_view s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

std::string format_time(const gpx::Timestamp& t) {
    auto secs = std::chrono::floor<std::chrono::seconds>(t);
    auto ms = (t - secs).count();
    std::time_t tt = std::chrono::system_clock::to_time_t(secs);
    std::tm tm{};
    gmtime_r(&tt, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%S", &tm);
    return ms ? fmt::format("{}.{:03}Z", buf, ms) : fmt::format("{}Z", buf);
}

void write_point(std::string& out, const char* tag, const gpx::TrackPoint& p) {
    out += fmt::format("<{} lat=\"{:.17g}\" lon=\"{:.17g}\">", tag, p.lat, p.lon);
    if (p.ele) out += fmt::format("<ele>{:.17g}</ele>", *p.ele);
    if (p.time) out += "<time>" + format_time(*p.time) + "</time>";
    out += fmt::format("</{}>\n", tag);
}

}  // namespace

std::string write_gpx(const std::vector<gpx::Track>& tracks, const GpxWriteOptions& opts) {
    std::string out = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<gpx creator=\"gpxh-test\"";
    if (opts.version == "1.1") {
        out += " version=\"1.1\" xmlns=\"http://www.topografix.com/GPX/1/1\"";
    } else if (opts.version == "1.0") {
        out += " version=\"1.0\" xmlns=\"http://www.topografix.com/GPX/1/0\"";
    }
    out += ">\n";
    if (opts.metadata_desc) {
        if (opts.version == "1.0") {
            out += "<desc>" + xml_escape(*opts.metadata_desc) + "</desc>\n";
        } else {
            out += "<metadata><desc>" + xml_escape(*opts.metadata_desc) + "</desc></metadata>\n";
        }
    }
    for (const auto& t : tracks) {
        out += opts.as_route ? "<rte>\n" : "<trk>\n";
        if (t.name) out += "<name>" + xml_escape(*t.name) + "</name>\n";
        if (t.desc) out += "<desc>" + xml_escape(*t.desc) + "</desc>\n";
        for (const auto& seg : t.segments) {
            if (!opts.as_route) out += "<trkseg>\n";
            for (const auto& p : seg.points) write_point(out, opts.as_route ? "rtept" : "trkpt", p);
            if (!opts.as_route) out += "</trkseg>\n";
        }
        out += opts.as_route ? "</rte>\n" : "</trk>\n";
    }
    out += "</gpx>\n";
    return out;
}

std::pair<double, double> destination_point(double lat, double lon, double bearing_deg, double distance_m) {
    constexpr double kDeg = std::numbers::pi / 180.0;
    const double phi1 = lat * kDeg;
    const double lambda1 = lon * kDeg;
    const double theta = bearing_deg * kDeg;
    const double delta = distance_m / geo::kEarthRadiusM;
    const double phi2 = std::asin(std::sin(phi1) * std::cos(delta) + std::cos(phi1) * std::sin(delta) * std::cos(theta));
    const double lambda2 = lambda1 + std::atan2(std::sin(theta) * std::sin(delta) * std::cos(phi1),
                                                std::cos(delta) - std::sin(phi1) * std::sin(phi2));
    double lon2 = lambda2 / kDeg;
    if (lon2 > 180) lon2 -= 360;
    if (lon2 < -180) lon2 += 360;
    return {phi2 / kDeg, lon2};
}

gpx::Segment line_segment(double lat, double lon, double bearing_deg, double step_m, std::size_t n,
                          std::function<std::optional<double>(std::size_t)> ele) {
    gpx::Segment seg;
    for (std::size_t i = 0; i < n; ++i) {
        auto [la, lo] = destination_point(lat, lon, bearing_deg, step_m * static_cast<double>(i));
        gpx::TrackPoint p{la, lo, std::nullopt, std::nullopt};
        if (ele) p.ele = ele(i);
        seg.points.push_back(p);
    }
    return seg;
}

gpx::Segment loop_segment(double lat, double lon, double perimeter_m, std::size_t n) {
    const auto sides = static_cast<double>(n - 1);
    const double radius = perimeter_m / (2.0 * sides * std::sin(std::numbers::pi / sides));
    gpx::Segment seg;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        auto [la, lo] = destination_point(lat, lon, 360.0 * static_cast<double>(i) / sides, radius);
        seg.points.push_back({la, lo, std::nullopt, std::nullopt});
    }
    seg.points.push_back(seg.points.front());
    return seg;
}

double oracle_length_2d(const gpx::Track& track) {
    // Independent spherical law of haversines, written out longhand.
    constexpr double kR = 6'371'008.8;
    constexpr double kDeg = 3.14159265358979323846 / 180.0;
    double total = 0.0;
    for (const auto& seg : track.segments) {
        for (std::size_t i = 1; i < seg.points.size(); ++i) {
            const auto& a = seg.points[i - 1];
            const auto& b = seg.points[i];
            double s1 = std::sin((b.lat - a.lat) * kDeg / 2);
            double s2 = std::sin((b.lon - a.lon) * kDeg / 2);
            double h = s1 * s1 + std::cos(a.lat * kDeg) * std::cos(b.lat * kDeg) * s2 * s2;
            total += 2 * kR * std::asin(std::min(1.0, std::sqrt(h)));
        }
    }
    return total;
}

elevation::SrtmTile make_tile(int sw_lat, int sw_lon, const std::function<std::int16_t(int, int)>& value, int n) {
    elevation::SrtmTile tile{sw_lat, sw_lon, n, std::vector<std::int16_t>(static_cast<std::size_t>(n) * n)};
    for (int r = 0; r < n; ++r) {
        for (int c = 0; c < n; ++c) tile.samples[static_cast<std::size_t>(r) * n + c] = value(r, c);
    }
    return tile;
}

std::string fixture_boundaries_geojson() {
    auto rect = [](const char* name, double w, double s, double e, double n) {
        return json{{"type", "Feature"},
                    {"properties", {{"shapeName", name}}},
                    {"geometry",
                     {{"type", "Polygon"},
                      {"coordinates", json::array({json::array({json::array({w, s}), json::array({e, s}),
                                                                json::array({e, n}), json::array({w, n}),
                                                                json::array({w, s})})})}}}};
    };
    json fc = {{"type", "FeatureCollection"},
               {"features",
                json::array({rect("United Kingdom", -8.0, 50.0, 1.8, 58.7), rect("France", -4.8, 42.3, 7.5, 49.9),
                             rect("Germany", 7.6, 47.3, 15.0, 55.0)})}};
    return fc.dump(1) + "\n";
}

FixtureCrawl build_golden_crawl(const fs::path& root) {
    FixtureCrawl fx;
    fx.root = root;
    fx.warc_dir = root / "warc";
    fx.srtm_dir = root / "srtm";
    fx.shard = root / "index" / "cdx-00000.gz";
    fx.boundaries = root / "boundaries.geojson";
    fx.judge_script = root / "judge.json";
    fx.translator_script = root / "translator.json";
    fx.config_file = root / "config.json";
    fs::create_directories(fx.warc_dir);
    fs::create_directories(fx.srtm_dir);
    fs::create_directories(fx.shard.parent_path());

    auto gps_ele = [](std::size_t i) { return std::optional<double>(60.0 + 40.0 * std::sin(i / 20.0)); };
    auto no_ele = std::function<std::optional<double>(std::size_t)>{};

    struct Doc {
        std::string url;
        std::string mime;
        std::string gpx;
    };
    std::vector<Doc> docs;

    {  // valid: linear walk in the UK with device elevation
        gpx::Track t;
        t.name = "Mill walk";
        t.desc = kGoldenEnglishDesc;
        t.segments.push_back(line_segment(51.20, -0.35, 5.0, 18'200.0 / 199.0, 200, gps_ele));
        docs.push_back({"https://walks.example.org/routes/mill-walk.gpx", "application/gpx+xml", write_gpx({t})});
    }
    {  // valid: loop in Germany, no elevation, description in metadata
        gpx::Track t;
        t.name = "Hirschkaefer-Runde";
        t.segments.push_back(loop_segment(50.10, 8.60, 13'800.0, 161));
        docs.push_back({"http://wandern.example.de/touren/Runde.GPX?download=1", "text/xml",
                        write_gpx({t}, {.version = "1.1", .metadata_desc = std::string(kGoldenGermanDesc)})});
    }
    {  // multi-track
        gpx::Track a, b;
        a.desc = "First day of a two day hike along the canal towpath with plenty of locks to look at.";
        b.desc = "Second day of the same hike, returning over the hills to the station in town.";
        a.segments.push_back(line_segment(48.85, 2.35, 90.0, 50.0, 21, gps_ele));
        b.segments.push_back(line_segment(48.86, 2.36, 90.0, 50.0, 21, gps_ele));
        docs.push_back({"https://trails.example.net/two-days.gpx", "application/gpx+xml",
                        write_gpx({a, b}, {.version = "1.0"})});
    }
    {  // too short: 270 m
        gpx::Track t;
        t.desc = "A very short stroll around the pond behind the community hall, suitable for everyone.";
        t.segments.push_back(line_segment(48.70, 2.20, 45.0, 30.0, 10, gps_ele));
        docs.push_back({"https://trails.example.net/pond.gpx", "application/gpx+xml", write_gpx({t}, {.version = ""})});
    }
    {  // low density: 2 km with 10 points
        gpx::Track t;
        t.desc = "Cross-country ride between two farms along a gravel track, recorded with a sparse logger.";
        t.segments.push_back(line_segment(52.00, 10.00, 180.0, 2000.0 / 9.0, 10, gps_ele));
        docs.push_back({"https://rides.example.com/sparse.gpx", "application/gpx+xml", write_gpx({t})});
    }
    {  // valid track with a too-short description
        gpx::Track t;
        t.desc = "Nice short loop.";
        t.segments.push_back(line_segment(53.55, 9.99, 270.0, 40.0, 30, gps_ele));
        docs.push_back({"https://rides.example.com/short-desc.gpx", "application/gpx+xml", write_gpx({t})});
    }

    const std::string prefix = "crawl-data/CC-MAIN-2024-10/segments/1709000000000.0/warc/";
    const std::array<std::string, 2> warc_names = {prefix + "CC-MAIN-20240301000000-20240301030000-00001.warc.gz",
                                                   prefix + "CC-MAIN-20240301000000-20240301030000-00002.warc.gz"};
    std::string shard;
    for (std::size_t w = 0; w < warc_names.size(); ++w) {
        Bytes file = make_warcinfo_record();
        for (std::size_t d = w * 3; d < w * 3 + 3; ++d) {
            auto record = make_warc_record(docs[d].url, to_bytes(docs[d].gpx), {.content_type = docs[d].mime});
            index::CandidateRecord c{docs[d].url, docs[d].mime, warc_names[w], file.size(), record.size(),
                                     "CC-MAIN-2024-10"};
            shard += cdx_line(c) + "\n";
            file.insert(file.end(), record.begin(), record.end());
        }
        auto path = fx.warc_dir / warc_names[w];
        fs::create_directories(path.parent_path());
        write_file(path, file);
    }
    write_file(fx.shard, gzip_compress(to_bytes(shard)));

    auto tile = make_tile(50, 8, [](int r, int c) { return static_cast<std::int16_t>(150 + (r + c) / 8); });
    write_file(fx.srtm_dir / "N50E008.hgt", elevation::encode_hgt(tile));

    write_file(fx.boundaries, fixture_boundaries_geojson());
    write_file(fx.judge_script,
               json{{"quality", {{"default", "True. This describes a walking route."}}}, {"pii", {{"default", "False"}}}}
                   .dump(2));
    write_file(fx.translator_script,
               json{{"passthrough", false}, {"translations", {{kGoldenGermanDesc, kGoldenGermanDescEn}}}}.dump(2));

    json cfg = {
        {"work_dir", "work"},
        {"shards", json::array({"index/cdx-*.gz"})},
        {"fixture_dir", "warc"},
        {"filter", {{"rare_lang_cutoff", 0}}},
        {"fetch", {{"rate_limit", 1000.0}, {"backoff_base_ms", 1}}},
        {"judge", {{"backend", "stub"}, {"script", "judge.json"}}},
        {"translator", {{"backend", "stub"}, {"script", "translator.json"}}},
        {"srtm_dir", "srtm"},
        {"boundaries", "boundaries.geojson"},
        {"workers", 4},
    };
    write_file(fx.config_file, cfg.dump(2) + "\n");
    fx.config = pipeline::PipelineConfig::load(fx.config_file);
    return fx;
}

}  // namespace gpxharvest::testing
