#include "gpxharvest/pipeline.hpp"

#include "gpxharvest/util.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <tuple>
#include <unordered_set>

namespace gpxharvest::pipeline {

void FilterConfig::validate() const {
    auto require = [](bool ok, const char* what) {
        if (!ok) throw std::invalid_argument(std::string("filter.") + what);
    };
    require(min_length_m > 0, "min_length_m must be > 0");
    require(max_length_m > min_length_m, "max_length_m must exceed min_length_m");
    require(min_points_per_100m > 0, "min_points_per_100m must be > 0");
    require(desc_min_chars > 0, "desc_min_chars must be > 0");
    require(desc_max_chars_exclusive > desc_min_chars, "desc_max_chars_exclusive must exceed desc_min_chars");
    require(circular_radius_m > 0, "circular_radius_m must be > 0");
    require(elevation_deadband_m >= 0, "elevation_deadband_m must be >= 0");
}

void to_json(nlohmann::json& j, const FilterConfig& c) {
    j = nlohmann::json{
        {"min_length_m", c.min_length_m},
        {"max_length_m", c.max_length_m},
        {"min_points_per_100m", c.min_points_per_100m},
        {"desc_min_chars", c.desc_min_chars},
        {"desc_max_chars_exclusive", c.desc_max_chars_exclusive},
        {"circular_radius_m", c.circular_radius_m},
        {"rare_lang_cutoff", c.rare_lang_cutoff},
        {"elevation_deadband_m", c.elevation_deadband_m},
    };
}

void from_json(const nlohmann::json& j, FilterConfig& c) {
    FilterConfig d;
    c.min_length_m = j.value("min_length_m", d.min_length_m);
    c.max_length_m = j.value("max_length_m", d.max_length_m);
    c.min_points_per_100m = j.value("min_points_per_100m", d.min_points_per_100m);
    c.desc_min_chars = j.value("desc_min_chars", d.desc_min_chars);
    c.desc_max_chars_exclusive = j.value("desc_max_chars_exclusive", d.desc_max_chars_exclusive);
    c.circular_radius_m = j.value("circular_radius_m", d.circular_radius_m);
    c.rare_lang_cutoff = j.value("rare_lang_cutoff", d.rare_lang_cutoff);
    c.elevation_deadband_m = j.value("elevation_deadband_m", d.elevation_deadband_m);
}

namespace {

constexpr std::array<std::pair<Reason, std::string_view>, kAllReasons.size()> kReasonNames = {{
    {Reason::malformed_index_line, "malformed-index-line"},
    {Reason::not_candidate, "not-candidate"},
    {Reason::fetch_failed, "fetch-failed"},
    {Reason::warc_decode_error, "warc-decode-error"},
    {Reason::warc_skipped, "warc-skipped"},
    {Reason::duplicate_url, "duplicate-url"},
    {Reason::duplicate_content, "duplicate-content"},
    {Reason::parse_error, "parse-error"},
    {Reason::no_track, "no-track"},
    {Reason::multi_track, "multi-track"},
    {Reason::too_short, "too-short"},
    {Reason::too_long, "too-long"},
    {Reason::low_density, "low-density"},
    {Reason::desc_too_short, "desc-too-short"},
    {Reason::desc_too_long, "desc-too-long"},
    {Reason::low_quality, "low-quality"},
    {Reason::pii, "pii"},
    {Reason::judge_unavailable, "judge-unavailable"},
    {Reason::unknown_lang, "unknown-lang"},
    {Reason::translation_failed, "translation-failed"},
    {Reason::elevation_unavailable, "elevation-unavailable"},
    {Reason::rare_lang, "rare-lang"},
}};

}  // namespace

std::string_view to_string(Reason r) {
    for (const auto& [reason, name] : kReasonNames) {
        if (reason == r) return name;
    }
    return "unknown-reason";
}

std::optional<Reason> reason_from_string(std::string_view s) {
    for (const auto& [reason, name] : kReasonNames) {
        if (name == s) return reason;
    }
    return std::nullopt;
}

bool is_item_failure(Reason r) {
    return r == Reason::fetch_failed || r == Reason::judge_unavailable || r == Reason::translation_failed;
}

FilterVerdict passes_track_filters(std::size_t point_count, double length_2d, const FilterConfig& config) {
    if (length_2d < config.min_length_m) return {false, Reason::too_short};
    if (length_2d > config.max_length_m) return {false, Reason::too_long};
    // points / (length / 100) >= threshold, rearranged to avoid the division.
    if (static_cast<double>(point_count) * 100.0 < config.min_points_per_100m * length_2d) {
        return {false, Reason::low_density};
    }
    return {true, std::nullopt};
}

FilterVerdict passes_track_filters(const gpx::Track& track, const geo::TrackMetrics& metrics,
                                   const FilterConfig& config) {
    return passes_track_filters(track.point_count(), metrics.length_2d, config);
}

void to_json(nlohmann::json& j, const FetchedItem& f) {
    j = nlohmann::json{{"candidate", f.candidate}, {"sha256", f.sha256}, {"payload_bytes", f.payload_bytes}};
}

void from_json(const nlohmann::json& j, FetchedItem& f) {
    j.at("candidate").get_to(f.candidate);
    j.at("sha256").get_to(f.sha256);
    f.payload_bytes = j.value("payload_bytes", std::uint64_t{0});
}

DedupResult dedup(std::vector<FetchedItem> items) {
    std::stable_sort(items.begin(), items.end(), [](const FetchedItem& a, const FetchedItem& b) {
        if (a.candidate.url != b.candidate.url) return a.candidate.url < b.candidate.url;
        if (a.candidate.crawl_id != b.candidate.crawl_id) return a.candidate.crawl_id < b.candidate.crawl_id;
        // Ties within one crawl fall back to content, then record location.
        return std::tie(a.sha256, a.candidate.warc_file, a.candidate.warc_offset) <
               std::tie(b.sha256, b.candidate.warc_file, b.candidate.warc_offset);
    });
    DedupResult result;
    std::unordered_set<std::string> urls;
    std::vector<FetchedItem> by_url;
    for (auto& item : items) {
        if (!urls.insert(item.candidate.url).second) {
            ++result.duplicate_url;
            continue;
        }
        by_url.push_back(std::move(item));
    }
    std::unordered_set<std::string> hashes;
    for (auto& item : by_url) {
        if (!hashes.insert(item.sha256).second) {
            ++result.duplicate_content;
            continue;
        }
        result.survivors.push_back(std::move(item));
    }
    return result;
}

OutputRecord assemble_record(const index::CandidateRecord& candidate, const gpx::Track& track,
                             const geo::TrackMetrics& metrics, const Description& desc, const std::string& country,
                             elevation::ElevationSource elev_source) {
    if (candidate.url.empty()) throw AssemblyError("url");
    if (candidate.warc_file.empty()) throw AssemblyError("warc_file");
    if (candidate.warc_len == 0) throw AssemblyError("warc_len");
    if (country.empty()) throw AssemblyError("country");
    if (desc.text.empty()) throw AssemblyError("desc");
    if (desc.lang.empty()) throw AssemblyError("desc_lang");
    if (desc.text_en.empty()) throw AssemblyError("desc_en");

    OutputRecord r;
    r.url = candidate.url;
    r.warc_file = candidate.warc_file;
    r.warc_offset = candidate.warc_offset;
    r.warc_len = candidate.warc_len;
    r.country = country;
    r.desc = desc.text;
    r.desc_lang = desc.lang;
    r.desc_en = desc.text_en;
    r.elev_source = std::string(elevation::to_string(elev_source));
    r.elev_highest = metrics.elev_highest;
    r.elev_lowest = metrics.elev_lowest;
    r.uphill = metrics.uphill;
    r.downhill = metrics.downhill;
    r.length_2d = metrics.length_2d;
    r.length_3d = metrics.length_3d;
    r.is_circular = metrics.is_circular;
    for (const auto& seg : track.segments) {
        if (seg.points.empty()) continue;
        auto& line = r.geometry.emplace_back();
        for (const auto& p : seg.points) {
            if (!p.ele) throw AssemblyError("geometry elevation");
            line.push_back({p.lat, p.lon, *p.ele});
        }
    }
    if (r.geometry.empty()) throw AssemblyError("geometry");
    return r;
}

double round2(double v) {
    double r = std::round(v * 100.0) / 100.0;
    return r == 0.0 ? 0.0 : r;
}

nlohmann::ordered_json feature_properties(const OutputRecord& r) {
    nlohmann::ordered_json p;
    p["url"] = r.url;
    p["warc_file"] = r.warc_file;
    p["warc_offset"] = r.warc_offset;
    p["warc_len"] = r.warc_len;
    p["country"] = r.country;
    p["desc"] = r.desc;
    p["desc_lang"] = r.desc_lang;
    p["desc_en"] = r.desc_en;
    p["elev_source"] = r.elev_source;
    p["elev_highest"] = round2(r.elev_highest);
    p["elev_lowest"] = round2(r.elev_lowest);
    p["uphill"] = round2(r.uphill);
    p["downhill"] = round2(r.downhill);
    p["length_2d"] = round2(r.length_2d);
    p["length_3d"] = round2(r.length_3d);
    p["is_circular"] = r.is_circular;
    return p;
}

nlohmann::ordered_json geometry_json(const OutputRecord& r) {
    nlohmann::ordered_json lines = nlohmann::ordered_json::array();
    for (const auto& line : r.geometry) {
        nlohmann::ordered_json coords = nlohmann::ordered_json::array();
        for (const auto& v : line) coords.push_back({v.lon, v.lat, v.ele});
        lines.push_back(std::move(coords));
    }
    nlohmann::ordered_json g;
    g["type"] = "MultiLineString";
    g["coordinates"] = std::move(lines);
    return g;
}

std::string to_geojson(std::span<const OutputRecord> records) {
    nlohmann::ordered_json fc;
    fc["type"] = "FeatureCollection";
    fc["features"] = nlohmann::ordered_json::array();
    for (const auto& r : records) {
        nlohmann::ordered_json f;
        f["type"] = "Feature";
        f["properties"] = feature_properties(r);
        f["geometry"] = geometry_json(r);
        fc["features"].push_back(std::move(f));
    }
    return fc.dump() + "\n";
}

std::string to_jsonl(std::span<const OutputRecord> records) {
    std::string out;
    for (const auto& r : records) {
        auto j = feature_properties(r);
        j["geometry"] = geometry_json(r);
        out += j.dump();
        out += '\n';
    }
    return out;
}

namespace {

std::string csv_field(std::string_view s) {
    if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

std::string csv_number(double v) {
    return fmt::format("{:.2f}", round2(v));
}

}  // namespace

std::string to_csv(std::span<const OutputRecord> records) {
    std::string out;
    for (std::size_t i = 0; i + 1 < kPropertyNames.size(); ++i) {
        if (i) out += ',';
        out += kPropertyNames[i];
    }
    out += "\r\n";
    for (const auto& r : records) {
        std::vector<std::string> row = {
            csv_field(r.url),          csv_field(r.warc_file),   std::to_string(r.warc_offset),
            std::to_string(r.warc_len), csv_field(r.country),    csv_field(r.desc),
            csv_field(r.desc_lang),    csv_field(r.desc_en),     csv_field(r.elev_source),
            csv_number(r.elev_highest), csv_number(r.elev_lowest), csv_number(r.uphill),
            csv_number(r.downhill),    csv_number(r.length_2d),  csv_number(r.length_3d),
            r.is_circular ? "True" : "False",
        };
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out += ',';
            out += row[i];
        }
        out += "\r\n";
    }
    return out;
}

ExportPaths export_records(std::span<const OutputRecord> records, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw std::runtime_error("cannot create export directory " + dir.string() + ": " + ec.message());
    ExportPaths paths{dir / "dataset.geojson", dir / "dataset.jsonl", dir / "dataset.csv"};
    write_file_atomic(paths.geojson, to_geojson(records));
    write_file_atomic(paths.jsonl, to_jsonl(records));
    write_file_atomic(paths.csv, to_csv(records));
    return paths;
}

}  // namespace gpxharvest::pipeline
