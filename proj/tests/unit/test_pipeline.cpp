#include "gpxharvest/pipeline.hpp"
#include "support.hpp"

#include <doctest.h>

#include <random>
#include <sstream>

using namespace gpxharvest;
using namespace gpxharvest::pipeline;

namespace {

FetchedItem item(std::string url, std::string crawl, std::string sha) {
    FetchedItem f;
    f.candidate.url = std::move(url);
    f.candidate.crawl_id = std::move(crawl);
    f.candidate.warc_file = "crawl-data/" + f.candidate.crawl_id + "/x.warc.gz";
    f.candidate.warc_len = 100;
    f.sha256 = std::move(sha);
    return f;
}

index::CandidateRecord candidate() {
    return {"https://example.org/walk.gpx", "application/gpx+xml",
            "crawl-data/CC-MAIN-2024-10/segments/1/warc/CC-MAIN-1.warc.gz", 3215, 1091, "CC-MAIN-2024-10"};
}

gpx::Track track(std::size_t lines) {
    gpx::Track t;
    for (std::size_t s = 0; s < lines; ++s) {
        t.segments.push_back(
            testing::line_segment(51.0 + 0.01 * s, -0.3, 90, 100, 5, [](std::size_t i) { return 100.0 + i; }));
    }
    return t;
}

Description english() {
    return {"Gentle riverside walk, firm paths the whole way.", "en", "Gentle riverside walk, firm paths the whole way."};
}

OutputRecord record(std::size_t lines = 1) {
    geo::TrackMetrics m{1234.567, 1240.123, 103.999, 100.0, 4.005, 0.0, false};
    return assemble_record(candidate(), track(lines), m, english(), "United Kingdom", elevation::ElevationSource::gps);
}

std::vector<std::string> split_lines(const std::string& s, const std::string& sep) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (true) {
        auto next = s.find(sep, pos);
        if (next == std::string::npos) break;
        out.push_back(s.substr(pos, next - pos));
        pos = next + sep.size();
    }
    if (pos < s.size()) out.push_back(s.substr(pos));
    return out;
}

}  // namespace

TEST_CASE("track filter boundaries") {
    FilterConfig cfg;
    CHECK(passes_track_filters(10'000, 500.0, cfg).pass);
    CHECK(passes_track_filters(10'000, 100'000.0, cfg).pass);
    CHECK(passes_track_filters(10'000, 499.999, cfg).reason == Reason::too_short);
    CHECK(passes_track_filters(10'000, 100'000.001, cfg).reason == Reason::too_long);
    CHECK(passes_track_filters(10, 1000.0, cfg).pass);
    CHECK(passes_track_filters(9, 1000.0, cfg).reason == Reason::low_density);
    CHECK(passes_track_filters(500, 12'100.0, cfg).pass);
    CHECK(passes_track_filters(120, 12'100.0, cfg).reason == Reason::low_density);
    CHECK(passes_track_filters(121, 12'100.0, cfg).pass);
    // First failing rule wins.
    CHECK(passes_track_filters(1, 400.0, cfg).reason == Reason::too_short);
    CHECK_FALSE(passes_track_filters(100, 400.0, cfg).pass);
    CHECK_FALSE(passes_track_filters(1, 400.0, cfg).pass);

    FilterConfig loose;
    loose.min_length_m = 100;
    loose.min_points_per_100m = 0.5;
    CHECK(passes_track_filters(2, 400.0, loose).pass);
    CHECK(passes_track_filters(1, 400.0, loose).reason == Reason::low_density);
}

TEST_CASE("filter config validation and JSON") {
    FilterConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    auto bad = cfg;
    bad.min_length_m = 0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = cfg;
    bad.max_length_m = 400;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = cfg;
    bad.desc_max_chars_exclusive = 50;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = cfg;
    bad.min_points_per_100m = -1;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

    cfg.min_length_m = 750;
    cfg.rare_lang_cutoff = 0;
    nlohmann::json j = cfg;
    auto back = j.get<FilterConfig>();
    CHECK(back.min_length_m == 750);
    CHECK(back.rare_lang_cutoff == 0);
    CHECK(back.max_length_m == 100'000);
    auto partial = nlohmann::json{{"desc_min_chars", 10}}.get<FilterConfig>();
    CHECK(partial.desc_min_chars == 10);
    CHECK(partial.desc_max_chars_exclusive == 2000);
}

TEST_CASE("reason names") {
    for (auto r : kAllReasons) CHECK(reason_from_string(to_string(r)) == r);
    CHECK(to_string(Reason::multi_track) == "multi-track");
    CHECK(to_string(Reason::desc_too_short) == "desc-too-short");
    CHECK_FALSE(reason_from_string("nope"));
    CHECK(is_item_failure(Reason::fetch_failed));
    CHECK(is_item_failure(Reason::judge_unavailable));
    CHECK(is_item_failure(Reason::translation_failed));
    CHECK_FALSE(is_item_failure(Reason::low_quality));
}

TEST_CASE("dedup") {
    auto r = dedup({item("u1", "CC-MAIN-2024-10", "h1"), item("u1", "CC-MAIN-2023-50", "h2"),
                    item("u2", "CC-MAIN-2024-10", "h1")});
    // The URL pass runs first, so u2 no longer shares content with a survivor.
    REQUIRE(r.survivors.size() == 2);
    CHECK(r.survivors[0].candidate.url == "u1");
    CHECK(r.survivors[0].candidate.crawl_id == "CC-MAIN-2023-50");
    CHECK(r.survivors[1].candidate.url == "u2");
    CHECK(r.duplicate_url == 1);
    CHECK(r.duplicate_content == 0);

    // Same URL in one crawl, distinct URLs sharing content.
    auto r2 = dedup({item("b", "c1", "same"), item("a", "c1", "same"), item("c", "c1", "other")});
    REQUIRE(r2.survivors.size() == 2);
    CHECK(r2.survivors[0].candidate.url == "a");
    CHECK(r2.survivors[1].candidate.url == "c");
    CHECK(r2.duplicate_url == 0);
    CHECK(r2.duplicate_content == 1);

    // Order independent.
    std::vector<FetchedItem> items;
    for (int i = 0; i < 40; ++i) {
        items.push_back(item("u" + std::to_string(i % 13), "c" + std::to_string(i % 3), "h" + std::to_string(i % 7)));
    }
    auto base = dedup(items);
    std::mt19937_64 rng(1);
    for (int k = 0; k < 10; ++k) {
        std::shuffle(items.begin(), items.end(), rng);
        auto again = dedup(items);
        REQUIRE(again.survivors.size() == base.survivors.size());
        for (std::size_t i = 0; i < base.survivors.size(); ++i) {
            CHECK(again.survivors[i].candidate == base.survivors[i].candidate);
            CHECK(again.survivors[i].sha256 == base.survivors[i].sha256);
        }
        CHECK(again.duplicate_url == base.duplicate_url);
        CHECK(again.duplicate_content == base.duplicate_content);
    }
    CHECK(base.survivors.size() + base.duplicate_url + base.duplicate_content == 40);
    CHECK(dedup({}).survivors.empty());
}

TEST_CASE("record assembly") {
    auto r = record();
    CHECK(r.url == "https://example.org/walk.gpx");
    CHECK(r.warc_offset == 3215);
    CHECK(r.warc_len == 1091);
    CHECK(r.elev_source == "GPS");
    CHECK(r.geometry.size() == 1);
    CHECK(r.geometry[0].size() == 5);

    auto props = feature_properties(r);
    std::vector<std::string> keys;
    for (auto it = props.begin(); it != props.end(); ++it) keys.push_back(it.key());
    keys.push_back("geometry");
    REQUIRE(keys.size() == 17);
    for (std::size_t i = 0; i < 17; ++i) CHECK(keys[i] == kPropertyNames[i]);

    geo::TrackMetrics m;
    auto c = candidate();
    c.url.clear();
    CHECK_THROWS_AS(assemble_record(c, track(1), m, english(), "X", elevation::ElevationSource::gps), AssemblyError);
    auto d = english();
    d.text_en.clear();
    CHECK_THROWS_AS(assemble_record(candidate(), track(1), m, d, "X", elevation::ElevationSource::gps), AssemblyError);
    CHECK_THROWS_AS(assemble_record(candidate(), track(1), m, english(), "", elevation::ElevationSource::gps),
                    AssemblyError);
    auto no_ele = track(1);
    no_ele.segments[0].points[2].ele.reset();
    CHECK_THROWS_AS(assemble_record(candidate(), no_ele, m, english(), "X", elevation::ElevationSource::dem),
                    AssemblyError);
    CHECK_THROWS_AS(assemble_record(candidate(), gpx::Track{}, m, english(), "X", elevation::ElevationSource::dem),
                    AssemblyError);
}

TEST_CASE("rounding") {
    CHECK(round2(1234.567) == 1234.57);
    CHECK((round2(4.005) == 4.0 || round2(4.005) == 4.01));
    CHECK(round2(-0.001) == 0.0);
    CHECK_FALSE(std::signbit(round2(-0.001)));
    CHECK_FALSE(std::signbit(round2(-0.0)));
    CHECK(round2(-2.345) == doctest::Approx(-2.35).epsilon(0.003));
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(-0.004999, 0.004999);
    for (int i = 0; i < 1000; ++i) CHECK_FALSE(std::signbit(round2(u(rng))));
}

TEST_CASE("GeoJSON export") {
    std::vector<OutputRecord> recs = {record(), record(3)};
    recs[1].url = "https://example.org/b.gpx";
    auto j = nlohmann::json::parse(to_geojson(recs));
    CHECK(j["type"] == "FeatureCollection");
    REQUIRE(j["features"].size() == 2);
    const auto& f0 = j["features"][0];
    CHECK(f0["type"] == "Feature");
    CHECK(f0["properties"].size() == 16);
    CHECK(f0["properties"]["length_2d"] == 1234.57);
    CHECK(f0["properties"]["is_circular"] == false);
    CHECK(f0["geometry"]["type"] == "MultiLineString");
    CHECK(j["features"][1]["geometry"]["coordinates"].size() == 3);
    const auto& v = f0["geometry"]["coordinates"][0][0];
    REQUIRE(v.size() == 3);
    CHECK(v[0] == doctest::Approx(-0.3));
    CHECK(v[1] == doctest::Approx(51.0));
    CHECK(v[2] == 100.0);

    auto text = to_geojson(recs);
    CHECK(text.find("\"time\"") == std::string::npos);
    CHECK(text == to_geojson(recs));
}

TEST_CASE("JSONL and CSV export") {
    std::vector<OutputRecord> recs = {record(), record(2)};
    recs[1].desc = "Has, commas and \"quotes\"";
    auto lines = split_lines(to_jsonl(recs), "\n");
    REQUIRE(lines.size() == 2);
    auto first = nlohmann::ordered_json::parse(lines[0]);
    CHECK(first.size() == 17);
    CHECK(first["geometry"]["type"] == "MultiLineString");
    CHECK(nlohmann::json::parse(lines[1])["desc"] == "Has, commas and \"quotes\"");

    auto csv = to_csv(recs);
    auto rows = split_lines(csv, "\r\n");
    REQUIRE(rows.size() == 3);
    CHECK(rows[0] ==
          "url,warc_file,warc_offset,warc_len,country,desc,desc_lang,desc_en,elev_source,elev_highest,elev_lowest,"
          "uphill,downhill,length_2d,length_3d,is_circular");
    CHECK(rows[1].find(",1234.57,1240.12,False") != std::string::npos);
    CHECK(rows[1].find(",104.00,100.00,") != std::string::npos);
    CHECK(rows[2].find(",\"Has, commas and \"\"quotes\"\"\",") != std::string::npos);
    CHECK(to_csv({}) == rows[0] + "\r\n");
}

TEST_CASE("export files are byte-identical across runs") {
    testing::TempDir dir;
    std::vector<OutputRecord> recs = {record(), record(2)};
    auto a = export_records(recs, dir / "a");
    auto b = export_records(recs, dir / "b");
    CHECK(read_file(a.geojson) == read_file(b.geojson));
    CHECK(read_file(a.jsonl) == read_file(b.jsonl));
    CHECK(read_file(a.csv) == read_file(b.csv));
    CHECK(as_string_view(read_file(a.geojson)) == to_geojson(recs));
}
