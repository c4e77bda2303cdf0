#include "gpxharvest/gpx.hpp"
#include "support.hpp"

#include <doctest.h>

#include <random>

using namespace gpxharvest;
using namespace gpxharvest::gpx;
using gpxharvest::testing::write_gpx;
using gpxharvest::testing::GpxWriteOptions;

namespace {

GpxDocument parse(std::string_view xml) {
    return parse_gpx(to_bytes(xml), "http://a.example/t.gpx");
}

const char* kMinimal = R"(<?xml version="1.0" encoding="UTF-8"?>
<gpx version="1.1" creator="x" xmlns="http://www.topografix.com/GPX/1/1">
  <trk>
    <name>Morning loop</name>
    <desc>Along the  river &amp; back, <b>lovely</b>.</desc>
    <trkseg>
      <trkpt lat="51.5" lon="-0.1"><ele>12.5</ele><time>2024-03-01T10:15:30Z</time></trkpt>
      <trkpt lat="51.501" lon="-0.101"><ele>13</ele><time>2024-03-01T10:16:30.250Z</time></trkpt>
    </trkseg>
  </trk>
</gpx>)";

Track timed_track(std::size_t n) {
    Track t;
    Segment s;
    for (std::size_t i = 0; i < n; ++i) {
        TrackPoint p{50.0 + 0.001 * static_cast<double>(i), 8.0, 100.0 + static_cast<double>(i), std::nullopt};
        p.time = Timestamp{std::chrono::seconds{1'700'000'000 + static_cast<long>(i)}};
        s.points.push_back(p);
    }
    t.segments.push_back(s);
    return t;
}

}  // namespace

TEST_CASE("minimal document") {
    auto doc = parse(kMinimal);
    REQUIRE(doc.tracks.size() == 1);
    const auto& t = doc.tracks[0];
    CHECK(t.name == "Morning loop");
    CHECK(t.desc == "Along the  river & back, lovely.");
    REQUIRE(t.segments.size() == 1);
    REQUIRE(t.point_count() == 2);
    const auto& p = t.segments[0].points;
    CHECK(p[0].lat == 51.5);
    CHECK(p[0].lon == -0.1);
    CHECK(p[0].ele == 12.5);
    REQUIRE(p[0].time);
    CHECK(p[0].time->time_since_epoch().count() == 1709288130000);
    CHECK(p[1].time->time_since_epoch().count() == 1709288190250);
    CHECK(doc.source_url == "http://a.example/t.gpx");
    CHECK(doc.content_hash == sha256(to_bytes(kMinimal)));
}

TEST_CASE("non-GPX content is a parse error") {
    CHECK_THROWS_AS(parse("<html>404</html>"), ParseError);
    CHECK_THROWS_AS(parse("not xml at all"), ParseError);
    CHECK_THROWS_AS(parse(""), ParseError);
    CHECK_THROWS_AS(parse("<gpx><trk></gpx>"), ParseError);
    CHECK_THROWS_AS(parse(R"(<gpx xmlns="http://example.com/other"/>)"), ParseError);
}

TEST_CASE("two tracks") {
    Track a = timed_track(3), b = timed_track(4);
    auto doc = parse(write_gpx({a, b}));
    CHECK(doc.tracks.size() == 2);
    CHECK_FALSE(extract_single_track(doc));
}

TEST_CASE("extract_single_track") {
    SUBCASE("one track") {
        auto doc = parse(write_gpx({timed_track(3)}));
        auto t = extract_single_track(doc);
        REQUIRE(t);
        CHECK(t->point_count() == 3);
    }
    SUBCASE("second track has no points") {
        Track empty;
        empty.segments.emplace_back();
        auto doc = parse(write_gpx({timed_track(3), empty}));
        auto t = extract_single_track(doc);
        REQUIRE(t);
        CHECK(t->point_count() == 3);
    }
    SUBCASE("no tracks") {
        CHECK_FALSE(extract_single_track(parse(R"(<gpx xmlns="http://www.topografix.com/GPX/1/1"/>)")));
    }
}

TEST_CASE("GPX 1.0 and namespace-less documents") {
    for (std::string version : {"1.0", "1.1", ""}) {
        CAPTURE(version);
        GpxWriteOptions opts;
        opts.version = version;
        auto doc = parse(write_gpx({timed_track(5)}, opts));
        REQUIRE(doc.tracks.size() == 1);
        CHECK(doc.tracks[0].point_count() == 5);
    }
}

TEST_CASE("extension elements are ignored") {
    auto doc = parse(R"(<gpx xmlns="http://www.topografix.com/GPX/1/1" xmlns:gpxtpx="http://www.garmin.com/xmlschemas/TrackPointExtension/v1">
<trk><extensions><gpxtpx:desc>not this</gpxtpx:desc></extensions>
<trkseg><trkpt lat="1" lon="2"><ele>3</ele><extensions><gpxtpx:TrackPointExtension><gpxtpx:hr>140</gpxtpx:hr><gpxtpx:ele>999</gpxtpx:ele></gpxtpx:TrackPointExtension></extensions></trkpt>
<trkpt lat="1.001" lon="2"><unknownTag>x</unknownTag></trkpt></trkseg></trk></gpx>)");
    REQUIRE(doc.tracks.size() == 1);
    const auto& pts = doc.tracks[0].segments[0].points;
    REQUIRE(pts.size() == 2);
    CHECK(pts[0].ele == 3.0);
    CHECK_FALSE(pts[1].ele);
    CHECK_FALSE(doc.tracks[0].desc);
}

TEST_CASE("invalid points are dropped and counted") {
    std::string xml = R"(<gpx xmlns="http://www.topografix.com/GPX/1/1"><trk><trkseg>)";
    for (int i = 0; i < 200; ++i) xml += R"(<trkpt lat="10" lon="20"/>)";
    xml += R"(<trkpt lat="95" lon="20"/><trkpt lat="abc" lon="20"/>)";
    xml += "</trkseg></trk></gpx>";
    auto doc = parse(xml);
    REQUIRE(doc.tracks.size() == 1);
    CHECK(doc.tracks[0].point_count() == 200);
    CHECK(doc.counters.points_dropped == 2);
    CHECK(doc.counters.tracks_dropped_invalid == 0);
}

TEST_CASE("a track losing more than 1% of its points is dropped") {
    std::string xml = R"(<gpx xmlns="http://www.topografix.com/GPX/1/1"><trk><trkseg>)";
    for (int i = 0; i < 97; ++i) xml += R"(<trkpt lat="10" lon="20"/>)";
    xml += R"(<trkpt lat="10" lon="181"/><trkpt lat="-91" lon="20"/><trkpt lon="20"/>)";
    xml += "</trkseg></trk></gpx>";
    auto doc = parse(xml);
    CHECK(doc.tracks.empty());
    CHECK(doc.counters.tracks_dropped_invalid == 1);
    CHECK(doc.counters.points_dropped == 3);
}

TEST_CASE("empty segments are dropped") {
    auto doc = parse(R"(<gpx xmlns="http://www.topografix.com/GPX/1/1"><trk><trkseg/><trkseg><trkpt lat="1" lon="1"/></trkseg><trkseg></trkseg></trk></gpx>)");
    REQUIRE(doc.tracks.size() == 1);
    CHECK(doc.tracks[0].segments.size() == 1);
    CHECK(doc.counters.empty_segments_dropped == 2);
}

TEST_CASE("routes become tracks when no track has points") {
    Track r = timed_track(4);
    r.name = "Plan";
    r.desc = "Planned route";
    GpxWriteOptions opts;
    opts.as_route = true;
    auto doc = parse(write_gpx({r}, opts));
    REQUIRE(doc.tracks.size() == 1);
    CHECK(doc.tracks[0].segments.size() == 1);
    CHECK(doc.tracks[0].point_count() == 4);
    CHECK(doc.tracks[0].desc == "Planned route");
    CHECK(doc.counters.routes_converted == 1);

    auto mixed = parse(R"(<gpx xmlns="http://www.topografix.com/GPX/1/1"><rte><rtept lat="1" lon="1"/></rte>
<trk><trkseg><trkpt lat="2" lon="2"/></trkseg></trk></gpx>)");
    REQUIRE(mixed.tracks.size() == 1);
    CHECK(mixed.tracks[0].segments[0].points[0].lat == 2.0);
    CHECK(mixed.counters.routes_converted == 0);
}

TEST_CASE("metadata description is the fallback") {
    GpxWriteOptions o11;
    o11.metadata_desc = "Metadata text";
    Track t = timed_track(2);
    auto doc = parse(write_gpx({t}, o11));
    CHECK(doc.metadata_desc == "Metadata text");
    CHECK(description_of(doc.tracks[0], doc) == "Metadata text");

    GpxWriteOptions o10;
    o10.version = "1.0";
    o10.metadata_desc = "Top-level text";
    auto doc10 = parse(write_gpx({t}, o10));
    CHECK(description_of(doc10.tracks[0], doc10) == "Top-level text");

    t.desc = "Track text";
    auto doc2 = parse(write_gpx({t}, o11));
    CHECK(description_of(doc2.tracks[0], doc2) == "Track text");

    auto bare = parse(write_gpx({timed_track(2)}));
    CHECK_FALSE(description_of(bare.tracks[0], bare));
}

TEST_CASE("legacy encodings") {
    std::string xml = "<?xml version=\"1.0\" encoding=\"windows-1252\"?>\n"
                      "<gpx xmlns=\"http://www.topografix.com/GPX/1/1\"><trk><desc>Caf\xE9 \x80 \x96</desc>"
                      "<trkseg><trkpt lat=\"1\" lon=\"1\"/></trkseg></trk></gpx>";
    auto doc = parse(xml);
    CHECK(doc.tracks[0].desc == "Caf\xC3\xA9 \xE2\x82\xAC \xE2\x80\x93");

    std::string latin1 = "<?xml version=\"1.0\" encoding=\"ISO-8859-1\"?>\n"
                         "<gpx><trk><desc>Stra\xDF" "e</desc><trkseg><trkpt lat=\"1\" lon=\"1\"/></trkseg></trk></gpx>";
    CHECK(parse(latin1).tracks[0].desc == "Stra\xC3\x9F" "e");
}

TEST_CASE("leading whitespace before the declaration") {
    auto doc = parse(std::string("\n\n  ") + kMinimal);
    CHECK(doc.tracks.size() == 1);
}

TEST_CASE("strip_timestamps") {
    SUBCASE("timestamped points") {
        auto t = timed_track(3);
        auto s = strip_timestamps(t);
        REQUIRE(s.point_count() == 3);
        for (std::size_t i = 0; i < 3; ++i) {
            const auto& a = t.segments[0].points[i];
            const auto& b = s.segments[0].points[i];
            CHECK_FALSE(b.time);
            CHECK(a.lat == b.lat);
            CHECK(a.lon == b.lon);
            CHECK(a.ele == b.ele);
        }
        CHECK(strip_timestamps(s) == s);
    }
    SUBCASE("no timestamps") {
        auto t = strip_timestamps(timed_track(3));
        CHECK(strip_timestamps(t) == t);
    }
    SUBCASE("empty segment") {
        Track t;
        t.segments.emplace_back();
        CHECK(strip_timestamps(t) == t);
    }
}

TEST_CASE("geometry survives a write and re-parse") {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> lat(-90, 90), lon(-180, 180), ele(-400, 8800);
    for (int round = 0; round < 20; ++round) {
        Track t;
        for (int s = 0; s < 1 + round % 3; ++s) {
            Segment seg;
            for (int i = 0; i < 50; ++i) {
                TrackPoint p{lat(rng), lon(rng), std::nullopt, std::nullopt};
                if (i % 4) p.ele = ele(rng);
                seg.points.push_back(p);
            }
            t.segments.push_back(seg);
        }
        auto doc = parse(write_gpx({t}));
        REQUIRE(doc.tracks.size() == 1);
        CHECK(doc.tracks[0].segments == t.segments);
    }
}

TEST_CASE("parse_timestamp") {
    CHECK(parse_timestamp("2024-03-01T10:15:30Z")->time_since_epoch().count() == 1709288130000);
    CHECK(parse_timestamp("2024-03-01T12:15:30+02:00")->time_since_epoch().count() == 1709288130000);
    CHECK(parse_timestamp("2024-03-01T10:15:30.5Z")->time_since_epoch().count() == 1709288130500);
    CHECK(parse_timestamp("2024-03-01T10:15:30")->time_since_epoch().count() == 1709288130000);
    CHECK_FALSE(parse_timestamp("2024-02-30T10:15:30Z"));
    CHECK_FALSE(parse_timestamp("yesterday"));
    CHECK_FALSE(parse_timestamp("2024-03-01T10:15:30ZZ"));
}
