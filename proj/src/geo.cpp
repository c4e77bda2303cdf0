#include "gpxharvest/geo.hpp"

#include "gpxharvest/util.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>

namespace gpxharvest::geo {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

const gpx::TrackPoint* first_point(const gpx::Track& track) {
    for (const auto& seg : track.segments) {
        if (!seg.points.empty()) return &seg.points.front();
    }
    return nullptr;
}

const gpx::TrackPoint* last_point(const gpx::Track& track) {
    for (auto it = track.segments.rbegin(); it != track.segments.rend(); ++it) {
        if (!it->points.empty()) return &it->points.back();
    }
    return nullptr;
}

}  // namespace

double haversine_m(double lat1, double lon1, double lat2, double lon2) {
    double phi1 = lat1 * kDegToRad;
    double phi2 = lat2 * kDegToRad;
    double dphi = (lat2 - lat1) * kDegToRad;
    double dlambda = (lon2 - lon1) * kDegToRad;
    double s1 = std::sin(dphi / 2);
    double s2 = std::sin(dlambda / 2);
    double a = s1 * s1 + std::cos(phi1) * std::cos(phi2) * s2 * s2;
    a = std::clamp(a, 0.0, 1.0);
    return 2.0 * kEarthRadiusM * std::asin(std::sqrt(a));
}

double haversine_m(const gpx::TrackPoint& a, const gpx::TrackPoint& b) {
    return haversine_m(a.lat, a.lon, b.lat, b.lon);
}

double length_2d(const gpx::Track& track) {
    double total = 0.0;
    for (const auto& seg : track.segments) {
        for (std::size_t i = 1; i < seg.points.size(); ++i) total += haversine_m(seg.points[i - 1], seg.points[i]);
    }
    return total;
}

double length_3d(const gpx::Track& track) {
    double total = 0.0;
    for (const auto& seg : track.segments) {
        for (std::size_t i = 1; i < seg.points.size(); ++i) {
            const auto& a = seg.points[i - 1];
            const auto& b = seg.points[i];
            double d = haversine_m(a, b);
            if (a.ele && b.ele) {
                double dz = *b.ele - *a.ele;
                d = std::sqrt(d * d + dz * dz);
            }
            total += d;
        }
    }
    return total;
}

ElevationStats elevation_stats(const gpx::Track& track, double deadband) {
    ElevationStats stats;
    std::optional<double> reference;
    double hi = -std::numeric_limits<double>::infinity();
    double lo = std::numeric_limits<double>::infinity();
    for (const auto& seg : track.segments) {
        for (const auto& p : seg.points) {
            if (!p.ele) continue;
            double e = *p.ele;
            hi = std::max(hi, e);
            lo = std::min(lo, e);
            if (!reference) {
                reference = e;
                continue;
            }
            double delta = e - *reference;
            if (delta > deadband) {
                stats.uphill += delta;
                reference = e;
            } else if (delta < -deadband) {
                stats.downhill -= delta;
                reference = e;
            }
        }
    }
    if (reference) {
        stats.highest = hi;
        stats.lowest = lo;
    }
    return stats;
}

bool is_circular(const gpx::Track& track, double radius_m) {
    const auto* a = first_point(track);
    const auto* b = last_point(track);
    if (!a || !b) return false;
    return haversine_m(*a, *b) <= radius_m;
}

TrackMetrics compute_metrics(const gpx::Track& track, double circular_radius_m, double deadband) {
    TrackMetrics m;
    m.length_2d = length_2d(track);
    m.length_3d = length_3d(track);
    auto stats = elevation_stats(track, deadband);
    m.elev_highest = stats.highest;
    m.elev_lowest = stats.lowest;
    m.uphill = stats.uphill;
    m.downhill = stats.downhill;
    m.is_circular = is_circular(track, circular_radius_m);
    return m;
}

bool point_in_ring(const LonLat& p, const Ring& ring) {
    bool inside = false;
    const std::size_t n = ring.size();
    if (n < 4) return false;
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const auto& a = ring[i];
        const auto& b = ring[j];
        // On-edge check: collinear and within the segment's box.
        double cross = (b.lon - a.lon) * (p.lat - a.lat) - (b.lat - a.lat) * (p.lon - a.lon);
        if (cross == 0.0 && p.lon >= std::min(a.lon, b.lon) && p.lon <= std::max(a.lon, b.lon) &&
            p.lat >= std::min(a.lat, b.lat) && p.lat <= std::max(a.lat, b.lat)) {
            return true;
        }
        if ((a.lat > p.lat) != (b.lat > p.lat)) {
            double x = a.lon + (p.lat - a.lat) * (b.lon - a.lon) / (b.lat - a.lat);
            if (p.lon < x) inside = !inside;
        }
    }
    return inside;
}

namespace {

bool on_ring_boundary(const LonLat& p, const Ring& ring) {
    for (std::size_t i = 1; i < ring.size(); ++i) {
        const auto& a = ring[i - 1];
        const auto& b = ring[i];
        double cross = (b.lon - a.lon) * (p.lat - a.lat) - (b.lat - a.lat) * (p.lon - a.lon);
        if (cross == 0.0 && p.lon >= std::min(a.lon, b.lon) && p.lon <= std::max(a.lon, b.lon) &&
            p.lat >= std::min(a.lat, b.lat) && p.lat <= std::max(a.lat, b.lat)) {
            return true;
        }
    }
    return false;
}

Ring parse_ring(const nlohmann::json& coords, const std::string& feature) {
    if (!coords.is_array()) throw BoundaryLoadError(feature + ": ring is not an array");
    Ring ring;
    ring.reserve(coords.size());
    for (const auto& pos : coords) {
        if (!pos.is_array() || pos.size() < 2 || !pos[0].is_number() || !pos[1].is_number()) {
            throw BoundaryLoadError(feature + ": malformed position");
        }
        ring.push_back({pos[0].get<double>(), pos[1].get<double>()});
    }
    if (ring.size() < 4) throw BoundaryLoadError(feature + ": ring has fewer than 4 positions");
    if (!(ring.front() == ring.back())) throw BoundaryLoadError(feature + ": ring is not closed");
    return ring;
}

Polygon parse_polygon(const nlohmann::json& rings, const std::string& feature) {
    if (!rings.is_array() || rings.empty()) throw BoundaryLoadError(feature + ": polygon has no rings");
    Polygon poly;
    poly.outer = parse_ring(rings[0], feature);
    for (std::size_t i = 1; i < rings.size(); ++i) poly.holes.push_back(parse_ring(rings[i], feature));
    return poly;
}

}  // namespace

bool point_in_polygon(const LonLat& p, const Polygon& polygon) {
    if (!point_in_ring(p, polygon.outer)) return false;
    for (const auto& hole : polygon.holes) {
        if (point_in_ring(p, hole) && !on_ring_boundary(p, hole)) return false;
    }
    return true;
}

CountryBoundaries load_boundaries(const nlohmann::json& geojson) {
    if (geojson.value("type", std::string{}) != "FeatureCollection" || !geojson.contains("features")) {
        throw BoundaryLoadError("boundaries file is not a GeoJSON FeatureCollection");
    }
    CountryBoundaries out;
    std::size_t index = 0;
    for (const auto& feature : geojson.at("features")) {
        ++index;
        const auto& props = feature.value("properties", nlohmann::json::object());
        std::string name;
        if (props.contains("shapeName") && props["shapeName"].is_string()) {
            name = props["shapeName"].get<std::string>();
        } else if (props.contains("name") && props["name"].is_string()) {
            name = props["name"].get<std::string>();
        } else {
            throw BoundaryLoadError("feature " + std::to_string(index) + " has no shapeName/name property");
        }
        const auto& geom = feature.at("geometry");
        auto type = geom.value("type", std::string{});
        CountryShape shape;
        shape.name = name;
        if (type == "Polygon") {
            shape.polygons.push_back(parse_polygon(geom.at("coordinates"), name));
        } else if (type == "MultiPolygon") {
            for (const auto& rings : geom.at("coordinates")) shape.polygons.push_back(parse_polygon(rings, name));
        } else {
            throw BoundaryLoadError(name + ": unsupported geometry type " + type);
        }
        BoundingBox box{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
                        -std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
        for (const auto& poly : shape.polygons) {
            for (const auto& v : poly.outer) {
                box.min_lon = std::min(box.min_lon, v.lon);
                box.max_lon = std::max(box.max_lon, v.lon);
                box.min_lat = std::min(box.min_lat, v.lat);
                box.max_lat = std::max(box.max_lat, v.lat);
            }
        }
        shape.bbox = box;
        out.countries.push_back(std::move(shape));
    }
    return out;
}

CountryBoundaries load_boundaries(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw BoundaryLoadError("cannot open boundaries file " + path.string());
    auto j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded()) throw BoundaryLoadError("boundaries file is not valid JSON: " + path.string());
    return load_boundaries(j);
}

CountryMatch country_at(const LonLat& p, const CountryBoundaries& boundaries) {
    CountryMatch match;
    for (const auto& country : boundaries.countries) {
        if (!country.bbox.contains(p)) continue;
        bool hit = std::any_of(country.polygons.begin(), country.polygons.end(),
                               [&](const Polygon& poly) { return point_in_polygon(p, poly); });
        if (!hit) continue;
        if (match.matched) {
            match.ambiguous = true;
            break;
        }
        match.name = country.name;
        match.matched = true;
    }
    return match;
}

CountryMatch assign_country(const gpx::Track& track, const CountryBoundaries& boundaries) {
    const auto* p = first_point(track);
    if (!p) return {};
    return country_at({p->lon, p->lat}, boundaries);
}

}  // namespace gpxharvest::geo
