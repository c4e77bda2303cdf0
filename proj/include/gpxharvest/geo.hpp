#pragma once

#include "gpxharvest/gpx.hpp"

#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace gpxharvest::geo {

inline constexpr double kEarthRadiusM = 6'371'008.8;
inline constexpr double kDefaultCircularRadiusM = 350.0;

double haversine_m(double lat1, double lon1, double lat2, double lon2);
double haversine_m(const gpx::TrackPoint& a, const gpx::TrackPoint& b);

/// Sum of great-circle distances between consecutive points of each
/// segment; gaps between segments add nothing.
double length_2d(const gpx::Track& track);

/// As length_2d with each step lifted to sqrt(d^2 + dEle^2); steps with a
/// missing elevation contribute their flat distance.
double length_3d(const gpx::Track& track);

struct ElevationStats {
    double highest = 0.0;
    double lowest = 0.0;
    double uphill = 0.0;
    double downhill = 0.0;
};

/// Max/min elevation and cumulative climb/descent. Changes are accumulated
/// against a reference height and only committed once they exceed
/// `deadband`; 0 gives raw sums of positive and negative steps. Points
/// without elevation are skipped.
ElevationStats elevation_stats(const gpx::Track& track, double deadband = 0.0);

/// First point of the first segment within `radius_m` of the last point of
/// the last segment (inclusive).
bool is_circular(const gpx::Track& track, double radius_m = kDefaultCircularRadiusM);

struct TrackMetrics {
    double length_2d = 0.0;
    double length_3d = 0.0;
    double elev_highest = 0.0;
    double elev_lowest = 0.0;
    double uphill = 0.0;
    double downhill = 0.0;
    bool is_circular = false;
};

TrackMetrics compute_metrics(const gpx::Track& track, double circular_radius_m = kDefaultCircularRadiusM,
                             double deadband = 0.0);

struct LonLat {
    double lon = 0.0;
    double lat = 0.0;
    bool operator==(const LonLat&) const = default;
};

using Ring = std::vector<LonLat>;  // closed: front() == back()

struct Polygon {
    Ring outer;
    std::vector<Ring> holes;
};

struct BoundingBox {
    double min_lon = 0, min_lat = 0, max_lon = 0, max_lat = 0;
    bool contains(const LonLat& p) const {
        return p.lon >= min_lon && p.lon <= max_lon && p.lat >= min_lat && p.lat <= max_lat;
    }
};

struct CountryShape {
    std::string name;
    std::vector<Polygon> polygons;
    BoundingBox bbox;
};

struct CountryBoundaries {
    std::vector<CountryShape> countries;  // file order
};

class BoundaryLoadError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Even-odd test against one ring; points on an edge or vertex count as
/// inside.
bool point_in_ring(const LonLat& p, const Ring& ring);

/// Inside the outer ring and not strictly inside any hole (a point on a
/// hole's boundary is inside the polygon).
bool point_in_polygon(const LonLat& p, const Polygon& polygon);

/// GeoJSON FeatureCollection of Polygon/MultiPolygon features named by a
/// "shapeName" or "name" property. Unclosed rings are rejected.
CountryBoundaries load_boundaries(const nlohmann::json& geojson);
CountryBoundaries load_boundaries(const std::filesystem::path& path);

inline constexpr const char* kUnknownCountry = "Unknown";

struct CountryMatch {
    std::string name = kUnknownCountry;
    bool matched = false;
    bool ambiguous = false;  // more than one country contains the point
};

CountryMatch country_at(const LonLat& p, const CountryBoundaries& boundaries);

/// Country of the track's first point; first match in file order wins.
CountryMatch assign_country(const gpx::Track& track, const CountryBoundaries& boundaries);

}  // namespace gpxharvest::geo
