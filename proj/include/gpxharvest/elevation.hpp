#pragma once

#include "gpxharvest/gpx.hpp"
#include "gpxharvest/util.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace gpxharvest::elevation {

inline constexpr std::int16_t kVoid = -32768;
inline constexpr int kSrtm3Size = 1201;
inline constexpr int kSrtm1Size = 3601;

/// One 1x1 degree HGT grid. Row 0 is the northern edge, column 0 the
/// western edge; the outermost rows/columns overlap neighbouring tiles.
struct SrtmTile {
    int sw_lat = 0;
    int sw_lon = 0;
    int n = 0;
    std::vector<std::int16_t> samples;  // n*n, row-major

    std::int16_t at(int row, int col) const { return samples[static_cast<std::size_t>(row) * n + col]; }
    bool contains(double lat, double lon) const;
};

class TileFormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Decodes raw big-endian samples; the grid size follows from the byte
/// count (2*1201^2 or 2*3601^2).
SrtmTile decode_hgt(std::span<const std::uint8_t> bytes, int sw_lat, int sw_lon);
Bytes encode_hgt(const SrtmTile& tile);

/// "N51W001" style name of the tile holding (lat, lon).
std::string tile_name_for(double lat, double lon);

/// Inverse of tile_name_for: south-west corner of a named tile.
std::optional<std::pair<int, int>> parse_tile_name(std::string_view name);

/// Bilinear interpolation over the four surrounding nodes. Void corners
/// drop out and the remaining weights are renormalized; nothing when no
/// valid corner carries weight. Throws std::out_of_range when the point is
/// not inside the tile.
std::optional<double> sample_elevation(const SrtmTile& tile, double lat, double lon);

class TileStore {
public:
    virtual ~TileStore() = default;
    /// nullptr when no tile with that name exists.
    virtual std::shared_ptr<const SrtmTile> find(const std::string& name) = 0;
};

/// Directory of <NAME>.hgt or <NAME>.hgt.gz files, each loaded at most
/// once and shared read-only afterwards.
class DirectoryTileStore final : public TileStore {
public:
    explicit DirectoryTileStore(std::filesystem::path dir);
    std::shared_ptr<const SrtmTile> find(const std::string& name) override;

private:
    struct Entry {
        std::once_flag once;
        std::shared_ptr<const SrtmTile> tile;
        std::exception_ptr error;
    };

    std::filesystem::path dir_;
    std::mutex mu_;
    std::map<std::string, std::unique_ptr<Entry>> cache_;
};

/// In-memory store for tests and synthetic fixtures.
class MemoryTileStore final : public TileStore {
public:
    void add(SrtmTile tile);
    std::shared_ptr<const SrtmTile> find(const std::string& name) override;

private:
    std::map<std::string, std::shared_ptr<const SrtmTile>> tiles_;
};

enum class ElevationSource { gps, dem };

std::string_view to_string(ElevationSource source);

struct BackfillResult {
    gpx::Track track;
    ElevationSource source;
};

/// DEM elevation at one point, resolving the tile through the store.
std::optional<double> lookup_elevation(TileStore& tiles, double lat, double lon);

/// Tracks with elevation on every point come back untouched as GPS.
/// Otherwise every point is re-sampled from the DEM and tagged DEM; if any
/// point cannot be resolved the track is rejected (nullopt).
std::optional<BackfillResult> backfill_elevation(const gpx::Track& track, TileStore& tiles);

}  // namespace gpxharvest::elevation
