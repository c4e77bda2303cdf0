#include "gpxharvest/elevation.hpp"

#include <cmath>
#include <cstdio>

namespace gpxharvest::elevation {

bool SrtmTile::contains(double lat, double lon) const {
    return lat >= sw_lat && lat <= sw_lat + 1 && lon >= sw_lon && lon <= sw_lon + 1;
}

SrtmTile decode_hgt(std::span<const std::uint8_t> bytes, int sw_lat, int sw_lon) {
    int n = 0;
    if (bytes.size() == 2u * kSrtm3Size * kSrtm3Size) {
        n = kSrtm3Size;
    } else if (bytes.size() == 2u * kSrtm1Size * kSrtm1Size) {
        n = kSrtm1Size;
    } else {
        throw TileFormatError("unexpected HGT size " + std::to_string(bytes.size()));
    }
    SrtmTile tile{sw_lat, sw_lon, n, std::vector<std::int16_t>(static_cast<std::size_t>(n) * n)};
    for (std::size_t i = 0; i < tile.samples.size(); ++i) {
        auto hi = static_cast<std::uint16_t>(bytes[2 * i]);
        auto lo = static_cast<std::uint16_t>(bytes[2 * i + 1]);
        tile.samples[i] = static_cast<std::int16_t>((hi << 8) | lo);
    }
    return tile;
}

Bytes encode_hgt(const SrtmTile& tile) {
    Bytes out(tile.samples.size() * 2);
    for (std::size_t i = 0; i < tile.samples.size(); ++i) {
        auto v = static_cast<std::uint16_t>(tile.samples[i]);
        out[2 * i] = static_cast<std::uint8_t>(v >> 8);
        out[2 * i + 1] = static_cast<std::uint8_t>(v & 0xff);
    }
    return out;
}

std::string tile_name_for(double lat, double lon) {
    int flat = static_cast<int>(std::floor(lat));
    int flon = static_cast<int>(std::floor(lon));
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%c%02d%c%03d", flat < 0 ? 'S' : 'N', std::abs(flat), flon < 0 ? 'W' : 'E',
                  std::abs(flon));
    return buf;
}

std::optional<std::pair<int, int>> parse_tile_name(std::string_view name) {
    if (name.size() != 7) return std::nullopt;
    char ns = name[0], ew = name[3];
    if ((ns != 'N' && ns != 'S' && ns != 'n' && ns != 's') || (ew != 'E' && ew != 'W' && ew != 'e' && ew != 'w')) {
        return std::nullopt;
    }
    auto digits = [&](std::size_t pos, std::size_t len) -> std::optional<int> {
        int v = 0;
        for (std::size_t i = pos; i < pos + len; ++i) {
            if (name[i] < '0' || name[i] > '9') return std::nullopt;
            v = v * 10 + (name[i] - '0');
        }
        return v;
    };
    auto lat = digits(1, 2);
    auto lon = digits(4, 3);
    if (!lat || !lon) return std::nullopt;
    return std::pair{(ns == 'S' || ns == 's') ? -*lat : *lat, (ew == 'W' || ew == 'w') ? -*lon : *lon};
}

std::optional<double> sample_elevation(const SrtmTile& tile, double lat, double lon) {
    if (!tile.contains(lat, lon)) {
        throw std::out_of_range("point (" + std::to_string(lat) + ", " + std::to_string(lon) + ") outside tile " +
                                tile_name_for(tile.sw_lat, tile.sw_lon));
    }
    const double cells = tile.n - 1;
    double row = (tile.sw_lat + 1 - lat) * cells;
    double col = (lon - tile.sw_lon) * cells;
    // Queries within rounding distance of a node land exactly on it.
    constexpr double kSnap = 1e-7;
    if (std::abs(row - std::round(row)) < kSnap) row = std::round(row);
    if (std::abs(col - std::round(col)) < kSnap) col = std::round(col);
    int r0 = std::min(static_cast<int>(std::floor(row)), tile.n - 2);
    int c0 = std::min(static_cast<int>(std::floor(col)), tile.n - 2);
    double fr = row - r0;
    double fc = col - c0;

    const int rows[4] = {r0, r0, r0 + 1, r0 + 1};
    const int cols[4] = {c0, c0 + 1, c0, c0 + 1};
    const double weights[4] = {(1 - fr) * (1 - fc), (1 - fr) * fc, fr * (1 - fc), fr * fc};

    double sum = 0.0;
    double weight = 0.0;
    double plain_sum = 0.0;
    int valid = 0;
    for (int k = 0; k < 4; ++k) {
        auto v = tile.at(rows[k], cols[k]);
        if (v == kVoid) continue;
        ++valid;
        plain_sum += v;
        sum += weights[k] * v;
        weight += weights[k];
    }
    if (valid == 0) return std::nullopt;
    // Query sits on a void node or void edge: every weighted corner is void.
    if (weight <= 0.0) return plain_sum / valid;
    return sum / weight;
}

DirectoryTileStore::DirectoryTileStore(std::filesystem::path dir) : dir_(std::move(dir)) {}

std::shared_ptr<const SrtmTile> DirectoryTileStore::find(const std::string& name) {
    Entry* entry = nullptr;
    {
        std::lock_guard lock(mu_);
        auto& slot = cache_[name];
        if (!slot) slot = std::make_unique<Entry>();
        entry = slot.get();
    }
    std::call_once(entry->once, [&] {
        try {
            auto corner = parse_tile_name(name);
            if (!corner) return;
            auto plain = dir_ / (name + ".hgt");
            auto gz = dir_ / (name + ".hgt.gz");
            Bytes bytes;
            if (std::filesystem::exists(plain)) {
                bytes = read_file(plain);
            } else if (std::filesystem::exists(gz)) {
                bytes = gunzip_all(read_file(gz));
            } else {
                return;
            }
            entry->tile = std::make_shared<const SrtmTile>(decode_hgt(bytes, corner->first, corner->second));
        } catch (...) {
            entry->error = std::current_exception();
        }
    });
    if (entry->error) std::rethrow_exception(entry->error);
    return entry->tile;
}

void MemoryTileStore::add(SrtmTile tile) {
    auto name = tile_name_for(tile.sw_lat, tile.sw_lon);
    tiles_[name] = std::make_shared<const SrtmTile>(std::move(tile));
}

std::shared_ptr<const SrtmTile> MemoryTileStore::find(const std::string& name) {
    auto it = tiles_.find(name);
    return it == tiles_.end() ? nullptr : it->second;
}

std::string_view to_string(ElevationSource source) {
    return source == ElevationSource::gps ? "GPS" : "DEM";
}

std::optional<double> lookup_elevation(TileStore& tiles, double lat, double lon) {
    auto tile = tiles.find(tile_name_for(lat, lon));
    if (!tile) return std::nullopt;
    return sample_elevation(*tile, lat, lon);
}

std::optional<BackfillResult> backfill_elevation(const gpx::Track& track, TileStore& tiles) {
    bool complete = true;
    for (const auto& seg : track.segments) {
        for (const auto& p : seg.points) complete &= p.ele.has_value();
    }
    if (complete) return BackfillResult{track, ElevationSource::gps};

    BackfillResult result{track, ElevationSource::dem};
    for (auto& seg : result.track.segments) {
        for (auto& p : seg.points) {
            auto ele = lookup_elevation(tiles, p.lat, p.lon);
            if (!ele) return std::nullopt;
            p.ele = *ele;
        }
    }
    return result;
}

}  // namespace gpxharvest::elevation
