#pragma once

#include "gpxharvest/desc.hpp"
#include "gpxharvest/elevation.hpp"
#include "gpxharvest/fetch.hpp"
#include "gpxharvest/geo.hpp"
#include "gpxharvest/judge.hpp"
#include "gpxharvest/lang.hpp"
#include "gpxharvest/pipeline.hpp"
#include "gpxharvest/translate.hpp"

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace gpxharvest::pipeline {

struct JudgeSettings {
    std::string backend = "stub";  // "stub" or "http"
    std::string url;
    std::string model;
    std::string api_key;
    std::filesystem::path script;  // scripted replies for the stub backend
    int max_in_flight = 4;
    int max_retries = 3;
};

struct TranslatorSettings {
    std::string backend = "stub";  // "stub" or "command"
    std::string command;
    std::filesystem::path script;
    int max_in_flight = 1;
};

struct PipelineConfig {
    std::filesystem::path work_dir = "work";
    std::vector<std::string> shards;  // globs, files, or http(s) URLs
    std::optional<std::filesystem::path> fixture_dir;
    FilterConfig filter;
    fetch::FetchPolicy fetch = fetch::FetchPolicy::from_env();
    JudgeSettings judge;
    TranslatorSettings translator;
    std::filesystem::path srtm_dir;
    std::filesystem::path boundaries;
    std::filesystem::path lang_profiles;
    std::size_t workers = 0;  // 0 = one per hardware thread

    /// Relative paths in the file resolve against `base_dir`.
    static PipelineConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
    static PipelineConfig load(const std::filesystem::path& path);
    void validate() const;
    std::size_t worker_count() const;
};

enum class Stage { index, fetch, parse, enrich, metrics, export_records };

inline constexpr std::array kAllStages = {Stage::index,  Stage::fetch,   Stage::parse,
                                          Stage::enrich, Stage::metrics, Stage::export_records};

std::string_view to_string(Stage s);
std::optional<Stage> stage_from_string(std::string_view s);

/// Default on-disk layout under the work directory.
struct WorkLayout {
    std::filesystem::path candidates;  // index output file
    std::filesystem::path raw;         // fetch output dir
    std::filesystem::path parsed;
    std::filesystem::path enriched;
    std::filesystem::path metrics;
    std::filesystem::path exported;
    std::filesystem::path stats;

    explicit WorkLayout(const std::filesystem::path& work_dir);
};

struct StageReport {
    Stage stage = Stage::index;
    std::uint64_t inputs = 0;
    std::uint64_t outputs = 0;
    std::map<Reason, std::uint64_t> exclusions;
    std::map<std::string, std::uint64_t> notes;  // warnings that do not drop items
    bool executed = false;                       // false when resumed from a manifest

    std::uint64_t excluded() const;
    nlohmann::json to_json() const;
    static StageReport from_json(const nlohmann::json& j);
};

class StageError : public std::runtime_error {
public:
    StageError(Stage stage, const std::string& what)
        : std::runtime_error(std::string(to_string(stage)) + ": " + what), stage_(stage) {}
    Stage stage() const noexcept { return stage_; }

private:
    Stage stage_;
};

/// One item moving through parse -> enrich -> metrics -> export.
struct TrackRecord {
    FetchedItem item;
    gpx::Track track;
    std::optional<std::string> desc_raw;
    std::optional<Description> desc;
    desc::PiiFlags pii;
    std::optional<elevation::ElevationSource> elev_source;
    std::optional<geo::TrackMetrics> metrics;
    std::optional<std::string> country;
};

nlohmann::json track_to_json(const gpx::Track& track);
gpx::Track track_from_json(const nlohmann::json& j);
nlohmann::json to_json(const TrackRecord& r);
TrackRecord track_record_from_json(const nlohmann::json& j);

std::vector<TrackRecord> read_track_records(const std::filesystem::path& jsonl);
void write_track_records(const std::filesystem::path& jsonl, const std::vector<TrackRecord>& records);

/// Pluggable collaborators. Null members fall back to what the config
/// describes.
struct Backends {
    fetch::ByteRangeTransport* transport = nullptr;
    desc::TextJudge* judge = nullptr;
    desc::Translator* translator = nullptr;
    const desc::LanguageDetector* detector = nullptr;
    elevation::TileStore* tiles = nullptr;
    const geo::CountryBoundaries* boundaries = nullptr;
};

/// Owns backends built from a PipelineConfig.
class ConfiguredBackends {
public:
    explicit ConfiguredBackends(const PipelineConfig& config, const std::filesystem::path& audit_dir = {});
    /// Fills every null member of `overrides` from this object.
    Backends resolve(Backends overrides = {}) const;

    fetch::ByteRangeTransport& transport() const;
    desc::TextJudge& judge() const;
    desc::Translator& translator() const;
    const desc::LanguageDetector& detector() const;
    elevation::TileStore& tiles() const;
    const geo::CountryBoundaries& boundaries() const;

private:
    const PipelineConfig& config_;
    std::filesystem::path audit_dir_;
    mutable std::unique_ptr<fetch::ByteRangeTransport> transport_;
    mutable std::unique_ptr<desc::TextJudge> judge_;
    mutable std::unique_ptr<desc::Translator> translator_;
    mutable std::unique_ptr<desc::LanguageDetector> detector_;
    mutable std::unique_ptr<elevation::TileStore> tiles_;
    mutable std::unique_ptr<geo::CountryBoundaries> boundaries_;
};

StageReport run_index_stage(const PipelineConfig& config, const std::filesystem::path& out_file);
StageReport run_fetch_stage(const PipelineConfig& config, const std::filesystem::path& candidates,
                            const std::filesystem::path& out_dir, fetch::ByteRangeTransport& transport);
StageReport run_parse_stage(const PipelineConfig& config, const std::filesystem::path& raw_dir,
                            const std::filesystem::path& out_dir);
StageReport run_enrich_stage(const PipelineConfig& config, const std::filesystem::path& parsed_dir,
                             const std::filesystem::path& out_dir, desc::TextJudge& judge,
                             desc::Translator& translator, const desc::LanguageDetector& detector);
StageReport run_metrics_stage(const PipelineConfig& config, const std::filesystem::path& enriched_dir,
                              const std::filesystem::path& out_dir, elevation::TileStore& tiles,
                              const geo::CountryBoundaries& boundaries);
StageReport run_export_stage(const PipelineConfig& config, const std::filesystem::path& metrics_dir,
                             const std::filesystem::path& out_dir);

struct RunReport {
    std::vector<StageReport> stages;
    std::uint64_t final_records = 0;

    bool had_item_failures() const;
    /// Totals per reason over all stages; every reason is listed.
    std::map<Reason, std::uint64_t> exclusion_totals() const;
    nlohmann::json to_json() const;
    std::string table() const;
};

/// Runs stages [from, to] in order over the work layout. A stage whose
/// manifest matches its current input is reused instead of re-run, unless
/// `force` is set.
RunReport run_pipeline(const PipelineConfig& config, Backends backends = {}, Stage from = Stage::index,
                       Stage to = Stage::export_records, bool force = false);

}  // namespace gpxharvest::pipeline
