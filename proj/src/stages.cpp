#include "gpxharvest/stages.hpp"

#include "gpxharvest/http.hpp"
#include "gpxharvest/index_scan.hpp"
#include "gpxharvest/parallel.hpp"
#include "gpxharvest/util.hpp"
#include "gpxharvest/warc.hpp"

#include <fmt/format.h>

#include <fstream>
#include <set>
#include <sstream>

namespace gpxharvest::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::array<std::string_view, kAllStages.size()> kStageNames = {"index",  "fetch",   "parse",
                                                                          "enrich", "metrics", "export"};

std::vector<fs::path> expand_glob_or_empty(const std::string& pattern) {
    try {
        return index::expand_glob(pattern);
    } catch (const std::exception&) {
        return {};
    }
}

// Several workers may store the same payload; each uses its own temp name.
void write_payload(const fs::path& path, std::string_view data, std::size_t slot) {
    auto tmp = path;
    tmp += ".tmp" + std::to_string(slot);
    write_file(tmp, data);
    fs::rename(tmp, path);
}

fs::path resolve_path(const fs::path& base, const std::string& value) {
    fs::path p(value);
    if (p.empty() || p.is_absolute() || base.empty()) return p;
    return base / p;
}

std::string resolve_shard(const fs::path& base, const std::string& value) {
    if (value.starts_with("http://") || value.starts_with("https://")) return value;
    return resolve_path(base, value).string();
}

std::vector<json> read_jsonl(Stage stage, const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw StageError(stage, "missing input " + path.string());
    std::vector<json> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        try {
            out.push_back(json::parse(line));
        } catch (const json::exception& e) {
            throw StageError(stage, fmt::format("{}:{}: {}", path.string(), lineno, e.what()));
        }
    }
    return out;
}

template <typename T>
std::string to_jsonl_string(const std::vector<T>& items) {
    std::string out;
    for (const auto& item : items) {
        out += json(item).dump();
        out += '\n';
    }
    return out;
}

std::string file_digest(const fs::path& path) {
    return to_hex(sha256(read_file(path)));
}

fs::path manifest_path(Stage stage, const fs::path& out) {
    if (stage == Stage::index) {
        auto p = out;
        p += ".stage.json";
        return p;
    }
    return out / "stage.json";
}

// Identifies the input a stage ran against: upstream data plus the
// thresholds that stage applies.
std::string stage_key(Stage stage, const PipelineConfig& config, const fs::path& input) {
    json k;
    k["stage"] = to_string(stage);
    if (stage == Stage::index) {
        json shards = json::array();
        for (const auto& pattern : config.shards) {
            if (pattern.starts_with("http://") || pattern.starts_with("https://")) {
                shards.push_back(pattern);
                continue;
            }
            for (const auto& p : expand_glob_or_empty(pattern)) {
                std::error_code ec;
                auto size = fs::file_size(p, ec);
                shards.push_back({p.string(), ec ? 0 : size});
            }
        }
        k["shards"] = shards;
    } else {
        std::error_code ec;
        if (!fs::exists(input, ec)) return {};
        k["input"] = file_digest(input);
        if (stage != Stage::fetch) k["filter"] = config.filter;
        auto digest_or_path = [](const fs::path& p) -> json {
            std::error_code e;
            if (p.empty()) return nullptr;
            if (fs::is_regular_file(p, e)) return file_digest(p);
            return p.string();
        };
        if (stage == Stage::fetch) {
            k["fixture_dir"] = config.fixture_dir ? json(config.fixture_dir->string()) : json(nullptr);
            k["base_url"] = config.fetch.base_url;
        } else if (stage == Stage::enrich) {
            k["judge"] = {config.judge.backend, config.judge.url, config.judge.model,
                          digest_or_path(config.judge.script)};
            k["translator"] = {config.translator.backend, config.translator.command,
                               digest_or_path(config.translator.script)};
            k["lang_profiles"] = digest_or_path(config.lang_profiles);
        } else if (stage == Stage::metrics) {
            k["srtm_dir"] = config.srtm_dir.string();
            k["boundaries"] = digest_or_path(config.boundaries);
        }
    }
    auto dumped = k.dump();
    return to_hex(sha256(std::span(reinterpret_cast<const std::uint8_t*>(dumped.data()), dumped.size())));
}

void write_manifest(Stage stage, const fs::path& out, const PipelineConfig& config, const fs::path& input,
                    const StageReport& report, const std::vector<std::string>& outputs) {
    json m;
    m["stage"] = to_string(stage);
    m["key"] = stage_key(stage, config, input);
    m["outputs"] = outputs;
    m["report"] = report.to_json();
    write_file_atomic(manifest_path(stage, out), m.dump(2) + "\n");
}

std::optional<StageReport> load_complete_manifest(Stage stage, const fs::path& out, const PipelineConfig& config,
                                                  const fs::path& input) {
    auto path = manifest_path(stage, out);
    std::error_code ec;
    if (!fs::exists(path, ec)) return std::nullopt;
    try {
        auto m = json::parse(as_string_view(read_file(path)));
        auto key = stage_key(stage, config, input);
        if (key.empty() || m.at("key").get<std::string>() != key) return std::nullopt;
        fs::path base = stage == Stage::index ? out.parent_path() : out;
        for (const auto& name : m.at("outputs")) {
            if (!fs::exists(base / name.get<std::string>(), ec)) return std::nullopt;
        }
        auto report = StageReport::from_json(m.at("report"));
        report.executed = false;
        return report;
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

StageReport started(Stage stage) {
    StageReport r;
    r.stage = stage;
    r.executed = true;
    return r;
}

void ensure_dir(Stage stage, const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw StageError(stage, "cannot create " + dir.string() + ": " + ec.message());
}

}  // namespace

std::string_view to_string(Stage s) {
    return kStageNames[static_cast<std::size_t>(s)];
}

std::optional<Stage> stage_from_string(std::string_view s) {
    for (std::size_t i = 0; i < kStageNames.size(); ++i) {
        if (kStageNames[i] == s) return kAllStages[i];
    }
    return std::nullopt;
}

WorkLayout::WorkLayout(const fs::path& work_dir)
    : candidates(work_dir / "candidates.jsonl"),
      raw(work_dir / "raw"),
      parsed(work_dir / "parsed"),
      enriched(work_dir / "enriched"),
      metrics(work_dir / "metrics"),
      exported(work_dir / "export"),
      stats(work_dir / "stats.json") {}

// --- config ----------------------------------------------------------------

PipelineConfig PipelineConfig::from_json(const json& j, const fs::path& base_dir) {
    static const std::set<std::string> kKeys = {"work_dir", "shards",   "fixture_dir", "filter",
                                                "fetch",    "judge",    "translator",  "srtm_dir",
                                                "boundaries", "lang_profiles", "workers"};
    if (!j.is_object()) throw std::invalid_argument("config: expected a JSON object");
    for (const auto& [key, _] : j.items()) {
        if (!kKeys.contains(key)) throw std::invalid_argument("config: unknown key '" + key + "'");
    }
    PipelineConfig c;
    if (j.contains("work_dir")) c.work_dir = resolve_path(base_dir, j["work_dir"].get<std::string>());
    if (j.contains("shards")) {
        for (const auto& s : j["shards"]) c.shards.push_back(resolve_shard(base_dir, s.get<std::string>()));
    }
    if (j.contains("fixture_dir") && !j["fixture_dir"].is_null()) {
        c.fixture_dir = resolve_path(base_dir, j["fixture_dir"].get<std::string>());
    }
    if (j.contains("filter")) c.filter = j["filter"].get<FilterConfig>();
    if (j.contains("fetch")) {
        const auto& f = j["fetch"];
        c.fetch.max_retries = f.value("max_retries", c.fetch.max_retries);
        c.fetch.backoff_base =
            std::chrono::milliseconds(f.value("backoff_base_ms", static_cast<long>(c.fetch.backoff_base.count())));
        c.fetch.max_parallel = f.value("max_parallel", c.fetch.max_parallel);
        c.fetch.rate_limit = f.value("rate_limit", c.fetch.rate_limit);
        c.fetch.base_url = f.value("base_url", c.fetch.base_url);
    }
    if (j.contains("judge")) {
        const auto& s = j["judge"];
        c.judge.backend = s.value("backend", c.judge.backend);
        c.judge.url = s.value("url", c.judge.url);
        c.judge.model = s.value("model", c.judge.model);
        c.judge.api_key = s.value("api_key", c.judge.api_key);
        if (s.contains("script")) c.judge.script = resolve_path(base_dir, s["script"].get<std::string>());
        c.judge.max_in_flight = s.value("max_in_flight", c.judge.max_in_flight);
        c.judge.max_retries = s.value("max_retries", c.judge.max_retries);
    }
    if (j.contains("translator")) {
        const auto& s = j["translator"];
        c.translator.backend = s.value("backend", c.translator.backend);
        c.translator.command = s.value("command", c.translator.command);
        if (s.contains("script")) c.translator.script = resolve_path(base_dir, s["script"].get<std::string>());
        c.translator.max_in_flight = s.value("max_in_flight", c.translator.max_in_flight);
    }
    if (j.contains("srtm_dir")) c.srtm_dir = resolve_path(base_dir, j["srtm_dir"].get<std::string>());
    if (j.contains("boundaries")) c.boundaries = resolve_path(base_dir, j["boundaries"].get<std::string>());
    if (j.contains("lang_profiles")) c.lang_profiles = resolve_path(base_dir, j["lang_profiles"].get<std::string>());
    if (j.contains("workers")) c.workers = j["workers"].get<std::size_t>();
    c.validate();
    return c;
}

PipelineConfig PipelineConfig::load(const fs::path& path) {
    json j;
    try {
        j = json::parse(as_string_view(read_file(path)));
    } catch (const json::exception& e) {
        throw std::invalid_argument("config " + path.string() + ": " + e.what());
    }
    return from_json(j, path.parent_path());
}

void PipelineConfig::validate() const {
    filter.validate();
    fetch.validate();
    if (judge.backend != "stub" && judge.backend != "http") {
        throw std::invalid_argument("judge.backend must be 'stub' or 'http'");
    }
    if (judge.backend == "http" && judge.url.empty() && getenv_or("GPX_HARVEST_JUDGE_URL", "").empty()) {
        throw std::invalid_argument("judge.url is required for the http backend");
    }
    if (judge.max_in_flight < 1) throw std::invalid_argument("judge.max_in_flight must be >= 1");
    if (judge.max_retries < 0) throw std::invalid_argument("judge.max_retries must be >= 0");
    if (translator.backend != "stub" && translator.backend != "command") {
        throw std::invalid_argument("translator.backend must be 'stub' or 'command'");
    }
    if (translator.backend == "command" && translator.command.empty()) {
        throw std::invalid_argument("translator.command is required for the command backend");
    }
    if (translator.max_in_flight < 1 || translator.max_in_flight > 64) {
        throw std::invalid_argument("translator.max_in_flight must be in [1, 64]");
    }
}

std::size_t PipelineConfig::worker_count() const {
    return workers == 0 ? default_workers() : workers;
}

// --- reports ---------------------------------------------------------------

std::uint64_t StageReport::excluded() const {
    std::uint64_t n = 0;
    for (const auto& [_, count] : exclusions) n += count;
    return n;
}

json StageReport::to_json() const {
    json ex = json::object();
    for (const auto& [reason, count] : exclusions) ex[std::string(pipeline::to_string(reason))] = count;
    json j;
    j["stage"] = pipeline::to_string(stage);
    j["inputs"] = inputs;
    j["outputs"] = outputs;
    j["exclusions"] = ex;
    j["notes"] = notes;
    j["executed"] = executed;
    return j;
}

StageReport StageReport::from_json(const json& j) {
    StageReport r;
    auto stage = stage_from_string(j.at("stage").get<std::string>());
    if (!stage) throw std::invalid_argument("unknown stage in report");
    r.stage = *stage;
    r.inputs = j.at("inputs").get<std::uint64_t>();
    r.outputs = j.at("outputs").get<std::uint64_t>();
    for (const auto& [name, count] : j.at("exclusions").items()) {
        auto reason = reason_from_string(name);
        if (!reason) throw std::invalid_argument("unknown reason '" + name + "'");
        r.exclusions[*reason] = count.get<std::uint64_t>();
    }
    r.notes = j.value("notes", std::map<std::string, std::uint64_t>{});
    r.executed = j.value("executed", false);
    return r;
}

bool RunReport::had_item_failures() const {
    for (const auto& s : stages) {
        for (const auto& [reason, count] : s.exclusions) {
            if (count > 0 && is_item_failure(reason)) return true;
        }
    }
    return false;
}

std::map<Reason, std::uint64_t> RunReport::exclusion_totals() const {
    std::map<Reason, std::uint64_t> totals;
    for (auto r : kAllReasons) totals[r] = 0;
    for (const auto& s : stages) {
        for (const auto& [reason, count] : s.exclusions) totals[reason] += count;
    }
    return totals;
}

json RunReport::to_json() const {
    json j;
    j["stages"] = json::array();
    for (const auto& s : stages) j["stages"].push_back(s.to_json());
    json ex = json::object();
    for (const auto& [reason, count] : exclusion_totals()) ex[std::string(pipeline::to_string(reason))] = count;
    j["exclusions"] = ex;
    j["final_records"] = final_records;
    j["item_failures"] = had_item_failures();
    return j;
}

std::string RunReport::table() const {
    std::string out = fmt::format("{:<10} {:>9} {:>9} {:>9}  {}\n", "stage", "in", "out", "excluded", "status");
    for (const auto& s : stages) {
        out += fmt::format("{:<10} {:>9} {:>9} {:>9}  {}\n", pipeline::to_string(s.stage), s.inputs, s.outputs,
                           s.excluded(), s.executed ? "ran" : "resumed");
    }
    out += "\nexclusions\n";
    for (const auto& [reason, count] : exclusion_totals()) {
        out += fmt::format("  {:<24} {:>9}\n", pipeline::to_string(reason), count);
    }
    bool header = false;
    for (const auto& s : stages) {
        for (const auto& [note, count] : s.notes) {
            if (count == 0) continue;
            if (!header) {
                out += "\nnotes\n";
                header = true;
            }
            out += fmt::format("  {:<24} {:>9}  ({})\n", note, count, pipeline::to_string(s.stage));
        }
    }
    out += fmt::format("\nfinal records: {}\n", final_records);
    return out;
}

// --- record serialization --------------------------------------------------

json track_to_json(const gpx::Track& track) {
    json segs = json::array();
    for (const auto& seg : track.segments) {
        json pts = json::array();
        for (const auto& p : seg.points) {
            pts.push_back(json::array({p.lat, p.lon, p.ele ? json(*p.ele) : json(nullptr)}));
        }
        segs.push_back(std::move(pts));
    }
    json j;
    j["name"] = track.name ? json(*track.name) : json(nullptr);
    j["segments"] = std::move(segs);
    return j;
}

gpx::Track track_from_json(const json& j) {
    gpx::Track t;
    if (j.contains("name") && !j["name"].is_null()) t.name = j["name"].get<std::string>();
    for (const auto& seg : j.at("segments")) {
        gpx::Segment s;
        for (const auto& p : seg) {
            gpx::TrackPoint tp;
            tp.lat = p.at(0).get<double>();
            tp.lon = p.at(1).get<double>();
            if (!p.at(2).is_null()) tp.ele = p.at(2).get<double>();
            s.points.push_back(tp);
        }
        t.segments.push_back(std::move(s));
    }
    return t;
}

json to_json(const TrackRecord& r) {
    json j;
    j["item"] = r.item;
    j["track"] = track_to_json(r.track);
    j["desc_raw"] = r.desc_raw ? json(*r.desc_raw) : json(nullptr);
    if (r.desc) {
        j["desc"] = {{"text", r.desc->text}, {"lang", r.desc->lang}, {"text_en", r.desc->text_en}};
    } else {
        j["desc"] = nullptr;
    }
    j["pii"] = {{"email", r.pii.email}, {"url", r.pii.url}, {"phone", r.pii.phone}};
    j["elev_source"] = r.elev_source ? json(std::string(elevation::to_string(*r.elev_source))) : json(nullptr);
    if (r.metrics) {
        const auto& m = *r.metrics;
        j["metrics"] = {{"length_2d", m.length_2d}, {"length_3d", m.length_3d}, {"elev_highest", m.elev_highest},
                        {"elev_lowest", m.elev_lowest}, {"uphill", m.uphill}, {"downhill", m.downhill},
                        {"is_circular", m.is_circular}};
    } else {
        j["metrics"] = nullptr;
    }
    j["country"] = r.country ? json(*r.country) : json(nullptr);
    return j;
}

TrackRecord track_record_from_json(const json& j) {
    TrackRecord r;
    r.item = j.at("item").get<FetchedItem>();
    r.track = track_from_json(j.at("track"));
    if (!j.at("desc_raw").is_null()) r.desc_raw = j["desc_raw"].get<std::string>();
    if (!j.at("desc").is_null()) {
        const auto& d = j["desc"];
        r.desc = Description{d.at("text").get<std::string>(), d.at("lang").get<std::string>(),
                             d.at("text_en").get<std::string>()};
    }
    const auto& pii = j.at("pii");
    r.pii = {pii.at("email").get<bool>(), pii.at("url").get<bool>(), pii.at("phone").get<bool>()};
    if (!j.at("elev_source").is_null()) {
        auto s = j["elev_source"].get<std::string>();
        r.elev_source = s == "GPS" ? elevation::ElevationSource::gps : elevation::ElevationSource::dem;
    }
    if (!j.at("metrics").is_null()) {
        const auto& m = j["metrics"];
        r.metrics = geo::TrackMetrics{m.at("length_2d").get<double>(),    m.at("length_3d").get<double>(),
                                      m.at("elev_highest").get<double>(), m.at("elev_lowest").get<double>(),
                                      m.at("uphill").get<double>(),       m.at("downhill").get<double>(),
                                      m.at("is_circular").get<bool>()};
    }
    if (!j.at("country").is_null()) r.country = j["country"].get<std::string>();
    return r;
}

namespace {

std::vector<TrackRecord> read_records_for(Stage stage, const fs::path& jsonl) {
    std::vector<TrackRecord> out;
    for (const auto& j : read_jsonl(stage, jsonl)) out.push_back(track_record_from_json(j));
    return out;
}

}  // namespace

std::vector<TrackRecord> read_track_records(const fs::path& jsonl) {
    return read_records_for(Stage::parse, jsonl);
}

void write_track_records(const fs::path& jsonl, const std::vector<TrackRecord>& records) {
    std::string out;
    for (const auto& r : records) {
        out += to_json(r).dump();
        out += '\n';
    }
    write_file_atomic(jsonl, out);
}

// --- backends --------------------------------------------------------------

ConfiguredBackends::ConfiguredBackends(const PipelineConfig& config, const fs::path& audit_dir)
    : config_(config), audit_dir_(audit_dir) {}

Backends ConfiguredBackends::resolve(Backends o) const {
    if (!o.transport) o.transport = &transport();
    if (!o.judge) o.judge = &judge();
    if (!o.translator) o.translator = &translator();
    if (!o.detector) o.detector = &detector();
    if (!o.tiles) o.tiles = &tiles();
    if (!o.boundaries) o.boundaries = &boundaries();
    return o;
}

fetch::ByteRangeTransport& ConfiguredBackends::transport() const {
    if (!transport_) {
        if (config_.fixture_dir) {
            transport_ = std::make_unique<fetch::FixtureTransport>(*config_.fixture_dir);
        } else {
            transport_ = std::make_unique<fetch::HttpRangeTransport>(config_.fetch.base_url);
        }
    }
    return *transport_;
}

desc::TextJudge& ConfiguredBackends::judge() const {
    if (!judge_) {
        const auto& s = config_.judge;
        if (s.backend == "http") {
            desc::ChatJudgeConfig c;
            c.apply_env();
            if (!s.url.empty()) c.url = s.url;
            if (!s.model.empty()) c.model = s.model;
            if (!s.api_key.empty()) c.api_key = s.api_key;
            c.max_retries = s.max_retries;
            c.max_in_flight = s.max_in_flight;
            if (!audit_dir_.empty()) {
                fs::create_directories(audit_dir_);
                c.audit_log = audit_dir_ / "judge_audit.jsonl";
            }
            judge_ = std::make_unique<desc::ChatCompletionsJudge>(std::move(c));
        } else if (!s.script.empty()) {
            judge_ = std::make_unique<desc::ScriptedJudge>(
                desc::ScriptedJudge::from_json(json::parse(as_string_view(read_file(s.script)))));
        } else {
            judge_ = std::make_unique<desc::ScriptedJudge>();
        }
    }
    return *judge_;
}

desc::Translator& ConfiguredBackends::translator() const {
    if (!translator_) {
        const auto& s = config_.translator;
        if (s.backend == "command") {
            translator_ = std::make_unique<desc::CommandTranslator>(s.command, s.max_in_flight);
        } else if (!s.script.empty()) {
            translator_ = std::make_unique<desc::ScriptedTranslator>(
                desc::ScriptedTranslator::from_json(json::parse(as_string_view(read_file(s.script)))));
        } else {
            translator_ = std::make_unique<desc::ScriptedTranslator>();
        }
    }
    return *translator_;
}

const desc::LanguageDetector& ConfiguredBackends::detector() const {
    if (!detector_) {
        auto path = config_.lang_profiles.empty() ? desc::LanguageDetector::default_profile_path()
                                                  : config_.lang_profiles;
        detector_ = std::make_unique<desc::LanguageDetector>(desc::LanguageDetector::from_file(path));
    }
    return *detector_;
}

elevation::TileStore& ConfiguredBackends::tiles() const {
    if (!tiles_) {
        if (config_.srtm_dir.empty()) {
            tiles_ = std::make_unique<elevation::MemoryTileStore>();
        } else {
            tiles_ = std::make_unique<elevation::DirectoryTileStore>(config_.srtm_dir);
        }
    }
    return *tiles_;
}

const geo::CountryBoundaries& ConfiguredBackends::boundaries() const {
    if (!boundaries_) {
        if (config_.boundaries.empty()) {
            boundaries_ = std::make_unique<geo::CountryBoundaries>();
        } else {
            boundaries_ = std::make_unique<geo::CountryBoundaries>(geo::load_boundaries(config_.boundaries));
        }
    }
    return *boundaries_;
}

// --- stages ----------------------------------------------------------------

StageReport run_index_stage(const PipelineConfig& config, const fs::path& out_file) {
    auto report = started(Stage::index);
    if (config.shards.empty()) throw StageError(Stage::index, "no index shards configured");
    if (out_file.has_parent_path()) ensure_dir(Stage::index, out_file.parent_path());

    std::vector<index::CandidateRecord> candidates;
    auto sink = [&](index::CandidateRecord&& r) { candidates.push_back(std::move(r)); };
    index::ScanCounts counts;
    for (const auto& pattern : config.shards) {
        if (pattern.starts_with("http://") || pattern.starts_with("https://")) {
            http::Response resp;
            try {
                http::Request req;
                req.url = pattern;
                resp = http::perform(req);
            } catch (const std::exception& e) {
                throw StageError(Stage::index, index::ShardError(pattern, e.what()).what());
            }
            if (resp.status != 200) {
                throw StageError(Stage::index,
                                 index::ShardError(pattern, "HTTP status " + std::to_string(resp.status)).what());
            }
            counts += index::scan_shard_bytes(pattern, resp.body, sink);
            continue;
        }
        std::vector<fs::path> shards;
        try {
            shards = index::expand_glob(pattern);
        } catch (const std::exception& e) {
            throw StageError(Stage::index, e.what());
        }
        for (const auto& shard : shards) {
            try {
                counts += index::scan_shard_file(shard, sink);
            } catch (const index::ShardError& e) {
                throw StageError(Stage::index, e.what());
            } catch (const std::exception& e) {
                throw StageError(Stage::index, index::ShardError(shard.string(), e.what()).what());
            }
        }
    }
    write_file_atomic(out_file, to_jsonl_string(candidates));
    // Blank and comment lines are not records and are not counted.
    report.inputs = counts.candidates + counts.malformed + counts.non_candidates;
    report.notes["lines-read"] = counts.lines_read;
    report.outputs = counts.candidates;
    report.exclusions[Reason::malformed_index_line] = counts.malformed;
    report.exclusions[Reason::not_candidate] = counts.non_candidates;
    write_manifest(Stage::index, out_file, config, {}, report, {out_file.filename().string()});
    return report;
}

StageReport run_fetch_stage(const PipelineConfig& config, const fs::path& candidates_file, const fs::path& out_dir,
                            fetch::ByteRangeTransport& transport) {
    auto report = started(Stage::fetch);
    std::vector<index::CandidateRecord> candidates;
    for (const auto& j : read_jsonl(Stage::fetch, candidates_file)) candidates.push_back(j.get<index::CandidateRecord>());
    ensure_dir(Stage::fetch, out_dir);

    fetch::Fetcher fetcher(config.fetch, transport);
    auto outcomes = fetcher.fetch_all(candidates);

    struct Slot {
        std::optional<FetchedItem> item;
        std::optional<json> failure;
        std::optional<Reason> reason;
    };
    std::vector<Slot> slots(outcomes.size());
    parallel_for(outcomes.size(), config.worker_count(), [&](std::size_t i) {
        auto& outcome = outcomes[i];
        auto& slot = slots[i];
        if (!outcome.ok()) {
            slot.reason = Reason::fetch_failed;
            slot.failure = json(*outcome.failure);
            return;
        }
        try {
            auto payload = warc::extract_payload(*outcome.slice);
            auto digest = to_hex(sha256(payload));
            auto path = out_dir / (digest + ".gpx");
            std::error_code ec;
            if (!fs::exists(path, ec)) write_payload(path, as_string_view(payload), i);
            slot.item = FetchedItem{outcome.slice->candidate, digest, payload.size()};
        } catch (const warc::ExtractError& e) {
            slot.reason = e.kind() == warc::ExtractErrorKind::skipped_record ? Reason::warc_skipped
                                                                              : Reason::warc_decode_error;
            json f = {{"candidate", outcome.slice->candidate},
                      {"reason", std::string(to_string(*slot.reason))},
                      {"detail", e.what()},
                      {"attempts", outcome.attempts}};
            slot.failure = std::move(f);
        }
    });

    std::string manifest, failures;
    for (auto& slot : slots) {
        if (slot.item) {
            manifest += json(*slot.item).dump() + "\n";
            ++report.outputs;
        } else {
            failures += slot.failure->dump() + "\n";
            ++report.exclusions[*slot.reason];
        }
    }
    report.inputs = candidates.size();
    write_file_atomic(out_dir / "manifest.jsonl", manifest);
    write_file_atomic(out_dir / "failures.jsonl", failures);
    write_manifest(Stage::fetch, out_dir, config, candidates_file, report, {"manifest.jsonl", "failures.jsonl"});
    return report;
}

StageReport run_parse_stage(const PipelineConfig& config, const fs::path& raw_dir, const fs::path& out_dir) {
    auto report = started(Stage::parse);
    auto manifest = raw_dir / "manifest.jsonl";
    std::vector<FetchedItem> items;
    for (const auto& j : read_jsonl(Stage::parse, manifest)) items.push_back(j.get<FetchedItem>());
    ensure_dir(Stage::parse, out_dir);
    report.inputs = items.size();

    auto deduped = dedup(std::move(items));
    report.exclusions[Reason::duplicate_url] = deduped.duplicate_url;
    report.exclusions[Reason::duplicate_content] = deduped.duplicate_content;

    struct Slot {
        std::optional<TrackRecord> record;
        std::optional<Reason> reason;
        gpx::ParseCounters counters;
    };
    std::vector<Slot> slots(deduped.survivors.size());
    parallel_for(slots.size(), config.worker_count(), [&](std::size_t i) {
        const auto& item = deduped.survivors[i];
        auto& slot = slots[i];
        auto path = raw_dir / (item.sha256 + ".gpx");
        std::error_code ec;
        if (!fs::exists(path, ec)) throw StageError(Stage::parse, "missing payload " + path.string());
        gpx::GpxDocument doc;
        try {
            doc = gpx::parse_gpx(read_file(path), item.candidate.url);
        } catch (const gpx::ParseError&) {
            slot.reason = Reason::parse_error;
            return;
        }
        slot.counters = doc.counters;
        std::size_t with_points = 0;
        for (const auto& t : doc.tracks) with_points += t.point_count() > 0;
        if (with_points == 0) {
            slot.reason = Reason::no_track;
            return;
        }
        auto track = gpx::extract_single_track(doc);
        if (!track) {
            slot.reason = Reason::multi_track;
            return;
        }
        auto verdict = passes_track_filters(track->point_count(), geo::length_2d(*track), config.filter);
        if (!verdict.pass) {
            slot.reason = verdict.reason;
            return;
        }
        TrackRecord r;
        r.item = item;
        r.desc_raw = gpx::description_of(*track, doc);
        r.track = gpx::strip_timestamps(std::move(*track));
        r.track.desc.reset();
        slot.record = std::move(r);
    });

    std::vector<TrackRecord> records;
    for (auto& slot : slots) {
        report.notes["points-dropped"] += slot.counters.points_dropped;
        report.notes["tracks-dropped-invalid"] += slot.counters.tracks_dropped_invalid;
        report.notes["routes-converted"] += slot.counters.routes_converted;
        if (slot.record) {
            records.push_back(std::move(*slot.record));
        } else {
            ++report.exclusions[*slot.reason];
        }
    }
    report.outputs = records.size();
    write_track_records(out_dir / "tracks.jsonl", records);
    write_manifest(Stage::parse, out_dir, config, manifest, report, {"tracks.jsonl"});
    return report;
}

StageReport run_enrich_stage(const PipelineConfig& config, const fs::path& parsed_dir, const fs::path& out_dir,
                             desc::TextJudge& judge, desc::Translator& translator,
                             const desc::LanguageDetector& detector) {
    auto report = started(Stage::enrich);
    auto input = parsed_dir / "tracks.jsonl";
    auto records = read_records_for(Stage::enrich, input);
    ensure_dir(Stage::enrich, out_dir);
    report.inputs = records.size();

    const auto& f = config.filter;
    std::vector<std::optional<Reason>> reasons(records.size());
    parallel_for(records.size(), config.worker_count(), [&](std::size_t i) {
        auto& r = records[i];
        auto& reason = reasons[i];
        auto masked = desc::mask_pii(desc::clean_text(r.desc_raw.value_or("")));
        r.pii = masked.flags;
        auto n = utf8_length(masked.text);
        if (n < f.desc_min_chars) {
            reason = Reason::desc_too_short;
            return;
        }
        if (n >= f.desc_max_chars_exclusive) {
            reason = Reason::desc_too_long;
            return;
        }
        try {
            if (!desc::judge_quality(masked.text, judge).value) {
                reason = Reason::low_quality;
                return;
            }
            if (desc::judge_pii(masked.text, judge).value) {
                reason = Reason::pii;
                return;
            }
        } catch (const desc::JudgeUnavailable&) {
            reason = Reason::judge_unavailable;
            return;
        }
        auto lang = detector.detect(masked.text);
        if (lang == desc::kUnknownLanguage) {
            reason = Reason::unknown_lang;
            return;
        }
        std::string english;
        try {
            english = desc::translate_to_english(masked.text, lang, translator);
        } catch (const desc::TranslationError&) {
            reason = Reason::translation_failed;
            return;
        }
        r.desc = Description{std::move(masked.text), std::move(lang), std::move(english)};
    });

    std::vector<TrackRecord> kept;
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (records[i].pii.email) ++report.notes["masked-email"];
        if (records[i].pii.url) ++report.notes["masked-url"];
        if (records[i].pii.phone) ++report.notes["masked-phone"];
        if (reasons[i]) {
            ++report.exclusions[*reasons[i]];
        } else {
            kept.push_back(std::move(records[i]));
        }
    }
    report.outputs = kept.size();
    write_track_records(out_dir / "tracks.jsonl", kept);
    write_manifest(Stage::enrich, out_dir, config, input, report, {"tracks.jsonl"});
    return report;
}

StageReport run_metrics_stage(const PipelineConfig& config, const fs::path& enriched_dir, const fs::path& out_dir,
                              elevation::TileStore& tiles, const geo::CountryBoundaries& boundaries) {
    auto report = started(Stage::metrics);
    auto input = enriched_dir / "tracks.jsonl";
    auto records = read_records_for(Stage::metrics, input);
    ensure_dir(Stage::metrics, out_dir);
    report.inputs = records.size();

    struct Slot {
        bool keep = false;
        bool tile_error = false;
        geo::CountryMatch country;
    };
    std::vector<Slot> slots(records.size());
    parallel_for(records.size(), config.worker_count(), [&](std::size_t i) {
        auto& r = records[i];
        auto& slot = slots[i];
        std::optional<elevation::BackfillResult> filled;
        try {
            filled = elevation::backfill_elevation(r.track, tiles);
        } catch (const std::exception&) {
            slot.tile_error = true;
        }
        if (!filled) return;
        r.track = std::move(filled->track);
        r.elev_source = filled->source;
        r.metrics = geo::compute_metrics(r.track, config.filter.circular_radius_m, config.filter.elevation_deadband_m);
        slot.country = geo::assign_country(r.track, boundaries);
        r.country = slot.country.name;
        slot.keep = true;
    });

    std::vector<TrackRecord> kept;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& slot = slots[i];
        if (slot.tile_error) ++report.notes["tile-read-error"];
        if (!slot.keep) {
            ++report.exclusions[Reason::elevation_unavailable];
            continue;
        }
        if (!slot.country.matched) ++report.notes["country-unknown"];
        if (slot.country.ambiguous) ++report.notes["country-ambiguous"];
        if (records[i].elev_source == elevation::ElevationSource::dem) ++report.notes["elevation-from-dem"];
        kept.push_back(std::move(records[i]));
    }
    report.outputs = kept.size();
    write_track_records(out_dir / "tracks.jsonl", kept);
    write_manifest(Stage::metrics, out_dir, config, input, report, {"tracks.jsonl"});
    return report;
}

StageReport run_export_stage(const PipelineConfig& config, const fs::path& metrics_dir, const fs::path& out_dir) {
    auto report = started(Stage::export_records);
    auto input = metrics_dir / "tracks.jsonl";
    auto records = read_records_for(Stage::export_records, input);
    ensure_dir(Stage::export_records, out_dir);
    report.inputs = records.size();

    if (config.filter.rare_lang_cutoff > 0) {
        auto before = records.size();
        records = desc::filter_rare_languages(
            std::move(records), [](const TrackRecord& r) { return r.desc ? r.desc->lang : std::string(desc::kUnknownLanguage); },
            config.filter.rare_lang_cutoff);
        report.exclusions[Reason::rare_lang] = before - records.size();
    }

    std::vector<OutputRecord> out;
    out.reserve(records.size());
    for (const auto& r : records) {
        if (!r.desc) throw AssemblyError("desc");
        if (!r.metrics) throw AssemblyError("metrics");
        if (!r.elev_source) throw AssemblyError("elev_source");
        if (!r.country) throw AssemblyError("country");
        out.push_back(assemble_record(r.item.candidate, r.track, *r.metrics, *r.desc, *r.country, *r.elev_source));
    }
    export_records(out, out_dir);
    report.outputs = out.size();
    write_manifest(Stage::export_records, out_dir, config, input, report,
                   {"dataset.geojson", "dataset.jsonl", "dataset.csv"});
    return report;
}

// --- driver ----------------------------------------------------------------

RunReport run_pipeline(const PipelineConfig& config, Backends backends, Stage from, Stage to, bool force) {
    config.validate();
    WorkLayout layout(config.work_dir);
    ensure_dir(Stage::index, config.work_dir);
    ConfiguredBackends owned(config, layout.enriched);

    struct Step {
        Stage stage;
        fs::path input;  // file whose digest keys the stage
        fs::path output;
    };
    const std::array<Step, kAllStages.size()> steps = {{
        {Stage::index, {}, layout.candidates},
        {Stage::fetch, layout.candidates, layout.raw},
        {Stage::parse, layout.raw / "manifest.jsonl", layout.parsed},
        {Stage::enrich, layout.parsed / "tracks.jsonl", layout.enriched},
        {Stage::metrics, layout.enriched / "tracks.jsonl", layout.metrics},
        {Stage::export_records, layout.metrics / "tracks.jsonl", layout.exported},
    }};

    RunReport run;
    for (const auto& step : steps) {
        if (step.stage < from || step.stage > to) continue;
        if (!force) {
            if (auto done = load_complete_manifest(step.stage, step.output, config, step.input)) {
                run.stages.push_back(*done);
                continue;
            }
        }
        StageReport report;
        switch (step.stage) {
            case Stage::index:
                report = run_index_stage(config, step.output);
                break;
            case Stage::fetch: {
                auto* t = backends.transport ? backends.transport : &owned.transport();
                report = run_fetch_stage(config, step.input, step.output, *t);
                break;
            }
            case Stage::parse:
                report = run_parse_stage(config, layout.raw, step.output);
                break;
            case Stage::enrich: {
                auto* j = backends.judge ? backends.judge : &owned.judge();
                auto* tr = backends.translator ? backends.translator : &owned.translator();
                auto* d = backends.detector ? backends.detector : &owned.detector();
                report = run_enrich_stage(config, layout.parsed, step.output, *j, *tr, *d);
                break;
            }
            case Stage::metrics: {
                auto* tiles = backends.tiles ? backends.tiles : &owned.tiles();
                auto* b = backends.boundaries ? backends.boundaries : &owned.boundaries();
                report = run_metrics_stage(config, layout.enriched, step.output, *tiles, *b);
                break;
            }
            case Stage::export_records:
                report = run_export_stage(config, layout.metrics, step.output);
                break;
        }
        run.stages.push_back(std::move(report));
    }
    if (!run.stages.empty() && run.stages.back().stage == Stage::export_records) {
        run.final_records = run.stages.back().outputs;
    }
    write_file_atomic(layout.stats, run.to_json().dump(2) + "\n");
    return run;
}

}  // namespace gpxharvest::pipeline
