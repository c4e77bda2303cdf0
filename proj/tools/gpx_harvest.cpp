// gpx-harvest: command-line driver for the harvest stages.

#include "gpxharvest/stages.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <cstdio>
#include <iostream>

namespace fs = std::filesystem;
using namespace gpxharvest;
using namespace gpxharvest::pipeline;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFatal = 1;
constexpr int kExitPartial = 2;

struct Options {
    std::string config;
    std::vector<std::string> shards;
    std::string in;
    std::string out;
    std::string candidates;
    std::string fixture_dir;
    std::string judge;
    std::string judge_model;
    std::string translator;
    std::string srtm_dir;
    std::string boundaries;
    std::string work_dir;
    std::string from = "index";
    std::string to = "export";
    std::size_t workers = 0;
    bool force = false;
    bool quiet = false;
};

void apply_judge_flag(PipelineConfig& c, const std::string& value, const std::string& model) {
    if (value.empty()) return;
    if (value == "stub") {
        c.judge.backend = "stub";
        c.judge.script.clear();
    } else if (value.starts_with("stub:")) {
        c.judge.backend = "stub";
        c.judge.script = value.substr(5);
    } else {
        c.judge.backend = "http";
        c.judge.url = value;
    }
    if (!model.empty()) c.judge.model = model;
}

void apply_translator_flag(PipelineConfig& c, const std::string& value) {
    if (value.empty()) return;
    if (value == "stub") {
        c.translator.backend = "stub";
        c.translator.script.clear();
    } else if (value.starts_with("stub:")) {
        c.translator.backend = "stub";
        c.translator.script = value.substr(5);
    } else {
        c.translator.backend = "command";
        c.translator.command = value;
    }
}

PipelineConfig build_config(const Options& o) {
    PipelineConfig c = o.config.empty() ? PipelineConfig{} : PipelineConfig::load(o.config);
    if (!o.shards.empty()) c.shards = o.shards;
    if (!o.fixture_dir.empty()) c.fixture_dir = o.fixture_dir;
    apply_judge_flag(c, o.judge, o.judge_model);
    apply_translator_flag(c, o.translator);
    if (!o.srtm_dir.empty()) c.srtm_dir = o.srtm_dir;
    if (!o.boundaries.empty()) c.boundaries = o.boundaries;
    if (!o.work_dir.empty()) c.work_dir = o.work_dir;
    if (o.workers) c.workers = o.workers;
    c.validate();
    return c;
}

int finish(const RunReport& run, bool quiet) {
    if (!quiet) std::cout << run.table();
    return run.had_item_failures() ? kExitPartial : kExitOk;
}

int finish(const StageReport& report, bool quiet) {
    RunReport run;
    run.stages.push_back(report);
    if (report.stage == Stage::export_records) run.final_records = report.outputs;
    return finish(run, quiet);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Harvest GPS tracks with descriptions from Common Crawl GPX records"};
    app.require_subcommand(1);
    app.fallthrough();
    Options o;
    app.add_option("--config", o.config, "JSON pipeline configuration");
    app.add_flag("-q,--quiet", o.quiet, "Do not print the stage report");
    app.add_option("--workers", o.workers, "Worker threads (default: one per core)");

    auto* index_cmd = app.add_subcommand("index", "Scan CDX index shards for GPX candidates");
    index_cmd->add_option("--shards", o.shards, "Shard glob, file or URL")->expected(1, -1);
    index_cmd->add_option("--out", o.out, "Candidate list (JSONL)")->required();

    auto* fetch_cmd = app.add_subcommand("fetch", "Download candidate WARC records");
    fetch_cmd->add_option("--candidates", o.candidates, "Candidate list from the index stage")->required();
    fetch_cmd->add_option("--out", o.out, "Output directory")->required();
    fetch_cmd->add_option("--fixture-dir", o.fixture_dir, "Serve WARC files from a local directory");

    auto* parse_cmd = app.add_subcommand("parse", "Deduplicate, parse GPX and apply track filters");
    parse_cmd->add_option("--in", o.in, "Fetch stage directory")->required();
    parse_cmd->add_option("--out", o.out, "Output directory")->required();

    auto* enrich_cmd = app.add_subcommand("enrich", "Clean, judge, detect language and translate descriptions");
    enrich_cmd->add_option("--in", o.in, "Parse stage directory")->required();
    enrich_cmd->add_option("--out", o.out, "Output directory")->required();
    enrich_cmd->add_option("--judge", o.judge, "Judge endpoint URL, 'stub' or 'stub:<replies.json>'");
    enrich_cmd->add_option("--judge-model", o.judge_model, "Model name sent to the judge endpoint");
    enrich_cmd->add_option("--translator", o.translator,
                           "Translation command ({src} = source language), 'stub' or 'stub:<table.json>'");

    auto* metrics_cmd = app.add_subcommand("metrics", "Backfill elevation, compute metrics, assign countries");
    metrics_cmd->add_option("--in", o.in, "Enrich stage directory")->required();
    metrics_cmd->add_option("--out", o.out, "Output directory")->required();
    metrics_cmd->add_option("--srtm-dir", o.srtm_dir, "Directory of SRTM .hgt tiles");
    metrics_cmd->add_option("--boundaries", o.boundaries, "Country boundaries (GeoJSON)");

    auto* export_cmd = app.add_subcommand("export", "Write GeoJSON, JSONL and CSV");
    export_cmd->add_option("--in", o.in, "Metrics stage directory")->required();
    export_cmd->add_option("--out", o.out, "Output directory")->required();

    auto* run_cmd = app.add_subcommand("run", "Run every stage over a work directory, resuming finished stages");
    run_cmd->add_option("--work-dir", o.work_dir, "Work directory (overrides the config)");
    run_cmd->add_option("--shards", o.shards, "Shard glob, file or URL")->expected(1, -1);
    run_cmd->add_option("--fixture-dir", o.fixture_dir, "Serve WARC files from a local directory");
    run_cmd->add_option("--judge", o.judge, "Judge endpoint URL, 'stub' or 'stub:<replies.json>'");
    run_cmd->add_option("--judge-model", o.judge_model, "Model name sent to the judge endpoint");
    run_cmd->add_option("--translator", o.translator, "Translation command, 'stub' or 'stub:<table.json>'");
    run_cmd->add_option("--srtm-dir", o.srtm_dir, "Directory of SRTM .hgt tiles");
    run_cmd->add_option("--boundaries", o.boundaries, "Country boundaries (GeoJSON)");
    run_cmd->add_option("--from", o.from, "First stage to run");
    run_cmd->add_option("--to", o.to, "Last stage to run");
    run_cmd->add_flag("--force", o.force, "Re-run stages even when their outputs are current");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitFatal;
    }

    try {
        auto config = build_config(o);
        if (*index_cmd) return finish(run_index_stage(config, o.out), o.quiet);
        if (*fetch_cmd) {
            ConfiguredBackends b(config);
            return finish(run_fetch_stage(config, o.candidates, o.out, b.transport()), o.quiet);
        }
        if (*parse_cmd) return finish(run_parse_stage(config, o.in, o.out), o.quiet);
        if (*enrich_cmd) {
            ConfiguredBackends b(config, o.out);
            return finish(run_enrich_stage(config, o.in, o.out, b.judge(), b.translator(), b.detector()), o.quiet);
        }
        if (*metrics_cmd) {
            ConfiguredBackends b(config);
            return finish(run_metrics_stage(config, o.in, o.out, b.tiles(), b.boundaries()), o.quiet);
        }
        if (*export_cmd) return finish(run_export_stage(config, o.in, o.out), o.quiet);
        if (*run_cmd) {
            auto from = stage_from_string(o.from);
            auto to = stage_from_string(o.to);
            if (!from || !to || *from > *to) {
                throw std::invalid_argument("--from/--to must name stages in pipeline order");
            }
            return finish(run_pipeline(config, {}, *from, *to, o.force), o.quiet);
        }
    } catch (const std::exception& e) {
        std::cerr << "gpx-harvest: " << e.what() << "\n";
        return kExitFatal;
    }
    return kExitFatal;
}
