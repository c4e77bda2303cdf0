#include "gpxharvest/index_scan.hpp"

#include "gpxharvest/util.hpp"

#include <glob.h>
#include <zlib.h>

#include <algorithm>
#include <charconv>
#include <memory>
#include <sstream>

namespace gpxharvest::index {

void to_json(nlohmann::json& j, const CandidateRecord& r) {
    j = nlohmann::json{
        {"url", r.url},
        {"mime_detected", r.mime_detected},
        {"warc_file", r.warc_file},
        {"warc_offset", r.warc_offset},
        {"warc_len", r.warc_len},
        {"crawl_id", r.crawl_id},
    };
}

void from_json(const nlohmann::json& j, CandidateRecord& r) {
    j.at("url").get_to(r.url);
    r.mime_detected = j.value("mime_detected", std::string{});
    j.at("warc_file").get_to(r.warc_file);
    j.at("warc_offset").get_to(r.warc_offset);
    j.at("warc_len").get_to(r.warc_len);
    r.crawl_id = j.value("crawl_id", std::string{});
}

bool is_absolute_url(std::string_view url) {
    auto sep = url.find("://");
    if (sep == std::string_view::npos || sep == 0) return false;
    for (std::size_t i = 0; i < sep; ++i) {
        char c = url[i];
        bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                  (i > 0 && ((c >= '0' && c <= '9') || c == '+' || c == '-' || c == '.'));
        if (!ok) return false;
    }
    auto rest = url.substr(sep + 3);
    auto host_end = rest.find_first_of("/?#");
    auto host = rest.substr(0, host_end);
    if (host.empty()) return false;
    return host.find_first_of(" \t") == std::string_view::npos;
}

std::string crawl_id_from_path(std::string_view warc_file) {
    constexpr std::string_view kPrefix = "CC-MAIN-";
    auto pos = warc_file.find(kPrefix);
    if (pos == std::string_view::npos) return {};
    auto end = warc_file.find('/', pos);
    return std::string(warc_file.substr(pos, end == std::string_view::npos ? end : end - pos));
}

namespace {

// Offsets and lengths arrive as JSON strings in CC indexes; plain numbers
// are accepted too.
std::optional<std::uint64_t> parse_uint(const nlohmann::json& v) {
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer()) {
        auto i = v.get<std::int64_t>();
        if (i < 0) return std::nullopt;
        return static_cast<std::uint64_t>(i);
    }
    if (!v.is_string()) return std::nullopt;
    const auto& s = v.get_ref<const std::string&>();
    std::uint64_t out = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out, 10);
    if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
    return out;
}

}  // namespace

std::optional<CandidateRecord> parse_index_line(std::string_view line, std::uint64_t& malformed) {
    auto body = trim(line);
    if (body.empty() || body.front() == '#') return std::nullopt;

    auto brace = body.find('{');
    auto first_space = body.find(' ');
    if (brace == std::string_view::npos || first_space == std::string_view::npos || first_space > brace) {
        ++malformed;
        return std::nullopt;
    }
    auto payload = nlohmann::json::parse(body.substr(brace), nullptr, /*allow_exceptions=*/false);
    if (payload.is_discarded() || !payload.is_object()) {
        ++malformed;
        return std::nullopt;
    }

    auto field = [&](const char* key) -> const nlohmann::json* {
        auto it = payload.find(key);
        return it == payload.end() ? nullptr : &*it;
    };
    const auto* url = field("url");
    const auto* filename = field("filename");
    const auto* offset = field("offset");
    const auto* length = field("length");
    if (!url || !filename || !offset || !length || !url->is_string() || !filename->is_string()) {
        ++malformed;
        return std::nullopt;
    }
    auto off = parse_uint(*offset);
    auto len = parse_uint(*length);
    if (!off || !len || *len == 0 || !is_absolute_url(url->get_ref<const std::string&>())) {
        ++malformed;
        return std::nullopt;
    }

    CandidateRecord rec;
    rec.url = url->get<std::string>();
    rec.warc_file = filename->get<std::string>();
    rec.warc_offset = *off;
    rec.warc_len = *len;
    if (const auto* mime = field("mime-detected"); mime && mime->is_string()) {
        rec.mime_detected = to_lower_ascii(mime->get_ref<const std::string&>());
    } else if (const auto* declared = field("mime"); declared && declared->is_string()) {
        rec.mime_detected = to_lower_ascii(declared->get_ref<const std::string&>());
    }
    rec.crawl_id = crawl_id_from_path(rec.warc_file);
    return rec;
}

bool is_gpx_candidate(const CandidateRecord& record) {
    if (icontains_ascii(record.mime_detected, "gpx")) return true;
    std::string_view path = record.url;
    path = path.substr(0, path.find_first_of("?#"));
    return iends_with_ascii(path, ".gpx");
}

ScanCounts scan_index(std::istream& source, const CandidateSink& sink) {
    ScanCounts counts;
    std::string line;
    while (std::getline(source, line)) {
        ++counts.lines_read;
        auto rec = parse_index_line(line, counts.malformed);
        if (!rec) continue;
        if (is_gpx_candidate(*rec)) {
            ++counts.candidates;
            sink(std::move(*rec));
        } else {
            ++counts.non_candidates;
        }
    }
    if (source.bad()) {
        throw std::runtime_error("read error after line " + std::to_string(counts.lines_read));
    }
    return counts;
}

ScanCounts scan_shard_file(const std::filesystem::path& shard, const CandidateSink& sink) {
    // gzopen reads plain files transparently.
    std::unique_ptr<gzFile_s, decltype(&gzclose)> gz(gzopen(shard.c_str(), "rb"), &gzclose);
    if (!gz) {
        throw ShardError(shard.string(), "cannot open");
    }
    std::string text;
    char buf[1 << 16];
    int n = 0;
    while ((n = gzread(gz.get(), buf, sizeof(buf))) > 0) {
        text.append(buf, static_cast<std::size_t>(n));
    }
    // A truncated member ends the loop with n == 0 and Z_BUF_ERROR set.
    int errnum = Z_OK;
    const char* msg = gzerror(gz.get(), &errnum);
    if (n < 0 || errnum != Z_OK) {
        throw ShardError(shard.string(), std::string("read failed: ") + (msg && *msg ? msg : "truncated gzip"));
    }
    std::istringstream in(std::move(text));
    try {
        return scan_index(in, sink);
    } catch (const std::runtime_error& e) {
        throw ShardError(shard.string(), e.what());
    }
}

ScanCounts scan_shard_bytes(std::string_view shard_name, std::string_view bytes, const CandidateSink& sink) {
    std::string text;
    try {
        auto span = std::span(reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size());
        if (is_gzip(span)) {
            auto raw = gunzip_all(span);
            text.assign(raw.begin(), raw.end());
        } else {
            text.assign(bytes);
        }
    } catch (const GzipError& e) {
        throw ShardError(std::string(shard_name), e.what());
    }
    std::istringstream in(std::move(text));
    return scan_index(in, sink);
}

std::vector<std::filesystem::path> expand_glob(const std::string& pattern) {
    glob_t g{};
    int rc = ::glob(pattern.c_str(), 0, nullptr, &g);
    std::unique_ptr<glob_t, decltype(&globfree)> guard(&g, &globfree);
    if (rc == GLOB_NOMATCH) {
        throw ShardError(pattern, "no files match");
    }
    if (rc != 0) {
        throw ShardError(pattern, "glob failed");
    }
    std::vector<std::filesystem::path> out;
    for (std::size_t i = 0; i < g.gl_pathc; ++i) out.emplace_back(g.gl_pathv[i]);
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace gpxharvest::index
