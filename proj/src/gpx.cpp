#include "gpxharvest/gpx.hpp"

#include <expat.h>

#include <charconv>
#include <cmath>
#include <cstring>
#include <memory>

namespace gpxharvest::gpx {

std::size_t Track::point_count() const {
    std::size_t n = 0;
    for (const auto& s : segments) n += s.points.size();
    return n;
}

namespace {

constexpr char kNsSep = ' ';

constexpr int kCp1252High[32] = {
    0x20ac, -1, 0x201a, 0x192, 0x201e, 0x2026, 0x2020, 0x2021, 0x2c6, 0x2030, 0x160,
    0x2039, 0x152, -1, 0x17d, -1, -1, 0x2018, 0x2019, 0x201c, 0x201d, 0x2022,
    0x2013, 0x2014, 0x2dc, 0x2122, 0x161, 0x203a, 0x153, -1, 0x17e, 0x178,
};

// Single-byte encodings expat does not know natively.
int XMLCALL unknown_encoding(void*, const XML_Char* name, XML_Encoding* info) {
    std::string enc = to_lower_ascii(name);
    bool cp1252 = enc == "windows-1252" || enc == "cp1252";
    bool latin9 = enc == "iso-8859-15" || enc == "latin-9" || enc == "latin9";
    if (!cp1252 && !latin9) return XML_STATUS_ERROR;
    for (int i = 0; i < 256; ++i) info->map[i] = i;
    if (cp1252) {
        for (int i = 0; i < 32; ++i) info->map[0x80 + i] = kCp1252High[i];
    } else {
        info->map[0xA4] = 0x20AC;
        info->map[0xA6] = 0x160;
        info->map[0xA8] = 0x161;
        info->map[0xB4] = 0x17D;
        info->map[0xB8] = 0x17E;
        info->map[0xBC] = 0x152;
        info->map[0xBD] = 0x153;
        info->map[0xBE] = 0x178;
    }
    info->data = nullptr;
    info->convert = nullptr;
    info->release = nullptr;
    return XML_STATUS_OK;
}

bool is_gpx_namespace(std::string_view ns) {
    return ns.empty() || ns.rfind("http://www.topografix.com/GPX/", 0) == 0 ||
           ns.rfind("https://www.topografix.com/GPX/", 0) == 0;
}

std::optional<double> parse_double(std::string_view text) {
    text = trim(text);
    if (text.empty()) return std::nullopt;
    if (text.front() == '+') text.remove_prefix(1);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

struct OpenTrack {
    Track track;
    std::uint64_t invalid = 0;
    std::uint64_t seen = 0;
};

enum class Capture { none, name, desc, meta_desc, ele, time };

class GpxHandler {
public:
    explicit GpxHandler(GpxDocument& doc) : doc_(doc) {}

    void start(const XML_Char* qname, const XML_Char** attrs) {
        std::string_view full(qname);
        auto sep = full.rfind(kNsSep);
        std::string_view ns = sep == std::string_view::npos ? std::string_view{} : full.substr(0, sep);
        std::string_view local = sep == std::string_view::npos ? full : full.substr(sep + 1);

        if (!seen_root_) {
            seen_root_ = true;
            if (local != "gpx" || !is_gpx_namespace(ns)) {
                throw ParseError("root element is not <gpx>");
            }
            path_.emplace_back("gpx");
            return;
        }
        if (capture_ != Capture::none) {
            // Markup inside a text field (stray HTML in <desc>): keep its text.
            ++capture_nesting_;
            return;
        }
        if (skip_depth_ > 0 || !is_gpx_namespace(ns)) {
            ++skip_depth_;
            return;
        }
        const std::string parent = path_.empty() ? std::string() : path_.back();
        path_.emplace_back(local);

        if (local == "trk" && parent == "gpx") {
            open_ = OpenTrack{};
            in_route_ = false;
        } else if (local == "rte" && parent == "gpx") {
            open_ = OpenTrack{};
            open_->track.segments.emplace_back();
            in_route_ = true;
        } else if (local == "trkseg" && parent == "trk" && open_) {
            open_->track.segments.emplace_back();
        } else if ((local == "trkpt" && parent == "trkseg") || (local == "rtept" && parent == "rte")) {
            if (!open_ || open_->track.segments.empty()) return;
            ++open_->seen;
            point_.reset();
            std::optional<double> lat, lon;
            for (int i = 0; attrs[i]; i += 2) {
                std::string_view key(attrs[i]);
                if (key == "lat") lat = parse_double(attrs[i + 1]);
                if (key == "lon") lon = parse_double(attrs[i + 1]);
            }
            if (!lat || !lon || *lat < -90.0 || *lat > 90.0 || *lon < -180.0 || *lon > 180.0) {
                ++open_->invalid;
                ++doc_.counters.points_dropped;
                return;
            }
            point_ = TrackPoint{*lat, *lon, std::nullopt, std::nullopt};
        } else if (local == "ele" && point_ && (parent == "trkpt" || parent == "rtept")) {
            begin_capture(Capture::ele);
        } else if (local == "time" && point_ && (parent == "trkpt" || parent == "rtept")) {
            begin_capture(Capture::time);
        } else if (local == "name" && open_ && (parent == "trk" || parent == "rte")) {
            begin_capture(Capture::name);
        } else if (local == "desc" && open_ && (parent == "trk" || parent == "rte")) {
            begin_capture(Capture::desc);
        } else if (local == "desc" && (parent == "metadata" || parent == "gpx")) {
            begin_capture(Capture::meta_desc);
        }
    }

    void end(const XML_Char*) {
        if (capture_ != Capture::none) {
            if (capture_nesting_ > 0) {
                --capture_nesting_;
                return;
            }
            finish_capture();
            path_.pop_back();
            return;
        }
        if (skip_depth_ > 0) {
            --skip_depth_;
            return;
        }
        if (path_.empty()) return;
        std::string local = std::move(path_.back());
        path_.pop_back();
        const std::string parent = path_.empty() ? std::string() : path_.back();

        if ((local == "trkpt" && parent == "trkseg") || (local == "rtept" && parent == "rte")) {
            if (point_ && open_ && !open_->track.segments.empty()) {
                open_->track.segments.back().points.push_back(*point_);
            }
            point_.reset();
        } else if (local == "trkseg" && open_ && !open_->track.segments.empty() &&
                   open_->track.segments.back().points.empty()) {
            open_->track.segments.pop_back();
            ++doc_.counters.empty_segments_dropped;
        } else if ((local == "trk" || local == "rte") && parent == "gpx" && open_) {
            close_track(local == "rte");
        }
    }

    void text(const XML_Char* s, int len) {
        if (capture_ != Capture::none) buffer_.append(s, static_cast<std::size_t>(len));
    }

    void finish() {
        bool any_track_points = false;
        for (const auto& t : doc_.tracks) any_track_points |= t.point_count() > 0;
        if (!any_track_points && !routes_.empty()) {
            doc_.tracks.clear();
            for (auto& r : routes_) {
                if (r.point_count() == 0) continue;
                doc_.tracks.push_back(std::move(r));
                ++doc_.counters.routes_converted;
            }
        }
    }

private:
    void begin_capture(Capture c) {
        capture_ = c;
        capture_nesting_ = 0;
        buffer_.clear();
    }

    void finish_capture() {
        switch (capture_) {
            case Capture::ele:
                if (point_) point_->ele = parse_double(buffer_);
                break;
            case Capture::time:
                if (point_) point_->time = parse_timestamp(buffer_);
                break;
            case Capture::name:
                if (open_) open_->track.name = buffer_;
                break;
            case Capture::desc:
                if (open_) open_->track.desc = buffer_;
                break;
            case Capture::meta_desc:
                if (!doc_.metadata_desc) doc_.metadata_desc = buffer_;
                break;
            case Capture::none:
                break;
        }
        capture_ = Capture::none;
        buffer_.clear();
    }

    void close_track(bool route) {
        auto& t = *open_;
        std::erase_if(t.track.segments, [](const Segment& s) { return s.points.empty(); });
        if (t.seen > 0 && static_cast<double>(t.invalid) > kMaxInvalidPointFraction * static_cast<double>(t.seen)) {
            ++doc_.counters.tracks_dropped_invalid;
        } else if (route) {
            routes_.push_back(std::move(t.track));
        } else {
            doc_.tracks.push_back(std::move(t.track));
        }
        open_.reset();
    }

    GpxDocument& doc_;
    bool seen_root_ = false;
    std::vector<std::string> path_;
    int skip_depth_ = 0;
    std::optional<OpenTrack> open_;
    bool in_route_ = false;
    std::optional<TrackPoint> point_;
    std::vector<Track> routes_;
    Capture capture_ = Capture::none;
    int capture_nesting_ = 0;
    std::string buffer_;
};

struct ExpatContext {
    GpxHandler* handler;
    std::exception_ptr error;
    XML_Parser parser;
};

void XMLCALL on_start(void* ud, const XML_Char* name, const XML_Char** attrs) {
    auto* ctx = static_cast<ExpatContext*>(ud);
    try {
        ctx->handler->start(name, attrs);
    } catch (...) {
        ctx->error = std::current_exception();
        XML_StopParser(ctx->parser, XML_FALSE);
    }
}

void XMLCALL on_end(void* ud, const XML_Char* name) {
    static_cast<ExpatContext*>(ud)->handler->end(name);
}

void XMLCALL on_text(void* ud, const XML_Char* s, int len) {
    static_cast<ExpatContext*>(ud)->handler->text(s, len);
}

}  // namespace

std::optional<Timestamp> parse_timestamp(std::string_view text) {
    text = trim(text);
    auto num = [&](std::size_t pos, std::size_t len) -> std::optional<int> {
        if (pos + len > text.size()) return std::nullopt;
        int v = 0;
        auto [ptr, ec] = std::from_chars(text.data() + pos, text.data() + pos + len, v);
        if (ec != std::errc{} || ptr != text.data() + pos + len) return std::nullopt;
        return v;
    };
    if (text.size() < 19 || text[4] != '-' || text[7] != '-' || (text[10] != 'T' && text[10] != ' ') ||
        text[13] != ':' || text[16] != ':') {
        return std::nullopt;
    }
    auto y = num(0, 4), mo = num(5, 2), d = num(8, 2), h = num(11, 2), mi = num(14, 2), s = num(17, 2);
    if (!y || !mo || !d || !h || !mi || !s || *h > 23 || *mi > 59 || *s > 60) return std::nullopt;
    std::chrono::year_month_day ymd{std::chrono::year{*y}, std::chrono::month{static_cast<unsigned>(*mo)},
                                    std::chrono::day{static_cast<unsigned>(*d)}};
    if (!ymd.ok()) return std::nullopt;

    std::size_t pos = 19;
    std::chrono::milliseconds frac{0};
    if (pos < text.size() && text[pos] == '.') {
        ++pos;
        int digits = 0;
        int ms = 0;
        while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9') {
            if (digits < 3) ms = ms * 10 + (text[pos] - '0');
            ++digits;
            ++pos;
        }
        if (digits == 0) return std::nullopt;
        for (int i = digits; i < 3; ++i) ms *= 10;
        frac = std::chrono::milliseconds{ms};
    }
    std::chrono::minutes offset{0};
    if (pos < text.size()) {
        if (text[pos] == 'Z' && pos + 1 == text.size()) {
            ++pos;
        } else if ((text[pos] == '+' || text[pos] == '-') && pos + 6 == text.size() && text[pos + 3] == ':') {
            auto oh = num(pos + 1, 2), om = num(pos + 4, 2);
            if (!oh || !om) return std::nullopt;
            offset = std::chrono::hours{*oh} + std::chrono::minutes{*om};
            if (text[pos] == '-') offset = -offset;
            pos = text.size();
        } else {
            return std::nullopt;
        }
    }
    auto tp = std::chrono::sys_days{ymd} + std::chrono::hours{*h} + std::chrono::minutes{*mi} +
              std::chrono::seconds{*s} + frac - offset;
    return std::chrono::time_point_cast<std::chrono::milliseconds>(tp);
}

GpxDocument parse_gpx(std::span<const std::uint8_t> payload, std::string url) {
    GpxDocument doc;
    doc.source_url = std::move(url);
    doc.content_hash = sha256(payload);

    // Some servers emit whitespace before the XML declaration.
    std::size_t start = 0;
    while (start < payload.size() && (payload[start] == ' ' || payload[start] == '\n' || payload[start] == '\r' ||
                                      payload[start] == '\t')) {
        ++start;
    }
    auto body = payload.subspan(start);

    std::unique_ptr<std::remove_pointer_t<XML_Parser>, decltype(&XML_ParserFree)> parser(
        XML_ParserCreateNS(nullptr, kNsSep), &XML_ParserFree);
    if (!parser) throw std::runtime_error("XML_ParserCreateNS failed");

    GpxHandler handler(doc);
    ExpatContext ctx{&handler, nullptr, parser.get()};
    XML_SetUserData(parser.get(), &ctx);
    XML_SetElementHandler(parser.get(), &on_start, &on_end);
    XML_SetCharacterDataHandler(parser.get(), &on_text);
    XML_SetUnknownEncodingHandler(parser.get(), &unknown_encoding, nullptr);

    auto status = XML_Parse(parser.get(), reinterpret_cast<const char*>(body.data()), static_cast<int>(body.size()),
                            XML_TRUE);
    if (ctx.error) std::rethrow_exception(ctx.error);
    if (status != XML_STATUS_OK) {
        throw ParseError(std::string("XML error at line ") +
                         std::to_string(XML_GetCurrentLineNumber(parser.get())) + ": " +
                         XML_ErrorString(XML_GetErrorCode(parser.get())));
    }
    handler.finish();
    return doc;
}

std::optional<Track> extract_single_track(const GpxDocument& doc) {
    const Track* only = nullptr;
    for (const auto& t : doc.tracks) {
        if (t.point_count() == 0) continue;
        if (only) return std::nullopt;
        only = &t;
    }
    if (!only) return std::nullopt;
    return *only;
}

std::optional<std::string> description_of(const Track& track, const GpxDocument& doc) {
    if (track.desc && !trim(*track.desc).empty()) return track.desc;
    return doc.metadata_desc;
}

Track strip_timestamps(Track track) {
    for (auto& seg : track.segments) {
        for (auto& p : seg.points) p.time.reset();
    }
    return track;
}

}  // namespace gpxharvest::gpx
