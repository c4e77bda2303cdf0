#include "gpxharvest/warc.hpp"

#include <charconv>

namespace gpxharvest::warc {

std::string build_range_header(std::uint64_t offset, std::uint64_t length) {
    if (length == 0) {
        throw std::invalid_argument("range length must be positive");
    }
    if (offset > UINT64_MAX - (length - 1)) {
        throw std::invalid_argument("range end overflows");
    }
    return "bytes=" + std::to_string(offset) + "-" + std::to_string(offset + length - 1);
}

const std::string* HeaderBlock::find(const std::string& lower_name) const {
    auto it = fields.find(lower_name);
    return it == fields.end() ? nullptr : &it->second;
}

std::size_t parse_header_block(std::string_view data, HeaderBlock& out) {
    std::size_t pos = 0;
    bool first = true;
    std::string last_key;
    while (true) {
        auto eol = data.find('\n', pos);
        if (eol == std::string_view::npos) {
            throw ExtractError(ExtractErrorKind::decode_error, "header block not terminated");
        }
        auto line = data.substr(pos, eol - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        pos = eol + 1;
        if (line.empty()) {
            if (first) {
                throw ExtractError(ExtractErrorKind::decode_error, "empty header block");
            }
            return pos;
        }
        if (first) {
            out.first_line = std::string(line);
            first = false;
            continue;
        }
        if ((line.front() == ' ' || line.front() == '\t') && !last_key.empty()) {
            // obsolete line folding
            out.fields[last_key] += " " + std::string(trim(line));
            continue;
        }
        auto colon = line.find(':');
        if (colon == std::string_view::npos) {
            throw ExtractError(ExtractErrorKind::decode_error, "malformed header line");
        }
        last_key = to_lower_ascii(trim(line.substr(0, colon)));
        out.fields[last_key] = std::string(trim(line.substr(colon + 1)));
    }
}

namespace {

std::uint64_t parse_length(const std::string& s) {
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) {
        throw ExtractError(ExtractErrorKind::decode_error, "bad Content-Length: " + s);
    }
    return v;
}

int parse_http_status(const std::string& status_line) {
    // "HTTP/1.1 200 OK"
    if (status_line.rfind("HTTP/", 0) != 0) {
        throw ExtractError(ExtractErrorKind::decode_error, "not an HTTP status line");
    }
    auto sp = status_line.find(' ');
    if (sp == std::string::npos) {
        throw ExtractError(ExtractErrorKind::decode_error, "HTTP status line has no code");
    }
    int code = 0;
    auto begin = status_line.data() + sp + 1;
    auto end = status_line.data() + status_line.size();
    auto [ptr, ec] = std::from_chars(begin, end, code);
    if (ec != std::errc{} || ptr - begin != 3) {
        throw ExtractError(ExtractErrorKind::decode_error, "bad HTTP status code");
    }
    return code;
}

}  // namespace

Bytes dechunk(std::string_view body) {
    Bytes out;
    std::size_t pos = 0;
    while (true) {
        auto eol = body.find('\n', pos);
        if (eol == std::string_view::npos) {
            throw ExtractError(ExtractErrorKind::decode_error, "chunked body truncated");
        }
        auto size_line = trim(body.substr(pos, eol - pos));
        size_line = size_line.substr(0, size_line.find(';'));
        std::uint64_t size = 0;
        auto [ptr, ec] = std::from_chars(size_line.data(), size_line.data() + size_line.size(), size, 16);
        if (ec != std::errc{} || size_line.empty()) {
            throw ExtractError(ExtractErrorKind::decode_error, "bad chunk size");
        }
        pos = eol + 1;
        if (size == 0) return out;
        if (pos + size > body.size()) {
            throw ExtractError(ExtractErrorKind::decode_error, "chunk exceeds body");
        }
        out.insert(out.end(), body.begin() + pos, body.begin() + pos + size);
        pos += size;
        if (pos < body.size() && body[pos] == '\r') ++pos;
        if (pos < body.size() && body[pos] == '\n') ++pos;
    }
}

Bytes extract_payload(const WarcSlice& slice) {
    return extract_payload(std::span<const std::uint8_t>(slice.record_bytes));
}

Bytes extract_payload(std::span<const std::uint8_t> record_bytes) {
    Bytes record;
    try {
        record = gunzip_member(record_bytes);
    } catch (const GzipError& e) {
        throw ExtractError(ExtractErrorKind::decode_error, e.what());
    }
    std::string_view text = as_string_view(record);

    HeaderBlock warc_headers;
    auto block_start = parse_header_block(text, warc_headers);
    if (warc_headers.first_line.rfind("WARC/", 0) != 0) {
        throw ExtractError(ExtractErrorKind::decode_error, "missing WARC version line");
    }
    const auto* type = warc_headers.find("warc-type");
    if (!type) {
        throw ExtractError(ExtractErrorKind::decode_error, "missing WARC-Type");
    }
    if (!iequals_ascii(*type, "response")) {
        throw ExtractError(ExtractErrorKind::skipped_record, "WARC-Type is " + *type);
    }
    auto block = text.substr(block_start);
    if (const auto* len = warc_headers.find("content-length")) {
        auto n = parse_length(*len);
        if (n > block.size()) {
            throw ExtractError(ExtractErrorKind::decode_error, "WARC block truncated");
        }
        block = block.substr(0, n);
    }

    HeaderBlock http;
    auto body_start = parse_header_block(block, http);
    int status = parse_http_status(http.first_line);
    if (status != 200) {
        throw ExtractError(ExtractErrorKind::skipped_record, "HTTP status " + std::to_string(status));
    }
    auto body = block.substr(body_start);

    Bytes payload;
    const auto* te = http.find("transfer-encoding");
    if (te && icontains_ascii(*te, "chunked")) {
        payload = dechunk(body);
    } else if (const auto* len = http.find("content-length")) {
        auto n = parse_length(*len);
        if (n > body.size()) {
            throw ExtractError(ExtractErrorKind::decode_error, "HTTP body truncated");
        }
        payload.assign(body.begin(), body.begin() + static_cast<std::ptrdiff_t>(n));
    } else {
        payload.assign(body.begin(), body.end());
    }

    if (const auto* ce = http.find("content-encoding"); ce && (iequals_ascii(*ce, "gzip") || iequals_ascii(*ce, "x-gzip"))) {
        try {
            payload = gunzip_all(payload);
        } catch (const GzipError& e) {
            throw ExtractError(ExtractErrorKind::decode_error, std::string("content-encoding: ") + e.what());
        }
    }
    return payload;
}

}  // namespace gpxharvest::warc
