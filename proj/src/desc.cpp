#include "gpxharvest/desc.hpp"

#include "gpxharvest/util.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <optional>
#include <regex>
#include <string_view>
#include <unordered_map>

namespace gpxharvest::desc {

namespace {

// Named entities seen in scraped descriptions: the HTML 4 Latin-1 set plus
// common typography.
const std::unordered_map<std::string_view, char32_t>& entity_table() {
    static const std::unordered_map<std::string_view, char32_t> table = {
        {"amp", '&'},       {"lt", '<'},        {"gt", '>'},        {"quot", '"'},      {"apos", '\''},
        {"nbsp", 0xA0},     {"iexcl", 0xA1},    {"cent", 0xA2},     {"pound", 0xA3},    {"curren", 0xA4},
        {"yen", 0xA5},      {"brvbar", 0xA6},   {"sect", 0xA7},     {"uml", 0xA8},      {"copy", 0xA9},
        {"ordf", 0xAA},     {"laquo", 0xAB},    {"not", 0xAC},      {"shy", 0xAD},      {"reg", 0xAE},
        {"macr", 0xAF},     {"deg", 0xB0},      {"plusmn", 0xB1},   {"sup2", 0xB2},     {"sup3", 0xB3},
        {"acute", 0xB4},    {"micro", 0xB5},    {"para", 0xB6},     {"middot", 0xB7},   {"cedil", 0xB8},
        {"sup1", 0xB9},     {"ordm", 0xBA},     {"raquo", 0xBB},    {"frac14", 0xBC},   {"frac12", 0xBD},
        {"frac34", 0xBE},   {"iquest", 0xBF},   {"Agrave", 0xC0},   {"Aacute", 0xC1},   {"Acirc", 0xC2},
        {"Atilde", 0xC3},   {"Auml", 0xC4},     {"Aring", 0xC5},    {"AElig", 0xC6},    {"Ccedil", 0xC7},
        {"Egrave", 0xC8},   {"Eacute", 0xC9},   {"Ecirc", 0xCA},    {"Euml", 0xCB},     {"Igrave", 0xCC},
        {"Iacute", 0xCD},   {"Icirc", 0xCE},    {"Iuml", 0xCF},     {"ETH", 0xD0},      {"Ntilde", 0xD1},
        {"Ograve", 0xD2},   {"Oacute", 0xD3},   {"Ocirc", 0xD4},    {"Otilde", 0xD5},   {"Ouml", 0xD6},
        {"times", 0xD7},    {"Oslash", 0xD8},   {"Ugrave", 0xD9},   {"Uacute", 0xDA},   {"Ucirc", 0xDB},
        {"Uuml", 0xDC},     {"Yacute", 0xDD},   {"THORN", 0xDE},    {"szlig", 0xDF},    {"agrave", 0xE0},
        {"aacute", 0xE1},   {"acirc", 0xE2},    {"atilde", 0xE3},   {"auml", 0xE4},     {"aring", 0xE5},
        {"aelig", 0xE6},    {"ccedil", 0xE7},   {"egrave", 0xE8},   {"eacute", 0xE9},   {"ecirc", 0xEA},
        {"euml", 0xEB},     {"igrave", 0xEC},   {"iacute", 0xED},   {"icirc", 0xEE},    {"iuml", 0xEF},
        {"eth", 0xF0},      {"ntilde", 0xF1},   {"ograve", 0xF2},   {"oacute", 0xF3},   {"ocirc", 0xF4},
        {"otilde", 0xF5},   {"ouml", 0xF6},     {"divide", 0xF7},   {"oslash", 0xF8},   {"ugrave", 0xF9},
        {"uacute", 0xFA},   {"ucirc", 0xFB},    {"uuml", 0xFC},     {"yacute", 0xFD},   {"thorn", 0xFE},
        {"yuml", 0xFF},     {"OElig", 0x152},   {"oelig", 0x153},   {"Scaron", 0x160},  {"scaron", 0x161},
        {"Yuml", 0x178},    {"ndash", 0x2013},  {"mdash", 0x2014},  {"lsquo", 0x2018},  {"rsquo", 0x2019},
        {"sbquo", 0x201A},  {"ldquo", 0x201C},  {"rdquo", 0x201D},  {"bdquo", 0x201E},  {"bull", 0x2022},
        {"hellip", 0x2026}, {"prime", 0x2032},  {"euro", 0x20AC},   {"trade", 0x2122},  {"larr", 0x2190},
        {"rarr", 0x2192},   {"uarr", 0x2191},   {"darr", 0x2193},   {"thinsp", 0x2009}, {"ensp", 0x2002},
        {"emsp", 0x2003},
    };
    return table;
}

bool is_ascii_alpha(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}

bool is_ascii_digit(char c) {
    return c >= '0' && c <= '9';
}

bool is_ascii_alnum(char c) {
    return is_ascii_alpha(c) || is_ascii_digit(c);
}

// Tags whose boundaries separate words when rendered.
bool is_block_tag(std::string_view name) {
    static constexpr std::array<std::string_view, 28> kBlock = {
        "address", "article", "aside", "blockquote", "br", "dd", "div", "dl", "dt", "figcaption",
        "footer", "h1", "h2", "h3", "h4", "h5", "h6", "header", "hr", "li", "ol", "p", "pre",
        "section", "table", "td", "tr", "ul",
    };
    auto lower = to_lower_ascii(name);
    return std::find(kBlock.begin(), kBlock.end(), lower) != kBlock.end();
}

std::string strip_tags(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    std::size_t i = 0;
    while (i < s.size()) {
        char c = s[i];
        if (c != '<' || i + 1 >= s.size()) {
            out.push_back(c);
            ++i;
            continue;
        }
        char next = s[i + 1];
        if (s.compare(i, 4, "<!--") == 0) {
            auto end = s.find("-->", i + 4);
            if (end == std::string_view::npos) {
                out.push_back(c);
                ++i;
                continue;
            }
            i = end + 3;
            continue;
        }
        if (!(is_ascii_alpha(next) || next == '/' || next == '!' || next == '?')) {
            out.push_back(c);
            ++i;
            continue;
        }
        auto close = s.find('>', i + 1);
        if (close == std::string_view::npos) {
            out.push_back(c);
            ++i;
            continue;
        }
        auto inner = s.substr(i + 1, close - i - 1);
        bool closing = !inner.empty() && inner.front() == '/';
        if (closing) inner.remove_prefix(1);
        std::size_t n = 0;
        while (n < inner.size() && is_ascii_alnum(inner[n])) ++n;
        auto name = inner.substr(0, n);
        auto lower = to_lower_ascii(name);
        if (!closing && (lower == "script" || lower == "style")) {
            auto end_tag = to_lower_ascii(s.substr(close + 1)).find("</" + lower);
            if (end_tag != std::string::npos) {
                auto after = s.find('>', close + 1 + end_tag);
                i = after == std::string_view::npos ? s.size() : after + 1;
                continue;
            }
        }
        if (is_block_tag(name)) out.push_back(' ');
        i = close + 1;
    }
    return out;
}

std::string decode_entities(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    std::size_t i = 0;
    while (i < s.size()) {
        if (s[i] != '&') {
            out.push_back(s[i++]);
            continue;
        }
        auto semi = s.find(';', i + 1);
        if (semi == std::string_view::npos || semi - i > 12) {
            out.push_back(s[i++]);
            continue;
        }
        auto name = s.substr(i + 1, semi - i - 1);
        std::optional<char32_t> cp;
        if (name.size() > 1 && name[0] == '#') {
            std::uint32_t v = 0;
            bool hex = name[1] == 'x' || name[1] == 'X';
            auto digits = name.substr(hex ? 2 : 1);
            auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), v, hex ? 16 : 10);
            if (ec == std::errc{} && ptr == digits.data() + digits.size() && !digits.empty() && v > 0 &&
                v <= 0x10FFFF) {
                cp = static_cast<char32_t>(v);
            }
        } else if (auto it = entity_table().find(name); it != entity_table().end()) {
            cp = it->second;
        }
        if (!cp) {
            out.push_back(s[i++]);
            continue;
        }
        append_utf8(out, *cp);
        i = semi + 1;
    }
    return out;
}

std::string strip_brackets(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    std::vector<std::pair<char, std::size_t>> open;
    for (char c : s) {
        if (c == '[' || c == '{') {
            open.emplace_back(c, out.size());
            out.push_back(c);
        } else if ((c == ']' || c == '}') && !open.empty() && open.back().first == (c == ']' ? '[' : '{')) {
            auto start = open.back().second;
            open.pop_back();
            if (open.empty()) {
                out.resize(start);
            } else {
                out.push_back(c);
            }
        } else {
            out.push_back(c);
        }
    }
    return out;
}

bool is_space_cp(char32_t cp) {
    return cp == ' ' || cp == '\t' || cp == '\n' || cp == '\r' || cp == '\f' || cp == '\v' || cp == 0xA0 ||
           cp == 0x1680 || (cp >= 0x2000 && cp <= 0x200A) || cp == 0x2028 || cp == 0x2029 || cp == 0x202F ||
           cp == 0x205F || cp == 0x3000;
}

std::string normalize_space(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    bool pending_space = false;
    std::size_t pos = 0;
    while (pos < s.size()) {
        std::size_t start = pos;
        char32_t cp = decode_utf8(s, pos);
        if (is_space_cp(cp)) {
            pending_space = !out.empty();
            continue;
        }
        if (cp == 0xAD || cp == 0x200B || cp == 0xFEFF) continue;  // soft hyphen, zero-width
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        out.append(s.substr(start, pos - start));
    }
    return out;
}

std::string clean_once(std::string_view raw) {
    return normalize_space(strip_brackets(decode_entities(strip_tags(raw))));
}

}  // namespace

std::string clean_text(std::string_view raw) {
    std::string current = clean_once(raw);
    for (int i = 0; i < 8; ++i) {
        std::string next = clean_once(current);
        if (next == current) break;
        current = std::move(next);
    }
    return current;
}

bool passes_length_bounds(std::string_view text, std::size_t min_chars, std::size_t max_chars_exclusive) {
    auto n = utf8_length(text);
    return n >= min_chars && n < max_chars_exclusive;
}

std::vector<PiiMatch> find_emails(std::string_view text) {
    static const std::regex kEmail(
        R"([A-Za-z0-9._%+\-]+@[A-Za-z0-9](?:[A-Za-z0-9\-]*[A-Za-z0-9])?(?:\.[A-Za-z0-9](?:[A-Za-z0-9\-]*[A-Za-z0-9])?)*\.[A-Za-z]{2,})");
    std::vector<PiiMatch> out;
    for (auto it = std::cregex_iterator(text.data(), text.data() + text.size(), kEmail); it != std::cregex_iterator();
         ++it) {
        auto begin = static_cast<std::size_t>(it->position(0));
        out.push_back({PiiKind::email, begin, begin + static_cast<std::size_t>(it->length(0))});
    }
    return out;
}

std::vector<PiiMatch> find_urls(std::string_view text) {
    static const std::regex kUrl(
        R"((?:(?:https?|ftp)://[^\s<>"']+|\bwww\.[A-Za-z0-9\-]+(?:\.[A-Za-z0-9\-]+)+[^\s<>"']*))", std::regex::icase);
    std::vector<PiiMatch> out;
    for (auto it = std::cregex_iterator(text.data(), text.data() + text.size(), kUrl); it != std::cregex_iterator();
         ++it) {
        auto begin = static_cast<std::size_t>(it->position(0));
        auto end = begin + static_cast<std::size_t>(it->length(0));
        // Sentence punctuation and unbalanced closing parens are not part of the URL.
        while (end > begin) {
            char last = text[end - 1];
            if (last == '.' || last == ',' || last == ';' || last == ':' || last == '!' || last == '?') {
                --end;
                continue;
            }
            if (last == ')') {
                auto inner = text.substr(begin, end - begin);
                if (std::count(inner.begin(), inner.end(), '(') < std::count(inner.begin(), inner.end(), ')')) {
                    --end;
                    continue;
                }
            }
            break;
        }
        auto url = text.substr(begin, end - begin);
        bool has_body = url.find("://") == std::string_view::npos || url.size() > url.find("://") + 3;
        if (has_body) out.push_back({PiiKind::url, begin, end});
    }
    return out;
}

namespace {

struct PhoneCandidate {
    std::size_t begin = 0;
    std::size_t end = 0;
    std::vector<std::string> groups;
    std::vector<std::string> separators;
    bool plus = false;
};

std::optional<int> as_int(const std::string& s) {
    int v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{}) return std::nullopt;
    return v;
}

bool looks_like_year(const std::string& g) {
    auto v = as_int(g);
    return g.size() == 4 && v && *v >= 1000 && *v <= 2099;
}

bool is_separator(char c) {
    return c == ' ' || c == '-' || c == '.' || c == '(' || c == ')';
}

bool plausible_phone(const PhoneCandidate& c, std::string_view text) {
    std::size_t digits = 0;
    for (const auto& g : c.groups) digits += g.size();
    if (digits < 7 || digits > 15) return false;

    std::size_t opens = 0, closes = 0;
    for (std::size_t i = c.begin; i < c.end; ++i) {
        if (text[i] == '(') ++opens;
        if (text[i] == ')') {
            ++closes;
            if (closes > opens) return false;
        }
    }
    if (opens != closes) return false;

    bool dotted = std::any_of(c.separators.begin(), c.separators.end(),
                              [](const std::string& s) { return s.find('.') != std::string::npos; });
    if (dotted) {
        // French-style 04.76.12.34.56: dots only, short groups.
        std::size_t first = c.plus ? 1 : 0;
        for (std::size_t i = first; i < c.separators.size(); ++i) {
            if (c.separators[i] != ".") return false;
        }
        for (std::size_t i = first; i < c.groups.size(); ++i) {
            if (c.groups[i].size() < 2 || c.groups[i].size() > 4) return false;
        }
    }
    if (!c.plus && c.groups.size() == 2 && looks_like_year(c.groups[0]) && looks_like_year(c.groups[1])) {
        return false;  // year range
    }
    if (!c.plus && c.groups.size() == 3) {
        const auto& g = c.groups;
        bool dmy = g[0].size() <= 2 && g[1].size() <= 2 && (g[2].size() == 4 || g[2].size() == 2);
        bool ymd = looks_like_year(g[0]) && g[1].size() <= 2 && g[2].size() <= 2;
        if (dmy || ymd) return false;
    }

    // A following ".5" or ",5" means the digits continue a decimal number.
    if (c.end + 1 < text.size() && (text[c.end] == '.' || text[c.end] == ',') && is_ascii_digit(text[c.end + 1])) {
        return false;
    }
    if (c.end < text.size() && is_ascii_alpha(text[c.end])) return false;
    return true;
}

}  // namespace

std::vector<PiiMatch> find_phones(std::string_view text) {
    std::vector<PiiMatch> out;
    std::size_t i = 0;
    while (i < text.size()) {
        char c = text[i];
        bool can_start = is_ascii_digit(c) ||
                         (c == '+' && i + 1 < text.size() && is_ascii_digit(text[i + 1])) ||
                         (c == '(' && i + 1 < text.size() && (is_ascii_digit(text[i + 1]) || text[i + 1] == '+'));
        if (!can_start) {
            ++i;
            continue;
        }
        if (i > 0) {
            char prev = text[i - 1];
            bool glued = is_ascii_alnum(prev) || prev == '_' || prev == '@' || prev == '/' ||
                         ((prev == '.' || prev == ',' || prev == '-' || prev == '+' || prev == ':') && i > 1 &&
                          is_ascii_digit(text[i - 2]));
            if (glued) {
                // Skip the rest of this numeric run.
                while (i < text.size() && (is_ascii_digit(text[i]) || text[i] == '.' || text[i] == ',')) ++i;
                if (i < text.size() && !is_ascii_digit(text[i])) ++i;
                continue;
            }
        }

        PhoneCandidate cand;
        cand.begin = i;
        std::size_t pos = i;
        std::string leading;
        if (text[pos] == '(') {
            leading.push_back('(');
            ++pos;
        }
        if (pos < text.size() && text[pos] == '+') {
            cand.plus = true;
            ++pos;
        }
        while (true) {
            std::string group;
            while (pos < text.size() && is_ascii_digit(text[pos])) group.push_back(text[pos++]);
            if (group.empty()) break;
            cand.groups.push_back(std::move(group));
            cand.end = pos;
            // Separator run: up to three chars, at most one dot/dash, then a digit.
            std::size_t look = pos;
            std::string sep;
            while (look < text.size() && is_separator(text[look]) && sep.size() < 3) sep.push_back(text[look++]);
            auto count = [&](char ch) { return std::count(sep.begin(), sep.end(), ch); };
            if (sep.empty() || look >= text.size() || !is_ascii_digit(text[look]) || count('.') > 1 ||
                count('-') > 1 || (count('.') && count('-'))) {
                // A closing paren directly after the digits belongs to "(020)" style prefixes only.
                break;
            }
            cand.separators.push_back(sep);
            pos = look;
        }
        if (cand.groups.empty()) {
            ++i;
            continue;
        }
        if (plausible_phone(cand, text)) {
            out.push_back({PiiKind::phone, cand.begin, cand.end});
            i = cand.end;
        } else {
            i = cand.end;
            while (i < text.size() && is_ascii_digit(text[i])) ++i;
        }
    }
    return out;
}

namespace {

std::string replace_matches(std::string_view text, const std::vector<PiiMatch>& matches, std::string_view token) {
    std::string out;
    out.reserve(text.size());
    std::size_t pos = 0;
    for (const auto& m : matches) {
        if (m.begin < pos) continue;
        out.append(text.substr(pos, m.begin - pos));
        out.append(token);
        pos = m.end;
    }
    out.append(text.substr(pos));
    return out;
}

}  // namespace

std::vector<PiiMatch> find_pii(std::string_view text) {
    auto all = find_emails(text);
    auto urls = find_urls(text);
    auto phones = find_phones(text);
    all.insert(all.end(), urls.begin(), urls.end());
    all.insert(all.end(), phones.begin(), phones.end());
    return all;
}

MaskResult mask_pii(std::string_view text) {
    MaskResult result;
    auto emails = find_emails(text);
    result.flags.email = !emails.empty();
    std::string step = replace_matches(text, emails, kEmailToken);

    auto urls = find_urls(step);
    result.flags.url = !urls.empty();
    step = replace_matches(step, urls, kUrlToken);

    auto phones = find_phones(step);
    result.flags.phone = !phones.empty();
    result.text = replace_matches(step, phones, kPhoneToken);
    return result;
}

}  // namespace gpxharvest::desc
