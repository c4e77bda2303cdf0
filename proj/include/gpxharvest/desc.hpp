#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace gpxharvest::desc {

inline constexpr std::size_t kDefaultMinChars = 50;
inline constexpr std::size_t kDefaultMaxCharsExclusive = 2000;

/// Strips HTML markup and decodes entities, drops [...] and {...} spans,
/// turns newlines/tabs/other spacing into single spaces, and trims.
/// Repeats until the text stops changing, so the result is a fixed point.
std::string clean_text(std::string_view raw);

/// min_chars <= scalar count < max_chars_exclusive.
bool passes_length_bounds(std::string_view text, std::size_t min_chars = kDefaultMinChars,
                          std::size_t max_chars_exclusive = kDefaultMaxCharsExclusive);

struct PiiFlags {
    bool email = false;
    bool url = false;
    bool phone = false;

    bool any() const { return email || url || phone; }
    bool operator==(const PiiFlags&) const = default;
};

struct MaskResult {
    std::string text;
    PiiFlags flags;
};

inline constexpr std::string_view kEmailToken = "<EMAIL>";
inline constexpr std::string_view kUrlToken = "<URL>";
inline constexpr std::string_view kPhoneToken = "<TELEPHONE>";

enum class PiiKind { email, url, phone };

struct PiiMatch {
    PiiKind kind;
    std::size_t begin;  // byte offsets into the scanned text
    std::size_t end;
};

std::vector<PiiMatch> find_emails(std::string_view text);
std::vector<PiiMatch> find_urls(std::string_view text);

/// Phone candidates: optional '+', 7-15 digits split by single space, dash,
/// dot or parenthesis separators, not glued to letters or to a longer
/// numeric run. Dotted decimals, dates and year ranges are rejected.
std::vector<PiiMatch> find_phones(std::string_view text);

/// Every raw match of the three patterns, in the order they would be
/// masked (emails, then URLs, then phones).
std::vector<PiiMatch> find_pii(std::string_view text);

/// Masks emails, then URLs, then phone numbers.
MaskResult mask_pii(std::string_view text);

}  // namespace gpxharvest::desc
