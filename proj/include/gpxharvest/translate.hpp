#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <mutex>
#include <semaphore>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace gpxharvest::desc {

class TranslationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class Translator {
public:
    virtual ~Translator() = default;
    /// English rendering of `text`; throws TranslationError on failure.
    virtual std::string translate(std::string_view text, std::string_view source_lang) = 0;
};

/// Runs a shell command per description: "{src}" in the template is
/// replaced by the source language code, the text goes to stdin and the
/// translation is read from stdout. A non-zero exit status is a failure.
///   e.g. "argos-translate --from-lang {src} --to-lang en"
class CommandTranslator final : public Translator {
public:
    explicit CommandTranslator(std::string command_template, int max_in_flight = 2);
    std::string translate(std::string_view text, std::string_view source_lang) override;

private:
    std::string template_;
    std::counting_semaphore<64> in_flight_;
};

/// Fixed translations keyed by source text. Unknown texts either pass
/// through unchanged or fail, depending on `passthrough`.
class ScriptedTranslator final : public Translator {
public:
    explicit ScriptedTranslator(bool passthrough = true) : passthrough_(passthrough) {}

    /// {"passthrough": true, "translations": {"<source text>": "<english>"}}
    static ScriptedTranslator from_json(const nlohmann::json& j);

    ScriptedTranslator& add(std::string source, std::string english);
    std::string translate(std::string_view text, std::string_view source_lang) override;

private:
    bool passthrough_;
    std::map<std::string, std::string, std::less<>> table_;
};

/// English passes through untouched; "unknown" is a precondition violation.
std::string translate_to_english(std::string_view text, std::string_view lang, Translator& translator);

inline constexpr std::size_t kDefaultRareLanguageCutoff = 5;

/// keep[i] is false when langs[i] is "unknown" or occurs `cutoff` times or
/// fewer across the collection.
std::vector<bool> rare_language_mask(std::span<const std::string> langs, std::size_t cutoff = kDefaultRareLanguageCutoff);

template <typename Record, typename LangOf>
std::vector<Record> filter_rare_languages(std::vector<Record> records, LangOf lang_of,
                                          std::size_t cutoff = kDefaultRareLanguageCutoff) {
    std::vector<std::string> langs;
    langs.reserve(records.size());
    for (const auto& r : records) langs.emplace_back(lang_of(r));
    auto keep = rare_language_mask(langs, cutoff);
    std::vector<Record> out;
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (keep[i]) out.push_back(std::move(records[i]));
    }
    return out;
}

}  // namespace gpxharvest::desc
