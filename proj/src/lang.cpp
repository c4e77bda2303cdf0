#include "gpxharvest/lang.hpp"

#include "gpxharvest/util.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <stdexcept>

#ifndef GPXH_DATA_DIR
#define GPXH_DATA_DIR "data"
#endif

namespace gpxharvest::desc {

namespace {

// Additive floor per gram, as in the langdetect smoothing (alpha / 10000).
constexpr double kSmoothing = 0.5 / 10000.0;

bool is_letter(char32_t cp) {
    if ((cp >= 'A' && cp <= 'Z') || (cp >= 'a' && cp <= 'z')) return true;
    if (cp >= 0xC0 && cp <= 0x24F) return cp != 0xD7 && cp != 0xF7;
    if (cp >= 0x370 && cp <= 0x3FF) return cp != 0x37E && cp != 0x387;  // Greek
    if (cp >= 0x400 && cp <= 0x52F) return true;                          // Cyrillic
    if (cp >= 0x1E00 && cp <= 0x1EFF) return true;                        // Latin extended additional
    return false;
}

// Splits into words of letters; everything else separates words.
std::vector<std::u32string> words_of(std::string_view text, std::size_t& letters, std::size_t& non_space) {
    std::vector<std::u32string> words;
    std::u32string current;
    std::size_t pos = 0;
    letters = 0;
    non_space = 0;
    while (pos < text.size()) {
        char32_t cp = decode_utf8(text, pos);
        bool space = cp == ' ' || cp == '\t' || cp == '\n' || cp == '\r' || cp == 0xA0;
        if (!space) ++non_space;
        if (is_letter(cp)) {
            ++letters;
            current.push_back(cp);
        } else if (!current.empty()) {
            words.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) words.push_back(std::move(current));
    return words;
}

std::string utf8_of(std::u32string_view s) {
    std::string out;
    for (auto cp : s) append_utf8(out, cp);
    return out;
}

}  // namespace

LanguageDetector LanguageDetector::from_file(const std::filesystem::path& tsv, DetectorOptions options) {
    std::ifstream in(tsv);
    if (!in) throw std::runtime_error("cannot open language profiles " + tsv.string());

    struct Raw {
        std::string lang;
        double totals[3] = {0, 0, 0};
        std::vector<std::pair<std::string, double>> grams;
    };
    std::vector<Raw> raw;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line.front() == '@') {
            Raw r;
            auto parts = std::string_view(line).substr(1);
            std::size_t field = 0;
            while (!parts.empty()) {
                auto tab = parts.find('\t');
                auto token = parts.substr(0, tab);
                if (field == 0) {
                    r.lang = std::string(token);
                } else if (field <= 3) {
                    r.totals[field - 1] = std::stod(std::string(token));
                }
                ++field;
                if (tab == std::string_view::npos) break;
                parts.remove_prefix(tab + 1);
            }
            if (field != 4) throw std::runtime_error("bad profile header: " + line);
            raw.push_back(std::move(r));
            continue;
        }
        if (raw.empty()) throw std::runtime_error("profile gram before header");
        auto tab = line.rfind('\t');
        if (tab == std::string::npos) throw std::runtime_error("bad profile line: " + line);
        raw.back().grams.emplace_back(line.substr(0, tab), std::stod(line.substr(tab + 1)));
    }
    if (raw.empty()) throw std::runtime_error("no language profiles in " + tsv.string());

    LanguageDetector det;
    det.options_ = options;
    for (const auto& r : raw) det.languages_.push_back(r.lang);
    const auto n_langs = raw.size();
    for (std::size_t li = 0; li < n_langs; ++li) {
        for (const auto& [gram, count] : raw[li].grams) {
            std::size_t order = 0;
            for (std::size_t p = 0; p < gram.size();) {
                decode_utf8(gram, p);
                ++order;
            }
            if (order < 1 || order > 3 || raw[li].totals[order - 1] <= 0) continue;
            auto& probs = det.gram_probs_[gram];
            if (probs.empty()) probs.assign(n_langs, 0.0f);
            probs[li] = static_cast<float>(count / raw[li].totals[order - 1]);
        }
    }
    return det;
}

std::filesystem::path LanguageDetector::default_profile_path() {
    return std::filesystem::path(getenv_or("GPX_HARVEST_DATA_DIR", GPXH_DATA_DIR)) / "lang_profiles.tsv";
}

const LanguageDetector& LanguageDetector::shared_default() {
    static const LanguageDetector detector = from_file(default_profile_path());
    return detector;
}

std::vector<LanguageScore> LanguageDetector::scores(std::string_view text) const {
    std::size_t letters = 0, non_space = 0;
    auto words = words_of(text, letters, non_space);
    if (letters == 0 || static_cast<double>(letters) < options_.min_letter_ratio * static_cast<double>(non_space)) {
        return {};
    }

    const auto n = languages_.size();
    std::vector<double> log_score(n, 0.0);
    std::size_t known = 0;
    for (const auto& w : words) {
        std::u32string padded = U" " + w + U" ";
        for (std::size_t len = 1; len <= 3; ++len) {
            for (std::size_t start = 0; start + len <= padded.size(); ++start) {
                auto gram = std::u32string_view(padded).substr(start, len);
                if (len == 1 && gram[0] == U' ') continue;
                auto it = gram_probs_.find(utf8_of(gram));
                if (it == gram_probs_.end()) continue;
                ++known;
                for (std::size_t li = 0; li < n; ++li) log_score[li] += std::log(kSmoothing + it->second[li]);
            }
        }
    }
    if (known < options_.min_known_ngrams) return {};

    double best = *std::max_element(log_score.begin(), log_score.end());
    double z = 0.0;
    for (auto s : log_score) z += std::exp(s - best);
    std::vector<LanguageScore> out;
    out.reserve(n);
    for (std::size_t li = 0; li < n; ++li) out.push_back({languages_[li], std::exp(log_score[li] - best) / z});
    std::stable_sort(out.begin(), out.end(),
                     [](const LanguageScore& a, const LanguageScore& b) { return a.probability > b.probability; });
    return out;
}

std::string LanguageDetector::detect(std::string_view text) const {
    auto s = scores(text);
    if (s.empty() || s.front().probability < options_.min_probability) return std::string(kUnknownLanguage);
    return s.front().lang;
}

std::string detect_language(std::string_view text) {
    return LanguageDetector::shared_default().detect(text);
}

}  // namespace gpxharvest::desc
