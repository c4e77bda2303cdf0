#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace gpxharvest::desc {

inline constexpr std::string_view kUnknownLanguage = "unknown";

struct LanguageScore {
    std::string lang;
    double probability = 0.0;
};

struct DetectorOptions {
    double min_probability = 0.90;   // top posterior below this -> unknown
    double min_letter_ratio = 0.50;  // letters / non-space characters
    std::size_t min_known_ngrams = 8;
};

/// Naive-Bayes classifier over character 1-3 grams. Profiles are plain
/// gram counts per language; scoring is deterministic.
class LanguageDetector {
public:
    static LanguageDetector from_file(const std::filesystem::path& tsv, DetectorOptions options = {});

    /// Loads data/lang_profiles.tsv from GPX_HARVEST_DATA_DIR or the
    /// build-time data directory.
    static const LanguageDetector& shared_default();
    static std::filesystem::path default_profile_path();

    /// ISO-639-1 code, or "unknown" for low-confidence or mostly
    /// non-alphabetic text.
    std::string detect(std::string_view text) const;

    /// Posterior over every profile, best first. Empty when the text has
    /// too few letters to score.
    std::vector<LanguageScore> scores(std::string_view text) const;

    const std::vector<std::string>& languages() const { return languages_; }

private:
    LanguageDetector() = default;

    DetectorOptions options_;
    std::vector<std::string> languages_;
    // gram -> per-language probability (count / total grams of that order)
    std::unordered_map<std::string, std::vector<float>> gram_probs_;
};

std::string detect_language(std::string_view text);

}  // namespace gpxharvest::desc
