#include "gpxharvest/translate.hpp"

#include <doctest.h>

#include <algorithm>

using namespace gpxharvest::desc;

namespace {

class FailingTranslator final : public Translator {
public:
    int calls = 0;
    std::string translate(std::string_view, std::string_view) override {
        ++calls;
        throw TranslationError("backend down");
    }
};

std::size_t kept(const std::vector<std::string>& langs, std::size_t cutoff = kDefaultRareLanguageCutoff) {
    auto mask = rare_language_mask(langs, cutoff);
    return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), true));
}

}  // namespace

TEST_CASE("english passes through without calling the backend") {
    FailingTranslator t;
    CHECK(translate_to_english("Quieter roads and backstreets", "en", t) == "Quieter roads and backstreets");
    CHECK(t.calls == 0);
}

TEST_CASE("other languages go through the backend") {
    ScriptedTranslator t(false);
    t.add("Der Weg ist sehr gut gekennzeichnet", "The path is very well marked");
    CHECK(translate_to_english("Der Weg ist sehr gut gekennzeichnet", "de", t) == "The path is very well marked");
    CHECK_THROWS_AS(translate_to_english("Etwas anderes", "de", t), TranslationError);

    ScriptedTranslator pass;
    CHECK(translate_to_english("Etwas anderes", "de", pass) == "Etwas anderes");
}

TEST_CASE("backend errors and unknown language") {
    FailingTranslator t;
    CHECK_THROWS_AS(translate_to_english("Bonjour", "fr", t), TranslationError);
    CHECK(t.calls == 1);
    CHECK_THROWS_AS(translate_to_english("???", "unknown", t), std::invalid_argument);
    CHECK(t.calls == 1);
}

TEST_CASE("scripted translator from JSON") {
    auto t = ScriptedTranslator::from_json(
        nlohmann::json::parse(R"({"passthrough": false, "translations": {"Hallo": "Hello"}})"));
    CHECK(t.translate("Hallo", "de") == "Hello");
    CHECK_THROWS_AS(t.translate("Tschuess", "de"), TranslationError);
}

TEST_CASE("command translator") {
    CommandTranslator upper("tr a-z A-Z");
    CHECK(upper.translate("der weg", "de") == "DER WEG");

    CommandTranslator echo_src("printf '%s' {src}");
    CHECK(echo_src.translate("ignored", "de") == "de");

    CommandTranslator quoted("cat; printf ' [%s]' {src}");
    CHECK(quoted.translate("text", "x'; exit 3; '") == "text [x'; exit 3; ']");

    CommandTranslator fails("cat >/dev/null; exit 3");
    CHECK_THROWS_AS(fails.translate("text", "de"), TranslationError);

    CommandTranslator empty("cat >/dev/null");
    CHECK_THROWS_AS(empty.translate("text", "de"), TranslationError);

    CHECK_THROWS_AS(CommandTranslator(""), std::invalid_argument);

    std::string big(200'000, 'a');
    CommandTranslator big_upper("tr a A");
    CHECK(big_upper.translate(big, "de") == std::string(200'000, 'A'));
}

TEST_CASE("rare-language filter") {
    std::vector<std::string> langs(7, "fr");
    langs.insert(langs.end(), 5, "eo");
    langs.push_back("unknown");
    CHECK(kept(langs) == 7);
    auto mask = rare_language_mask(langs);
    for (std::size_t i = 0; i < langs.size(); ++i) CHECK(mask[i] == (langs[i] == "fr"));

    CHECK(kept(std::vector<std::string>(6, "de")) == 6);
    CHECK(kept(std::vector<std::string>(5, "de")) == 0);
    CHECK(kept({}) == 0);
    CHECK(kept({"unknown", "unknown"}, 0) == 0);
    CHECK(kept({"de", "fr"}, 0) == 2);

    struct Rec {
        int id;
        std::string lang;
    };
    std::vector<Rec> recs;
    for (int i = 0; i < 8; ++i) recs.push_back({i, i < 6 ? "de" : "sv"});
    auto out = filter_rare_languages(recs, [](const Rec& r) { return r.lang; });
    REQUIRE(out.size() == 6);
    for (int i = 0; i < 6; ++i) CHECK(out[i].id == i);
}
