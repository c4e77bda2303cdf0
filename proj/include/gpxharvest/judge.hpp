#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace gpxharvest::desc {

enum class JudgeKind { quality, pii };

std::string_view to_string(JudgeKind kind);

/// Prompt templates; "{text}" is replaced by the description.
inline constexpr std::string_view kQualityPromptTemplate =
    "Does the text in triple quotes represent a high-quality and insightful route or track description, "
    "or an activity description such as hiking, cycling, or racing? Respond with 'True' or 'False'. "
    "If you are unsure, say 'False'. Text: \"\"\"{text}\"\"\"";

inline constexpr std::string_view kPiiPromptTemplate =
    "Does the text in triple quotes contain any personally identifiable information, such as someone's "
    "address or name? Respond with 'True' or 'False'. If you are unsure, say 'True'. Text: \"\"\"{text}\"\"\"";

std::string render_prompt(JudgeKind kind, std::string_view text);

struct JudgeRequest {
    JudgeKind kind;
    std::string prompt;
    std::string text;  // the substituted description, kept separately for audit redaction
};

/// The judge could not be reached (after its own retries).
class JudgeUnavailable : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class TextJudge {
public:
    virtual ~TextJudge() = default;
    /// Returns the raw reply text; throws JudgeUnavailable on transport failure.
    virtual std::string complete(const JudgeRequest& request) = 0;
};

struct JudgeVerdict {
    bool value = false;
    std::string raw_reply;
    bool parsed = false;  // false when the fail-closed default was applied
};

/// First standalone "true"/"false" word, ignoring case.
std::optional<bool> parse_verdict(std::string_view reply);

/// Unparsable replies count as false (not high quality).
JudgeVerdict judge_quality(std::string_view text, TextJudge& judge);

/// Unparsable replies count as true (contains PII).
JudgeVerdict judge_pii(std::string_view text, TextJudge& judge);

/// Canned replies keyed on judge kind and substrings of the description.
/// Every request is recorded for inspection.
class ScriptedJudge final : public TextJudge {
public:
    struct Rule {
        std::optional<JudgeKind> kind;
        std::string contains;  // empty matches everything
        std::string reply;
        bool fail = false;  // throw JudgeUnavailable instead of replying
    };

    ScriptedJudge(std::string quality_default = "True", std::string pii_default = "False");
    ScriptedJudge(ScriptedJudge&& other) noexcept;

    /// {"quality": {"default": "True", "rules": [{"contains": "...", "reply": "False"}]}, "pii": {...}}
    static ScriptedJudge from_json(const nlohmann::json& j);

    ScriptedJudge& add_rule(Rule rule);
    std::string complete(const JudgeRequest& request) override;

    std::vector<JudgeRequest> requests() const;

private:
    std::string quality_default_;
    std::string pii_default_;
    std::vector<Rule> rules_;
    mutable std::mutex mu_;
    std::vector<JudgeRequest> requests_;
};

struct ChatJudgeConfig {
    std::string url;    // chat-completions endpoint
    std::string model;
    std::string api_key;
    int max_retries = 3;
    std::chrono::milliseconds backoff_base{1000};
    int max_in_flight = 4;
    std::chrono::milliseconds timeout{60'000};
    std::filesystem::path audit_log;  // empty disables request/response logging

    /// Overrides url/model/api_key from GPX_HARVEST_JUDGE_URL, _MODEL, _API_KEY.
    void apply_env();
};

/// OpenAI-style chat-completions client. The description is replaced by a
/// length marker before request bodies are written to the audit log.
class ChatCompletionsJudge final : public TextJudge {
public:
    explicit ChatCompletionsJudge(ChatJudgeConfig config);
    std::string complete(const JudgeRequest& request) override;

    nlohmann::json build_request_body(const JudgeRequest& request) const;
    static std::string extract_reply(const nlohmann::json& response);

private:
    void audit(const nlohmann::json& entry);

    ChatJudgeConfig config_;
    std::counting_semaphore<1024> in_flight_;
    std::mutex audit_mu_;
    std::ofstream audit_out_;
};

}  // namespace gpxharvest::desc
