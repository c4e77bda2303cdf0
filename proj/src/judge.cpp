#include "gpxharvest/judge.hpp"

#include "gpxharvest/http.hpp"
#include "gpxharvest/util.hpp"

#include <thread>

namespace gpxharvest::desc {

std::string_view to_string(JudgeKind kind) {
    return kind == JudgeKind::quality ? "quality" : "pii";
}

std::string render_prompt(JudgeKind kind, std::string_view text) {
    std::string_view tmpl = kind == JudgeKind::quality ? kQualityPromptTemplate : kPiiPromptTemplate;
    constexpr std::string_view kSlot = "{text}";
    auto at = tmpl.find(kSlot);
    std::string out;
    out.reserve(tmpl.size() + text.size());
    out.append(tmpl.substr(0, at));
    out.append(text);
    out.append(tmpl.substr(at + kSlot.size()));
    return out;
}

std::optional<bool> parse_verdict(std::string_view reply) {
    auto lower = to_lower_ascii(reply);
    auto is_word_char = [](char c) {
        return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_' || static_cast<unsigned char>(c) >= 0x80;
    };
    for (std::size_t i = 0; i < lower.size(); ++i) {
        if (i > 0 && is_word_char(lower[i - 1])) continue;
        for (auto [word, value] : {std::pair{std::string_view("true"), true}, std::pair{std::string_view("false"), false}}) {
            if (lower.compare(i, word.size(), word) != 0) continue;
            auto end = i + word.size();
            if (end < lower.size() && is_word_char(lower[end])) continue;
            return value;
        }
    }
    return std::nullopt;
}

namespace {

JudgeVerdict ask(JudgeKind kind, std::string_view text, TextJudge& judge, bool fail_closed_value) {
    JudgeRequest req{kind, render_prompt(kind, text), std::string(text)};
    JudgeVerdict verdict;
    verdict.raw_reply = judge.complete(req);
    auto parsed = parse_verdict(verdict.raw_reply);
    verdict.parsed = parsed.has_value();
    verdict.value = parsed.value_or(fail_closed_value);
    return verdict;
}

}  // namespace

JudgeVerdict judge_quality(std::string_view text, TextJudge& judge) {
    return ask(JudgeKind::quality, text, judge, false);
}

JudgeVerdict judge_pii(std::string_view text, TextJudge& judge) {
    return ask(JudgeKind::pii, text, judge, true);
}

ScriptedJudge::ScriptedJudge(std::string quality_default, std::string pii_default)
    : quality_default_(std::move(quality_default)), pii_default_(std::move(pii_default)) {}

ScriptedJudge::ScriptedJudge(ScriptedJudge&& other) noexcept
    : quality_default_(std::move(other.quality_default_)),
      pii_default_(std::move(other.pii_default_)),
      rules_(std::move(other.rules_)) {
    std::lock_guard lock(other.mu_);
    requests_ = std::move(other.requests_);
}

ScriptedJudge ScriptedJudge::from_json(const nlohmann::json& j) {
    ScriptedJudge judge;
    for (auto kind : {JudgeKind::quality, JudgeKind::pii}) {
        auto key = std::string(to_string(kind));
        if (!j.contains(key)) continue;
        const auto& section = j.at(key);
        if (section.contains("default")) {
            (kind == JudgeKind::quality ? judge.quality_default_ : judge.pii_default_) =
                section.at("default").get<std::string>();
        }
        for (const auto& r : section.value("rules", nlohmann::json::array())) {
            judge.add_rule({kind, r.value("contains", std::string{}), r.value("reply", std::string{}),
                            r.value("fail", false)});
        }
    }
    return judge;
}

ScriptedJudge& ScriptedJudge::add_rule(Rule rule) {
    rules_.push_back(std::move(rule));
    return *this;
}

std::string ScriptedJudge::complete(const JudgeRequest& request) {
    {
        std::lock_guard lock(mu_);
        requests_.push_back(request);
    }
    for (const auto& rule : rules_) {
        if (rule.kind && *rule.kind != request.kind) continue;
        if (!rule.contains.empty() && request.text.find(rule.contains) == std::string::npos) continue;
        if (rule.fail) throw JudgeUnavailable("scripted judge failure");
        return rule.reply;
    }
    return request.kind == JudgeKind::quality ? quality_default_ : pii_default_;
}

std::vector<JudgeRequest> ScriptedJudge::requests() const {
    std::lock_guard lock(mu_);
    return requests_;
}

void ChatJudgeConfig::apply_env() {
    url = getenv_or("GPX_HARVEST_JUDGE_URL", url);
    model = getenv_or("GPX_HARVEST_JUDGE_MODEL", model);
    api_key = getenv_or("GPX_HARVEST_JUDGE_API_KEY", api_key);
}

ChatCompletionsJudge::ChatCompletionsJudge(ChatJudgeConfig config)
    : config_(std::move(config)), in_flight_(std::max(1, std::min(config_.max_in_flight, 1024))) {
    if (config_.url.empty()) throw std::invalid_argument("judge url is empty");
    if (!config_.audit_log.empty()) {
        audit_out_.open(config_.audit_log, std::ios::app);
        if (!audit_out_) throw std::runtime_error("cannot open judge audit log " + config_.audit_log.string());
    }
}

nlohmann::json ChatCompletionsJudge::build_request_body(const JudgeRequest& request) const {
    return {
        {"model", config_.model},
        {"temperature", 0},
        {"messages", nlohmann::json::array({{{"role", "user"}, {"content", request.prompt}}})},
    };
}

std::string ChatCompletionsJudge::extract_reply(const nlohmann::json& response) {
    const auto& choices = response.at("choices");
    if (!choices.is_array() || choices.empty()) throw std::runtime_error("no choices in judge response");
    const auto& first = choices.at(0);
    if (first.contains("message")) return first.at("message").at("content").get<std::string>();
    return first.at("text").get<std::string>();
}

void ChatCompletionsJudge::audit(const nlohmann::json& entry) {
    if (!audit_out_.is_open()) return;
    std::lock_guard lock(audit_mu_);
    audit_out_ << entry.dump() << '\n';
    audit_out_.flush();
}

std::string ChatCompletionsJudge::complete(const JudgeRequest& request) {
    struct Slot {
        std::counting_semaphore<1024>& sem;
        explicit Slot(std::counting_semaphore<1024>& s) : sem(s) { sem.acquire(); }
        ~Slot() { sem.release(); }
    } slot(in_flight_);

    auto body = build_request_body(request);
    auto redacted = body;
    redacted["messages"][0]["content"] =
        render_prompt(request.kind, "<redacted:" + std::to_string(utf8_length(request.text)) + " chars>");

    http::Request req;
    req.method = "POST";
    req.url = config_.url;
    req.body = body.dump();
    req.timeout = config_.timeout;
    req.headers.emplace_back("Content-Type", "application/json");
    if (!config_.api_key.empty()) req.headers.emplace_back("Authorization", "Bearer " + config_.api_key);

    std::string last_error;
    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
        if (attempt > 0) std::this_thread::sleep_for(config_.backoff_base * (1 << std::min(attempt - 1, 16)));
        try {
            auto resp = http::perform(req);
            audit({{"kind", to_string(request.kind)}, {"request", redacted}, {"status", resp.status},
                   {"response", resp.body}});
            if (resp.status != 200) {
                last_error = "HTTP status " + std::to_string(resp.status);
                continue;
            }
            auto parsed = nlohmann::json::parse(resp.body, nullptr, false);
            if (parsed.is_discarded()) {
                last_error = "judge response is not JSON";
                continue;
            }
            return extract_reply(parsed);
        } catch (const http::TransportError& e) {
            last_error = e.what();
        } catch (const nlohmann::json::exception& e) {
            last_error = e.what();
        } catch (const std::runtime_error& e) {
            last_error = e.what();
        }
    }
    throw JudgeUnavailable("judge unavailable: " + last_error);
}

}  // namespace gpxharvest::desc
