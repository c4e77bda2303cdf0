#include "gpxharvest/fetch.hpp"

#include "gpxharvest/http.hpp"
#include "gpxharvest/parallel.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>
#include <thread>

namespace gpxharvest::fetch {

void FetchPolicy::validate() const {
    if (max_parallel < 1) throw std::invalid_argument("fetch.max_parallel must be >= 1");
    if (!(rate_limit > 0.0)) throw std::invalid_argument("fetch.rate_limit must be > 0");
    if (max_retries < 0) throw std::invalid_argument("fetch.max_retries must be >= 0");
    if (backoff_base.count() < 0) throw std::invalid_argument("fetch.backoff_base must be >= 0");
    if (base_url.empty()) throw std::invalid_argument("fetch.base_url is empty");
}

FetchPolicy FetchPolicy::from_env() {
    FetchPolicy p;
    p.base_url = getenv_or(kBaseUrlEnv, kDefaultBaseUrl);
    return p;
}

HttpRangeTransport::HttpRangeTransport(std::string base_url) : base_url_(std::move(base_url)) {
    while (!base_url_.empty() && base_url_.back() == '/') base_url_.pop_back();
}

RangeResponse HttpRangeTransport::fetch_range(const std::string& warc_file, std::uint64_t offset,
                                              std::uint64_t length) {
    http::Request req;
    req.url = base_url_ + "/" + warc_file;
    req.headers.emplace_back("Range", warc::build_range_header(offset, length));
    auto resp = http::perform(req);
    return {resp.status, to_bytes(resp.body)};
}

FixtureTransport::FixtureTransport(std::filesystem::path dir) : dir_(std::move(dir)) {}

RangeResponse FixtureTransport::fetch_range(const std::string& warc_file, std::uint64_t offset,
                                            std::uint64_t length) {
    auto path = dir_ / warc_file;
    std::ifstream in(path, std::ios::binary);
    if (!in) return {404, {}};
    in.seekg(0, std::ios::end);
    auto size = static_cast<std::uint64_t>(in.tellg());
    if (offset >= size) return {416, {}};
    auto n = std::min<std::uint64_t>(length, size - offset);
    Bytes body(n);
    in.seekg(static_cast<std::streamoff>(offset));
    in.read(reinterpret_cast<char*>(body.data()), static_cast<std::streamsize>(n));
    return {206, std::move(body)};
}

RateLimiter::RateLimiter(double per_second)
    : interval_(std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(1.0 / per_second))) {
    if (!(per_second > 0.0)) throw std::invalid_argument("rate limit must be > 0");
}

void RateLimiter::acquire() {
    Clock::time_point slot;
    {
        std::lock_guard lock(mu_);
        auto now = Clock::now();
        slot = std::max(now, next_);
        next_ = slot + interval_;
    }
    std::this_thread::sleep_until(slot);
}

void to_json(nlohmann::json& j, const FetchFailure& f) {
    j = nlohmann::json{
        {"candidate", f.candidate},
        {"reason", f.reason},
        {"last_status", f.last_status},
        {"attempts", f.attempts},
    };
}

bool is_retryable_status(long status) {
    return status == 408 || status == 425 || status == 429 || (status >= 500 && status <= 599);
}

Fetcher::Fetcher(FetchPolicy policy, ByteRangeTransport& transport, Sleeper sleeper)
    : policy_(std::move(policy)),
      transport_(transport),
      sleeper_(sleeper ? std::move(sleeper) : Sleeper([](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); })),
      limiter_((policy_.validate(), policy_.rate_limit)) {}

FetchOutcome Fetcher::fetch_candidate(const index::CandidateRecord& candidate) {
    FetchOutcome outcome;
    FetchFailure failure{candidate, {}, 0, 0};
    const int max_attempts = policy_.max_retries + 1;

    for (int attempt = 1; attempt <= max_attempts; ++attempt) {
        if (attempt > 1) {
            auto factor = static_cast<std::int64_t>(1) << std::min(attempt - 2, 20);
            sleeper_(policy_.backoff_base * factor);
        }
        outcome.attempts = attempt;
        limiter_.acquire();

        bool retry = false;
        try {
            auto resp = transport_.fetch_range(candidate.warc_file, candidate.warc_offset, candidate.warc_len);
            failure.last_status = resp.status;
            if (resp.status == 206 || resp.status == 200) {
                Bytes record;
                if (resp.body.size() == candidate.warc_len) {
                    record = std::move(resp.body);
                } else if (resp.status == 200 && resp.body.size() >= candidate.warc_offset + candidate.warc_len) {
                    // Server ignored the Range header and sent the whole file.
                    auto first = resp.body.begin() + static_cast<std::ptrdiff_t>(candidate.warc_offset);
                    record.assign(first, first + static_cast<std::ptrdiff_t>(candidate.warc_len));
                } else {
                    failure.reason = "short read: got " + std::to_string(resp.body.size()) + " of " +
                                     std::to_string(candidate.warc_len) + " bytes";
                    retry = true;
                }
                if (!record.empty()) {
                    outcome.slice = warc::WarcSlice{std::move(record), candidate};
                    return outcome;
                }
            } else {
                failure.reason = "HTTP status " + std::to_string(resp.status);
                retry = is_retryable_status(resp.status);
            }
        } catch (const http::TransportError& e) {
            failure.reason = std::string("transport: ") + e.what();
            failure.last_status = 0;
            retry = true;
        }
        if (!retry) break;
    }
    failure.attempts = outcome.attempts;
    outcome.failure = std::move(failure);
    return outcome;
}

std::vector<FetchOutcome> Fetcher::fetch_all(std::span<const index::CandidateRecord> candidates) {
    std::vector<FetchOutcome> outcomes(candidates.size());
    parallel_for(candidates.size(), static_cast<std::size_t>(policy_.max_parallel),
                 [&](std::size_t i) { outcomes[i] = fetch_candidate(candidates[i]); });
    return outcomes;
}

FetchOutcome fetch_candidate(const index::CandidateRecord& candidate, const FetchPolicy& policy,
                             ByteRangeTransport& transport) {
    Fetcher fetcher(policy, transport);
    return fetcher.fetch_candidate(candidate);
}

}  // namespace gpxharvest::fetch
