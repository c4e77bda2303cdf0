#pragma once

#include "gpxharvest/index_scan.hpp"
#include "gpxharvest/util.hpp"
#include "gpxharvest/warc.hpp"

#include <chrono>
#include <filesystem>
#include <functional>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace gpxharvest::fetch {

inline constexpr const char* kDefaultBaseUrl = "https://data.commoncrawl.org";
inline constexpr const char* kBaseUrlEnv = "GPX_HARVEST_BASE_URL";

struct FetchPolicy {
    int max_retries = 3;
    std::chrono::milliseconds backoff_base{1000};  // doubles per retry
    int max_parallel = 8;
    double rate_limit = 4.0;  // requests per second, shared by all workers
    std::string base_url = kDefaultBaseUrl;

    /// Throws std::invalid_argument when an invariant does not hold.
    void validate() const;

    /// Defaults with base_url taken from GPX_HARVEST_BASE_URL when set.
    static FetchPolicy from_env();
};

struct RangeResponse {
    long status = 0;
    Bytes body;
};

/// Resolves "<base>/<warc_file>" for a byte range. Connection-level
/// failures throw http::TransportError; HTTP errors come back as statuses.
class ByteRangeTransport {
public:
    virtual ~ByteRangeTransport() = default;
    virtual RangeResponse fetch_range(const std::string& warc_file, std::uint64_t offset, std::uint64_t length) = 0;
};

class HttpRangeTransport final : public ByteRangeTransport {
public:
    explicit HttpRangeTransport(std::string base_url);
    RangeResponse fetch_range(const std::string& warc_file, std::uint64_t offset, std::uint64_t length) override;

private:
    std::string base_url_;
};

/// Serves ranges out of "<dir>/<warc_file>" on local disk. Missing files
/// answer 404 and ranges past EOF answer 416, like a real server would.
class FixtureTransport final : public ByteRangeTransport {
public:
    explicit FixtureTransport(std::filesystem::path dir);
    RangeResponse fetch_range(const std::string& warc_file, std::uint64_t offset, std::uint64_t length) override;

private:
    std::filesystem::path dir_;
};

/// Global spacing of request starts at 1/rate seconds.
class RateLimiter {
public:
    explicit RateLimiter(double per_second);
    void acquire();

private:
    using Clock = std::chrono::steady_clock;
    std::mutex mu_;
    Clock::duration interval_;
    Clock::time_point next_{};
};

struct FetchFailure {
    index::CandidateRecord candidate;
    std::string reason;
    long last_status = 0;  // 0 when no HTTP response was received
    int attempts = 0;
};

void to_json(nlohmann::json& j, const FetchFailure& f);

struct FetchOutcome {
    std::optional<warc::WarcSlice> slice;
    std::optional<FetchFailure> failure;
    int attempts = 0;

    bool ok() const { return slice.has_value(); }
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

class Fetcher {
public:
    Fetcher(FetchPolicy policy, ByteRangeTransport& transport, Sleeper sleeper = {});

    FetchOutcome fetch_candidate(const index::CandidateRecord& candidate);

    /// Fetches with up to max_parallel workers; outcomes are in input order.
    std::vector<FetchOutcome> fetch_all(std::span<const index::CandidateRecord> candidates);

    const FetchPolicy& policy() const { return policy_; }

private:
    FetchPolicy policy_;
    ByteRangeTransport& transport_;
    Sleeper sleeper_;
    RateLimiter limiter_;
};

FetchOutcome fetch_candidate(const index::CandidateRecord& candidate, const FetchPolicy& policy,
                             ByteRangeTransport& transport);

/// 408, 425, 429 and 5xx are worth retrying; other statuses are final.
bool is_retryable_status(long status);

}  // namespace gpxharvest::fetch
