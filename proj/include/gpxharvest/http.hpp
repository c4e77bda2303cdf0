#pragma once

#include <chrono>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace gpxharvest::http {

struct Response {
    long status = 0;
    std::string body;
};

/// Connection-level failure (DNS, refused, timeout); no HTTP status exists.
class TransportError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Request {
    std::string method = "GET";
    std::string url;
    std::vector<std::pair<std::string, std::string>> headers;
    std::string body;
    std::chrono::milliseconds timeout{60'000};
};

/// Blocking libcurl request. Throws TransportError when GPX_HARVEST_OFFLINE
/// is set, so test runs can never reach the network.
Response perform(const Request& request);

}  // namespace gpxharvest::http
