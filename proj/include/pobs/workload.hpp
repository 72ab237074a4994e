#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace pobs::workload {

struct Request {
    std::string method = "GET";
    std::string path;
    std::string body;
    std::string content_type = "application/json";
};

/// How an injection-phase response is compared with the reference response.
enum class Matcher {
    /// Status and body bytes equal.
    Exact,
    /// Status equal; bodies equal after trimming and collapsing whitespace runs.
    Normalized,
};

/// Requests are issued round-robin every `interval_ms` against `target_port`
/// inside the container.
struct WorkloadSpec {
    std::vector<Request> requests;
    std::int64_t interval_ms = 100;
    Matcher matcher = Matcher::Exact;
    int target_port = 8080;
};

/// {"target_port": 8080, "interval_ms": 100, "matcher": "exact"|"normalized",
///  "requests": [{"method": "GET", "path": "/x", "body": "..."}]}
/// Throws Error(InvalidWorkload).
WorkloadSpec parse_workload(std::string_view json_text);
std::string to_json(const WorkloadSpec& spec);

struct Response {
    /// 0 when the request failed at the transport level.
    int status = 0;
    std::string body;
};

bool responses_match(Matcher matcher, const Response& reference, const Response& actual);

/// One issued request and what came back.
struct Exchange {
    std::size_t index = 0;
    std::size_t request_slot = 0;
    std::int64_t sent_ms = 0;
    std::int64_t latency_ms = 0;
    Response response;
};

/// Sends request slot `slot` of `spec`; transport failures become status 0.
Response send(const WorkloadSpec& spec, std::size_t slot, const std::string& host, int port);

/// Reference response per request slot: the first response recorded for it.
std::vector<std::optional<Response>> reference_responses(const std::vector<Exchange>& exchanges, std::size_t slots);

struct Correctness {
    std::size_t total = 0;
    std::size_t matching = 0;
    double rate() const { return total == 0 ? 0.0 : static_cast<double>(matching) / static_cast<double>(total); }
};

Correctness judge(Matcher matcher, const std::vector<std::optional<Response>>& reference,
                  const std::vector<Exchange>& exchanges);

} // namespace pobs::workload
