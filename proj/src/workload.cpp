#include "pobs/workload.hpp"

#include <json.hpp>

#include "pobs/error.hpp"
#include "pobs/http.hpp"

namespace pobs::workload {

using nlohmann::json;

namespace {

std::string normalize(std::string_view body) {
    std::string out;
    bool pending_space = false;
    for (char c : body) {
        if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            out += ' ';
            pending_space = false;
        }
        out += c;
    }
    return out;
}

} // namespace

WorkloadSpec parse_workload(std::string_view json_text) {
    WorkloadSpec spec;
    try {
        auto j = json::parse(json_text);
        spec.target_port = j.value("target_port", spec.target_port);
        spec.interval_ms = j.value("interval_ms", spec.interval_ms);
        auto matcher = j.value("matcher", std::string("exact"));
        if (matcher == "exact") {
            spec.matcher = Matcher::Exact;
        } else if (matcher == "normalized") {
            spec.matcher = Matcher::Normalized;
        } else {
            throw Error(ErrorCode::InvalidWorkload, "unknown matcher '" + matcher + "'");
        }
        for (const auto& r : j.at("requests")) {
            Request request;
            request.method = r.value("method", request.method);
            request.path = r.at("path").get<std::string>();
            request.body = r.value("body", std::string{});
            request.content_type = r.value("content_type", request.content_type);
            spec.requests.push_back(std::move(request));
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidWorkload, e.what());
    }
    if (spec.requests.empty()) {
        throw Error(ErrorCode::InvalidWorkload, "workload has no requests");
    }
    if (spec.interval_ms <= 0) {
        throw Error(ErrorCode::InvalidWorkload, "interval_ms must be positive");
    }
    return spec;
}

std::string to_json(const WorkloadSpec& spec) {
    json requests = json::array();
    for (const auto& r : spec.requests) {
        requests.push_back({{"method", r.method}, {"path", r.path}, {"body", r.body}, {"content_type", r.content_type}});
    }
    json j = {{"target_port", spec.target_port},
              {"interval_ms", spec.interval_ms},
              {"matcher", spec.matcher == Matcher::Exact ? "exact" : "normalized"},
              {"requests", requests}};
    return j.dump(2) + "\n";
}

bool responses_match(Matcher matcher, const Response& reference, const Response& actual) {
    if (reference.status != actual.status) {
        return false;
    }
    if (matcher == Matcher::Exact) {
        return reference.body == actual.body;
    }
    return normalize(reference.body) == normalize(actual.body);
}

Response send(const WorkloadSpec& spec, std::size_t slot, const std::string& host, int port) {
    const auto& request = spec.requests.at(slot);
    try {
        auto r = http::request(host, port, request.method, request.path, request.body, request.content_type);
        return {r.status, r.body};
    } catch (const Error& e) {
        if (e.code() != ErrorCode::TransportError) {
            throw;
        }
        return {0, e.what()};
    }
}

std::vector<std::optional<Response>> reference_responses(const std::vector<Exchange>& exchanges, std::size_t slots) {
    std::vector<std::optional<Response>> reference(slots);
    for (const auto& e : exchanges) {
        if (e.request_slot < slots && !reference[e.request_slot]) {
            reference[e.request_slot] = e.response;
        }
    }
    return reference;
}

Correctness judge(Matcher matcher, const std::vector<std::optional<Response>>& reference,
                  const std::vector<Exchange>& exchanges) {
    Correctness c;
    for (const auto& e : exchanges) {
        ++c.total;
        if (e.request_slot < reference.size() && reference[e.request_slot] &&
            responses_match(matcher, *reference[e.request_slot], e.response)) {
            ++c.matching;
        }
    }
    return c;
}

} // namespace pobs::workload
