#include "pobs/metrics_client.hpp"

#include <algorithm>

#include <json.hpp>

#include "pobs/error.hpp"
#include "pobs/http.hpp"

namespace pobs::metrics {

using nlohmann::json;

impact::MetricSeries parse_query_response(const std::string& metric, const std::string& body) {
    impact::MetricSeries series;
    series.metric_name = metric;
    try {
        auto j = json::parse(body);
        if (j.contains("metric") && j["metric"].get<std::string>() != metric) {
            throw Error(ErrorCode::MalformedResponse, "response is for metric " + j["metric"].get<std::string>());
        }
        for (const auto& pair : j.at("samples")) {
            if (!pair.is_array() || pair.size() != 2 || !pair[0].is_number_integer() || !pair[1].is_number()) {
                throw Error(ErrorCode::MalformedResponse, "sample is not a [timestamp, value] pair");
            }
            series.samples.push_back({pair[0].get<std::int64_t>(), pair[1].get<double>()});
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::MalformedResponse, e.what());
    }
    std::stable_sort(series.samples.begin(), series.samples.end(),
                     [](const auto& a, const auto& b) { return a.timestamp_ms < b.timestamp_ms; });
    return series;
}

impact::MetricSeries fetch_metrics(const Endpoint& endpoint, const std::string& metric, std::int64_t start_ms,
                                   std::int64_t end_ms) {
    const json request = {{"metric", metric}, {"start", start_ms}, {"end", end_ms}};
    auto response = http::request(endpoint.host, endpoint.port, "POST", "/metrics/query", request.dump());
    if (response.status == 404) {
        throw Error(ErrorCode::UnknownMetric, "unknown metric '" + metric + "'");
    }
    if (response.status != 200) {
        throw Error(ErrorCode::TransportError, "metrics query returned HTTP " + std::to_string(response.status));
    }
    return parse_query_response(metric, response.body);
}

} // namespace pobs::metrics
