#pragma once

#include <cstdint>
#include <string>

#include "pobs/impact.hpp"

namespace pobs::metrics {

struct Endpoint {
    std::string host = "127.0.0.1";
    int port = 4000;
};

/// POSTs {metric, start, end} to the observability query API and returns the
/// series in timestamp order. Throws Error(TransportError), Error(UnknownMetric)
/// or Error(MalformedResponse).
impact::MetricSeries fetch_metrics(const Endpoint& endpoint, const std::string& metric, std::int64_t start_ms,
                                   std::int64_t end_ms);

/// Parses a query response body; exposed for tests.
impact::MetricSeries parse_query_response(const std::string& metric, const std::string& body);

} // namespace pobs::metrics
