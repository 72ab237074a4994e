#pragma once

#include <string>

namespace pobs::http {

struct Response {
    int status = 0;
    std::string body;
};

/// One blocking request on a fresh connection. Throws Error(TransportError)
/// when no response arrives.
Response request(const std::string& host, int port, const std::string& method, const std::string& path,
                 const std::string& body = {}, const std::string& content_type = "application/json",
                 int timeout_ms = 10000);

} // namespace pobs::http
