#include "pobs/http.hpp"

#include <httplib.h>

#include "pobs/error.hpp"

namespace pobs::http {

Response request(const std::string& host, int port, const std::string& method, const std::string& path,
                 const std::string& body, const std::string& content_type, int timeout_ms) {
    httplib::Client client(host, port);
    const auto sec = timeout_ms / 1000;
    const auto usec = (timeout_ms % 1000) * 1000;
    client.set_connection_timeout(sec, usec);
    client.set_read_timeout(sec, usec);
    client.set_write_timeout(sec, usec);

    httplib::Result result;
    if (method == "GET") {
        result = client.Get(path);
    } else if (method == "POST") {
        result = client.Post(path, body, content_type);
    } else if (method == "PUT") {
        result = client.Put(path, body, content_type);
    } else if (method == "DELETE") {
        result = client.Delete(path, body, content_type);
    } else {
        throw Error(ErrorCode::InvalidArgument, "unsupported HTTP method " + method);
    }
    if (!result) {
        throw Error(ErrorCode::TransportError, method + " " + host + ":" + std::to_string(port) + path + ": " +
                                                   httplib::to_string(result.error()));
    }
    return {result->status, result->body};
}

} // namespace pobs::http
