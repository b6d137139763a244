#pragma once

// Live HTTP transport backed by cpp-httplib. Kept out of resolve.hpp so the
// resolver and its tests never touch sockets; only the CLI includes this.

#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include <httplib.h>

#include <stdexcept>
#include <string>

#include "resolve.hpp"

namespace citeaudit::resolve {

class HttplibTransport : public Transport {
  public:
    HttpResponse get(const HttpRequest& request) override {
        auto scheme_end = request.url.find("://");
        if (scheme_end == std::string::npos)
            throw TransportError("unsupported url: " + request.url);
        auto path_start = request.url.find('/', scheme_end + 3);
        std::string origin = path_start == std::string::npos
                                 ? request.url
                                 : request.url.substr(0, path_start);
        std::string path =
            path_start == std::string::npos ? "/" : request.url.substr(path_start);

        httplib::Client client(origin);
        client.set_follow_location(true);
        client.set_connection_timeout(10);
        client.set_read_timeout(30);

        httplib::Headers headers;
        for (const auto& [k, v] : request.headers) headers.emplace(k, v);

        auto result = client.Get(path, headers);
        if (!result)
            throw TransportError("request to " + origin + " failed: " +
                                 httplib::to_string(result.error()));

        HttpResponse resp;
        resp.status = result->status;
        resp.body = result->body;
        for (const auto& [k, v] : result->headers) resp.headers[k] = v;
        return resp;
    }
};

} // namespace citeaudit::resolve
