#pragma once

#include "steerlens/api.hpp"

#include <memory>
#include <string>

namespace steerlens {

/// Serves an Api over HTTP. All routing lives in Api::handle; this class
/// only translates between cpp-httplib and ApiRequest/ApiResponse.
class HttpServer {
public:
    explicit HttpServer(Api& api);
    ~HttpServer();

    HttpServer(const HttpServer&) = delete;
    HttpServer& operator=(const HttpServer&) = delete;

    /// Binds to `port` (0 picks a free one) and returns the bound port, or -1.
    int bind(const std::string& host, int port);
    /// Blocks serving requests until stop() is called.
    bool listen_after_bind();
    void stop();
    bool is_running() const;
    void wait_until_ready() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace steerlens
