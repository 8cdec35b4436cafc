#include "steerlens/http_server.hpp"

#include <httplib.h>

namespace steerlens {

struct HttpServer::Impl {
    Api& api;
    httplib::Server server;

    explicit Impl(Api& a) : api(a) {
        auto forward = [this](const httplib::Request& req, httplib::Response& res) {
            ApiRequest request;
            request.method = req.method;
            request.path = req.path;
            for (const auto& [key, value] : req.params) {
                request.query.emplace(key, value);
            }
            request.body = req.body;
            auto response = api.handle(request);
            res.status = response.status;
            res.set_content(std::move(response.body), response.content_type);
        };
        server.Get(".*", forward);
        server.Post(".*", forward);
        server.Put(".*", forward);
    }
};

HttpServer::HttpServer(Api& api) : impl_(std::make_unique<Impl>(api)) {}

HttpServer::~HttpServer() {
    stop();
}

int HttpServer::bind(const std::string& host, int port) {
    if (port == 0) {
        return impl_->server.bind_to_any_port(host);
    }
    return impl_->server.bind_to_port(host, port) ? port : -1;
}

bool HttpServer::listen_after_bind() {
    return impl_->server.listen_after_bind();
}

void HttpServer::stop() {
    if (impl_ && impl_->server.is_running()) {
        impl_->server.stop();
    }
}

bool HttpServer::is_running() const {
    return impl_->server.is_running();
}

void HttpServer::wait_until_ready() const {
    impl_->server.wait_until_ready();
}

} // namespace steerlens
