#include <httplib.h>

#include <spdlog/spdlog.h>

#include "dloop/api.hpp"

namespace dloop {

struct HttpServer::Impl {
  ApiService* service;
  std::string host;
  int port;
  httplib::Server server;
};

namespace {

void dispatch(ApiService& service, const httplib::Request& req, httplib::Response& res) {
  const auto out = service.handle(ApiRequest{req.method, req.path, req.body});
  res.status = out.status;
  if (!out.body.empty()) res.set_content(out.body, "application/json");
  spdlog::info("{} {} -> {}", req.method, req.path, out.status);
}

}  // namespace

HttpServer::HttpServer(ApiService& service, std::string host, int port)
    : impl_(std::make_unique<Impl>()) {
  impl_->service = &service;
  impl_->host = std::move(host);
  impl_->port = port;
  auto handler = [svc = &service](const httplib::Request& req, httplib::Response& res) {
    dispatch(*svc, req, res);
  };
  impl_->server.Get(".*", handler);
  impl_->server.Post(".*", handler);
  impl_->server.Patch(".*", handler);
  impl_->server.Delete(".*", handler);
  impl_->server.Put(".*", handler);
}

HttpServer::~HttpServer() { stop(); }

bool HttpServer::listen() { return impl_->server.listen(impl_->host, impl_->port); }

int HttpServer::bind_any() { return impl_->server.bind_to_any_port(impl_->host); }

bool HttpServer::listen_after_bind() { return impl_->server.listen_after_bind(); }

void HttpServer::stop() {
  if (impl_->server.is_running()) impl_->server.stop();
}

}  // namespace dloop
