#pragma once

#include <atomic>
#include <memory>
#include <string>
#include <thread>

#include "safeqa/system.hpp"

namespace httplib {
class Server;
}

namespace safeqa::service {

using app::System;

/// HTTP status for an error code.
int http_status(ErrorCode code);

/// JSON HTTP facade over a System. Until a system is attached every
/// endpoint except /v1/health answers 503.
class HttpService {
 public:
  explicit HttpService(config::ServiceConfig config);
  ~HttpService();

  HttpService(const HttpService&) = delete;
  HttpService& operator=(const HttpService&) = delete;

  void attach(System* system) { system_.store(system); }

  /// Binds and serves on a background thread. Port 0 picks a free port.
  /// Returns the bound port.
  int start(const std::string& host, int port);

  /// Stops accepting, lets in-flight requests finish, joins the thread.
  void stop();

 private:
  void routes();

  config::ServiceConfig config_;
  std::atomic<System*> system_{nullptr};
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  std::atomic<std::uint64_t> request_counter_{0};
};

}  // namespace safeqa::service
