#include "safeqa/service.hpp"

#include <chrono>

#include <httplib.h>

#include "safeqa/errors.hpp"

namespace safeqa::service {

using nlohmann::json;

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kParse: return 400;
    case ErrorCode::kNotFound: return 404;
    case ErrorCode::kConflict:
    case ErrorCode::kDuplicate: return 409;
    case ErrorCode::kRailRejected:
    case ErrorCode::kPrecondition: return 422;
    case ErrorCode::kNotInitialized:
    case ErrorCode::kProviderUnavailable: return 503;
    case ErrorCode::kProviderRejected: return 502;
    default: return 500;
  }
}

namespace {

enum class Tier { kUser, kModerator };

struct HttpError {
  int status;
  std::string code;
  std::string message;
};

std::string error_code_name(int status) {
  switch (status) {
    case 400: return "bad_request";
    case 401: return "unauthorized";
    case 404: return "not_found";
    case 409: return "conflict";
    case 422: return "unprocessable";
    case 502: return "provider_rejected";
    case 503: return "unavailable";
    default: return "internal";
  }
}

void write_error(httplib::Response& res, int status, const std::string& code,
                 const std::string& message, const std::string& trace_id) {
  res.status = status;
  res.set_content(json{{"code", code}, {"message", message}, {"trace_id", trace_id}}.dump(),
                  "application/json");
}

json parse_body(const httplib::Request& req) {
  try {
    json body = json::parse(req.body);
    if (!body.is_object()) throw HttpError{400, "bad_request", "body must be a JSON object"};
    return body;
  } catch (const json::exception&) {
    throw HttpError{400, "bad_request", "malformed JSON body"};
  }
}

std::optional<std::string> optional_string(const json& body, const char* key) {
  if (!body.contains(key) || body[key].is_null()) return std::nullopt;
  if (!body[key].is_string()) {
    throw HttpError{400, "bad_request", std::string(key) + " must be a string"};
  }
  return body[key].get<std::string>();
}

std::string required_string(const json& body, const char* key) {
  auto v = optional_string(body, key);
  if (!v) throw HttpError{400, "bad_request", std::string("missing field: ") + key};
  return *v;
}

}  // namespace

HttpService::HttpService(config::ServiceConfig config)
    : config_(std::move(config)), server_(std::make_unique<httplib::Server>()) {
  const std::size_t threads = config_.http_threads;
  server_->new_task_queue = [threads] { return new httplib::ThreadPool(threads); };
  routes();
}

HttpService::~HttpService() { stop(); }

int HttpService::start(const std::string& host, int port) {
  int bound = port;
  if (port == 0) {
    bound = server_->bind_to_any_port(host);
  } else if (!server_->bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound < 0) throw Error(ErrorCode::kIo, "cannot bind " + host + ":" + std::to_string(port));
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return bound;
}

void HttpService::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

void HttpService::routes() {
  using Handler = std::function<void(const httplib::Request&, httplib::Response&, System&,
                                     const std::string& trace_id)>;

  // Wraps a handler with trace id, auth, readiness and error mapping.
  auto wrap = [this](std::optional<Tier> tier, Handler handler) {
    return [this, tier, handler](const httplib::Request& req, httplib::Response& res) {
      const auto started = std::chrono::steady_clock::now();
      const std::uint64_t n = ++request_counter_;
      const std::string trace_id = to_hex(fnv1a64(
          std::to_string(n) + ":" +
          std::to_string(std::chrono::system_clock::now().time_since_epoch().count())));
      res.set_header("X-Trace-Id", trace_id);
      System* system = system_.load();
      try {
        if (tier && config_.auth_enabled()) {
          const std::string auth = req.get_header_value("Authorization");
          const std::string prefix = "Bearer ";
          const std::string token =
              auth.rfind(prefix, 0) == 0 ? auth.substr(prefix.size()) : std::string();
          const bool moderator = !config_.moderator_token.empty() && token == config_.moderator_token;
          const bool user = !config_.user_token.empty() && token == config_.user_token;
          const bool ok = *tier == Tier::kModerator ? moderator : (moderator || user);
          if (!ok) throw HttpError{401, "unauthorized", "missing or invalid bearer token"};
        }
        if (system == nullptr) throw HttpError{503, "unavailable", "engine not initialized"};
        handler(req, res, *system, trace_id);
      } catch (const HttpError& e) {
        write_error(res, e.status, e.code, e.message, trace_id);
      } catch (const Error& e) {
        const int status = http_status(e.code());
        write_error(res, status, std::string(to_string(e.code())), e.what(), trace_id);
      } catch (const std::exception& e) {
        write_error(res, 500, "internal", e.what(), trace_id);
      }
      if (system != nullptr) {
        const auto ms = std::chrono::duration<double, std::milli>(
                            std::chrono::steady_clock::now() - started)
                            .count();
        system->logger()->info("http {} {} status={} trace_id={} ms={:.2f}", req.method,
                               req.path, res.status, trace_id, ms);
      }
    };
  };

  server_->Post("/v1/ask", wrap(Tier::kUser, [](const httplib::Request& req,
                                                 httplib::Response& res, System& system,
                                                 const std::string&) {
    const json body = parse_body(req);
    pipeline::AskRequest ask;
    ask.query_text = optional_string(body, "text");
    const auto audio_uri = optional_string(body, "audio_uri");
    if (ask.query_text.has_value() == audio_uri.has_value()) {
      throw HttpError{400, "bad_request", "exactly one of text and audio_uri is required"};
    }
    if (audio_uri) ask.audio = lang::AudioRef{*audio_uri};
    if (auto lang_tag = optional_string(body, "lang")) {
      ask.language = *lang_tag;
      const auto& def = system.engine().config().default_route;
      ask.route = def.mode == lang::RouteMode::kDirect
                      ? lang::LanguageRoute::direct(*lang_tag)
                      : lang::LanguageRoute::translate(*lang_tag, def.pipeline_lang);
    }
    if (auto session = optional_string(body, "session_id")) ask.session_id = *session;
    const auto envelope = system.engine().answer(ask);
    res.status = 200;
    res.set_content(envelope.to_json().dump(), "application/json");
  }));

  server_->Get("/v1/moderation/queue", wrap(Tier::kModerator, [](const httplib::Request& req,
                                                                 httplib::Response& res,
                                                                 System& system,
                                                                 const std::string&) {
    std::optional<moderation::ItemStatus> status = moderation::ItemStatus::kOpen;
    if (req.has_param("status")) {
      const std::string s = req.get_param_value("status");
      if (s == "all") {
        status.reset();
      } else {
        try {
          status = moderation::parse_item_status(s);
        } catch (const Error&) {
          throw HttpError{400, "bad_request", "unknown status " + s};
        }
      }
    }
    std::optional<std::string> cursor;
    if (req.has_param("cursor")) cursor = req.get_param_value("cursor");
    std::size_t limit = 50;
    if (req.has_param("limit")) {
      try {
        limit = std::stoul(req.get_param_value("limit"));
      } catch (const std::exception&) {
        throw HttpError{400, "bad_request", "limit must be a positive integer"};
      }
      if (limit == 0) throw HttpError{400, "bad_request", "limit must be a positive integer"};
    }
    const auto page = system.queue().list(status, cursor, limit);
    json items = json::array();
    for (const auto& item : page.items) items.push_back(item.to_json());
    if (page.next_cursor) res.set_header("X-Next-Cursor", *page.next_cursor);
    res.status = 200;
    res.set_content(items.dump(), "application/json");
  }));

  server_->Post(R"(/v1/moderation/([^/]+)/resolve)",
                wrap(Tier::kModerator, [](const httplib::Request& req, httplib::Response& res,
                                          System& system, const std::string&) {
                  const json body = parse_body(req);
                  const std::string id = req.matches[1];
                  const auto result = system.engine().resolve_moderation(
                      id, required_string(body, "answer"),
                      optional_string(body, "theme").value_or(""),
                      optional_string(body, "sub_theme").value_or(""));
                  res.status = 200;
                  res.set_content(json{{"record_id", result.record.id},
                                       {"corpus_version", result.corpus_version},
                                       {"index_version", result.index_version}}
                                      .dump(),
                                  "application/json");
                }));

  server_->Post("/v1/corpus/import",
                wrap(Tier::kModerator, [](const httplib::Request& req, httplib::Response& res,
                                          System& system, const std::string&) {
                  const auto report = system.store().ingest_text(req.body);
                  res.status = 200;
                  res.set_content(report.to_json().dump(), "application/json");
                }));

  server_->Get("/v1/health", [this](const httplib::Request&, httplib::Response& res) {
    System* system = system_.load();
    json body = {{"status", system != nullptr ? "ok" : "initializing"},
                 {"corpus_version", system != nullptr ? system->store().version() : 0},
                 {"index_version", system != nullptr ? system->retriever().version() : 0}};
    res.status = system != nullptr ? 200 : 503;
    res.set_content(body.dump(), "application/json");
  });

  server_->Get("/v1/metrics", wrap(std::nullopt, [](const httplib::Request&,
                                                    httplib::Response& res, System& system,
                                                    const std::string&) {
    res.status = 200;
    res.set_content(system.metrics().render(), "text/plain");
  }));

  // Unknown routes and anything that left an empty error body.
  server_->set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (!res.body.empty()) return;
    write_error(res, res.status, error_code_name(res.status),
                res.status == 404 ? "no such endpoint" : "request failed", "");
  });
  server_->set_exception_handler(
      [](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
        std::string message = "internal error";
        try {
          if (ep) std::rethrow_exception(ep);
        } catch (const std::exception& e) {
          message = e.what();
        } catch (...) {
        }
        write_error(res, 500, "internal", message, "");
      });
}

}  // namespace safeqa::service
