#include "safeqa/providers.hpp"

#include <cmath>

#include <httplib.h>

#include "safeqa/text.hpp"
#include "safeqa/util.hpp"

namespace safeqa::providers {

using nlohmann::json;

HttpJsonClient::HttpJsonClient(std::string base_url, std::chrono::milliseconds timeout,
                               std::optional<std::string> bearer_token)
    : base_url_(std::move(base_url)),
      timeout_(timeout),
      bearer_token_(std::move(bearer_token)) {
  const auto scheme_end = base_url_.find("://");
  const auto host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
  const auto path_start = base_url_.find('/', host_start);
  if (path_start == std::string::npos) {
    scheme_host_port_ = base_url_;
  } else {
    scheme_host_port_ = base_url_.substr(0, path_start);
    path_prefix_ = base_url_.substr(path_start);
    while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
  }
}

json HttpJsonClient::post(const std::string& path, const json& body) const {
  httplib::Client client(scheme_host_port_);
  const auto secs = timeout_.count() / 1000;
  const auto usecs = (timeout_.count() % 1000) * 1000;
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);
  httplib::Headers headers;
  if (bearer_token_) headers.emplace("Authorization", "Bearer " + *bearer_token_);

  std::string target = path_prefix_ + path;
  if (target.empty()) target = "/";
  auto res = client.Post(target, headers, body.dump(), "application/json");
  if (!res) {
    throw ProviderError("transport error: " + httplib::to_string(res.error()), true);
  }
  if (res->status >= 500) {
    throw ProviderError("upstream status " + std::to_string(res->status), true);
  }
  if (res->status >= 400) {
    throw ProviderError("upstream status " + std::to_string(res->status), false);
  }
  try {
    return json::parse(res->body);
  } catch (const json::exception&) {
    throw ProviderError("undecodable provider response", false);
  }
}

std::vector<double> normalized(std::vector<double> v) {
  double sum = 0.0;
  for (double x : v) sum += x * x;
  if (sum <= 0.0) return v;
  const double inv = 1.0 / std::sqrt(sum);
  for (double& x : v) x *= inv;
  return v;
}

std::size_t MockEmbeddingProvider::bucket(const std::string& token) const {
  return static_cast<std::size_t>(fnv1a64(token) % dimension_);
}

std::vector<std::vector<double>> MockEmbeddingProvider::embed(
    const std::vector<std::string>& texts) {
  std::vector<std::vector<double>> out;
  out.reserve(texts.size());
  for (const auto& t : texts) {
    std::vector<double> v(dimension_, 0.0);
    auto tokens = text::tokenize(t, stopwords_).tokens;
    // A text made only of stopwords still gets a direction.
    if (tokens.empty()) tokens = text::tokenize(t).tokens;
    for (const auto& token : tokens) v[bucket(token)] += 1.0;
    out.push_back(normalized(std::move(v)));
  }
  return out;
}

HttpEmbeddingProvider::HttpEmbeddingProvider(HttpJsonClient client, std::size_t dimension,
                                             RetryPolicy retry, std::ptrdiff_t permits)
    : client_(std::move(client)),
      dimension_(dimension),
      retry_(std::move(retry)),
      permits_(permits) {}

std::vector<std::vector<double>> HttpEmbeddingProvider::embed(
    const std::vector<std::string>& texts) {
  auto guard = permits_.acquire();
  json response = with_retry(retry_, [&] { return client_.post("", {{"texts", texts}}); });
  std::vector<std::vector<double>> out;
  try {
    for (const auto& row : response.at("vectors")) {
      auto v = row.get<std::vector<double>>();
      if (v.size() != dimension_) throw ProviderError("embedding dimension mismatch", false);
      out.push_back(normalized(std::move(v)));
    }
  } catch (const json::exception&) {
    throw ProviderError("malformed embedding response", false);
  }
  if (out.size() != texts.size()) throw ProviderError("embedding count mismatch", false);
  return out;
}

}  // namespace safeqa::providers
