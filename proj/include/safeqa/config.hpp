#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

namespace safeqa::config {

/// kind: "mock", "http" or "none" (provider absent).
struct ProviderEndpoint {
  std::string kind = "mock";
  std::string url;
  std::string model;
  std::string token;
  int timeout_ms = 10000;
  std::string fixtures;  // mock ASR only: JSON map uri -> transcript
};

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;

  std::string store_dir;   // empty: in-memory corpus
  std::string seed_jsonl;  // imported at startup when the store is empty
  std::size_t snapshot_every = 500;
  std::string moderation_log;  // empty: <store_dir>/moderation.jsonl or in-memory

  std::string pii_rules;  // empty: built-in defaults
  std::string rails;      // empty: built-in defaults

  ProviderEndpoint embedding;
  ProviderEndpoint llm;
  ProviderEndpoint asr;
  ProviderEndpoint mt;
  ProviderEndpoint tts;
  ProviderEndpoint judge;

  double tau = 0.5;
  double topic_min_score = 0.05;
  double grounding_min_recall = 0.3;

  std::string route_mode = "direct";
  std::string source_lang = "hi";
  std::string pipeline_lang = "hi";

  std::string user_token;
  std::string moderator_token;

  std::size_t llm_permits = 8;
  std::size_t http_threads = 8;
  std::size_t eval_parallelism = 4;

  std::string log_level = "info";
  std::string log_file;

  bool auth_enabled() const { return !user_token.empty() || !moderator_token.empty(); }

  nlohmann::json to_json() const;
  static ServiceConfig from_json(const nlohmann::json& j);

  /// Throws kInvalidArgument naming the first bad field.
  void validate() const;
};

using EnvLookup = std::function<std::optional<std::string>(const std::string& name)>;

/// Reads the process environment.
EnvLookup process_env();

/// Precedence: environment > file > defaults. The file may be partial.
/// Relative paths inside the file resolve against the file's directory.
ServiceConfig load(const std::optional<std::string>& path, const EnvLookup& env = process_env());

/// (variable, JSON pointer) pairs recognised as overrides.
const std::vector<std::pair<std::string, std::string>>& env_overrides();

}  // namespace safeqa::config
