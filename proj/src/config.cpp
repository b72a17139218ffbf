#include "safeqa/config.hpp"

#include <cstdlib>
#include <filesystem>

#include "safeqa/errors.hpp"
#include "safeqa/langbridge.hpp"
#include "safeqa/util.hpp"

namespace safeqa::config {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json endpoint_json(const ProviderEndpoint& e) {
  return {{"kind", e.kind},   {"url", e.url},           {"model", e.model},
          {"token", e.token}, {"timeout_ms", e.timeout_ms}, {"fixtures", e.fixtures}};
}

ProviderEndpoint endpoint_from(const json& j) {
  ProviderEndpoint e;
  e.kind = j.value("kind", e.kind);
  e.url = j.value("url", e.url);
  e.model = j.value("model", e.model);
  e.token = j.value("token", e.token);
  e.timeout_ms = j.value("timeout_ms", e.timeout_ms);
  e.fixtures = j.value("fixtures", e.fixtures);
  return e;
}

void require_unit(const char* name, double v) {
  if (!(v >= 0.0 && v <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, std::string(name) + " must be in [0,1]");
  }
}

void require_file(const char* name, const std::string& path) {
  if (!path.empty() && !fs::is_regular_file(path)) {
    throw Error(ErrorCode::kInvalidArgument, std::string(name) + ": no such file: " + path);
  }
}

void require_endpoint(const char* name, const ProviderEndpoint& e) {
  if (e.kind != "mock" && e.kind != "http" && e.kind != "none") {
    throw Error(ErrorCode::kInvalidArgument, std::string(name) + ": unknown provider kind " + e.kind);
  }
  if (e.kind == "http" && e.url.empty()) {
    throw Error(ErrorCode::kInvalidArgument, std::string(name) + ": http provider needs a url");
  }
  if (e.timeout_ms <= 0) {
    throw Error(ErrorCode::kInvalidArgument, std::string(name) + ": timeout_ms must be > 0");
  }
  require_file(name, e.fixtures);
}

// Paths that are resolved relative to the config file.
const char* const kPathPointers[] = {
    "/corpus/store_dir", "/corpus/seed_jsonl", "/moderation/log_file", "/rules/pii",
    "/rules/rails",      "/providers/asr/fixtures", "/logging/file",
};

}  // namespace

json ServiceConfig::to_json() const {
  return {
      {"listen", {{"host", host}, {"port", port}}},
      {"corpus",
       {{"store_dir", store_dir}, {"seed_jsonl", seed_jsonl}, {"snapshot_every", snapshot_every}}},
      {"moderation", {{"log_file", moderation_log}}},
      {"rules", {{"pii", pii_rules}, {"rails", rails}}},
      {"providers",
       {{"embedding", endpoint_json(embedding)},
        {"llm", endpoint_json(llm)},
        {"asr", endpoint_json(asr)},
        {"mt", endpoint_json(mt)},
        {"tts", endpoint_json(tts)},
        {"judge", endpoint_json(judge)}}},
      {"thresholds",
       {{"tau", tau},
        {"topic_min_score", topic_min_score},
        {"grounding_min_recall", grounding_min_recall}}},
      {"route", {{"mode", route_mode}, {"source_lang", source_lang}, {"pipeline_lang", pipeline_lang}}},
      {"auth", {{"user_token", user_token}, {"moderator_token", moderator_token}}},
      {"limits",
       {{"llm_permits", llm_permits},
        {"http_threads", http_threads},
        {"eval_parallelism", eval_parallelism}}},
      {"logging", {{"level", log_level}, {"file", log_file}}},
  };
}

ServiceConfig ServiceConfig::from_json(const json& j) {
  ServiceConfig c;
  try {
    const json full = [&] {
      json base = ServiceConfig{}.to_json();
      base.merge_patch(j);
      return base;
    }();
    c.host = full.at("/listen/host"_json_pointer);
    c.port = full.at("/listen/port"_json_pointer);
    c.store_dir = full.at("/corpus/store_dir"_json_pointer);
    c.seed_jsonl = full.at("/corpus/seed_jsonl"_json_pointer);
    c.snapshot_every = full.at("/corpus/snapshot_every"_json_pointer);
    c.moderation_log = full.at("/moderation/log_file"_json_pointer);
    c.pii_rules = full.at("/rules/pii"_json_pointer);
    c.rails = full.at("/rules/rails"_json_pointer);
    const json& p = full.at("providers");
    c.embedding = endpoint_from(p.at("embedding"));
    c.llm = endpoint_from(p.at("llm"));
    c.asr = endpoint_from(p.at("asr"));
    c.mt = endpoint_from(p.at("mt"));
    c.tts = endpoint_from(p.at("tts"));
    c.judge = endpoint_from(p.at("judge"));
    c.tau = full.at("/thresholds/tau"_json_pointer);
    c.topic_min_score = full.at("/thresholds/topic_min_score"_json_pointer);
    c.grounding_min_recall = full.at("/thresholds/grounding_min_recall"_json_pointer);
    c.route_mode = full.at("/route/mode"_json_pointer);
    c.source_lang = full.at("/route/source_lang"_json_pointer);
    c.pipeline_lang = full.at("/route/pipeline_lang"_json_pointer);
    c.user_token = full.at("/auth/user_token"_json_pointer);
    c.moderator_token = full.at("/auth/moderator_token"_json_pointer);
    c.llm_permits = full.at("/limits/llm_permits"_json_pointer);
    c.http_threads = full.at("/limits/http_threads"_json_pointer);
    c.eval_parallelism = full.at("/limits/eval_parallelism"_json_pointer);
    c.log_level = full.at("/logging/level"_json_pointer);
    c.log_file = full.at("/logging/file"_json_pointer);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("bad config: ") + e.what());
  }
  return c;
}

void ServiceConfig::validate() const {
  if (port < 0 || port > 65535) throw Error(ErrorCode::kInvalidArgument, "port out of range");
  require_unit("tau", tau);
  require_unit("topic_min_score", topic_min_score);
  require_unit("grounding_min_recall", grounding_min_recall);
  require_file("seed_jsonl", seed_jsonl);
  require_file("pii_rules", pii_rules);
  require_file("rails", rails);
  if (!store_dir.empty()) {
    const fs::path parent = fs::absolute(store_dir).parent_path();
    if (!fs::is_directory(store_dir) && !fs::is_directory(parent)) {
      throw Error(ErrorCode::kInvalidArgument, "store_dir: parent does not exist: " + store_dir);
    }
  }
  require_endpoint("embedding", embedding);
  require_endpoint("llm", llm);
  require_endpoint("asr", asr);
  require_endpoint("mt", mt);
  require_endpoint("tts", tts);
  require_endpoint("judge", judge);
  if (embedding.kind == "none") {
    throw Error(ErrorCode::kInvalidArgument, "embedding: a provider is required");
  }
  const auto mode = lang::parse_route_mode(route_mode);
  const auto route = mode == lang::RouteMode::kDirect
                         ? lang::LanguageRoute::direct(source_lang)
                         : lang::LanguageRoute::translate(source_lang, pipeline_lang);
  route.validate();
  if (llm_permits == 0 || http_threads == 0 || eval_parallelism == 0) {
    throw Error(ErrorCode::kInvalidArgument, "limits must be >= 1");
  }
  static const char* levels[] = {"trace", "debug", "info", "warn", "error", "critical", "off"};
  if (std::find(std::begin(levels), std::end(levels), log_level) == std::end(levels)) {
    throw Error(ErrorCode::kInvalidArgument, "unknown log level " + log_level);
  }
}

EnvLookup process_env() {
  return [](const std::string& name) -> std::optional<std::string> {
    const char* v = std::getenv(name.c_str());
    if (v == nullptr) return std::nullopt;
    return std::string(v);
  };
}

const std::vector<std::pair<std::string, std::string>>& env_overrides() {
  static const std::vector<std::pair<std::string, std::string>> table{
      {"SAFEQA_HOST", "/listen/host"},
      {"SAFEQA_PORT", "/listen/port"},
      {"SAFEQA_STORE_DIR", "/corpus/store_dir"},
      {"SAFEQA_SEED_JSONL", "/corpus/seed_jsonl"},
      {"SAFEQA_MODERATION_LOG", "/moderation/log_file"},
      {"SAFEQA_PII_RULES", "/rules/pii"},
      {"SAFEQA_RAILS", "/rules/rails"},
      {"SAFEQA_TAU", "/thresholds/tau"},
      {"SAFEQA_TOPIC_MIN_SCORE", "/thresholds/topic_min_score"},
      {"SAFEQA_GROUNDING_MIN_RECALL", "/thresholds/grounding_min_recall"},
      {"SAFEQA_ROUTE_MODE", "/route/mode"},
      {"SAFEQA_SOURCE_LANG", "/route/source_lang"},
      {"SAFEQA_PIPELINE_LANG", "/route/pipeline_lang"},
      {"SAFEQA_USER_TOKEN", "/auth/user_token"},
      {"SAFEQA_MODERATOR_TOKEN", "/auth/moderator_token"},
      {"SAFEQA_EMBEDDING_KIND", "/providers/embedding/kind"},
      {"SAFEQA_EMBEDDING_URL", "/providers/embedding/url"},
      {"SAFEQA_LLM_KIND", "/providers/llm/kind"},
      {"SAFEQA_LLM_URL", "/providers/llm/url"},
      {"SAFEQA_LLM_MODEL", "/providers/llm/model"},
      {"SAFEQA_LLM_TOKEN", "/providers/llm/token"},
      {"SAFEQA_ASR_KIND", "/providers/asr/kind"},
      {"SAFEQA_ASR_URL", "/providers/asr/url"},
      {"SAFEQA_MT_KIND", "/providers/mt/kind"},
      {"SAFEQA_MT_URL", "/providers/mt/url"},
      {"SAFEQA_TTS_KIND", "/providers/tts/kind"},
      {"SAFEQA_TTS_URL", "/providers/tts/url"},
      {"SAFEQA_JUDGE_KIND", "/providers/judge/kind"},
      {"SAFEQA_JUDGE_URL", "/providers/judge/url"},
      {"SAFEQA_LLM_PERMITS", "/limits/llm_permits"},
      {"SAFEQA_HTTP_THREADS", "/limits/http_threads"},
      {"SAFEQA_LOG_LEVEL", "/logging/level"},
      {"SAFEQA_LOG_FILE", "/logging/file"},
  };
  return table;
}

ServiceConfig load(const std::optional<std::string>& path, const EnvLookup& env) {
  json merged = ServiceConfig{}.to_json();
  if (path) {
    json file;
    try {
      file = json::parse(read_file(*path));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kParse, "config " + *path + ": " + e.what());
    }
    if (!file.is_object()) throw Error(ErrorCode::kParse, "config must be a JSON object");
    const fs::path base = fs::absolute(*path).parent_path();
    for (const char* ptr : kPathPointers) {
      const json::json_pointer p(ptr);
      if (file.contains(p) && file.at(p).is_string()) {
        const std::string v = file.at(p);
        if (!v.empty() && fs::path(v).is_relative()) file[p] = (base / v).lexically_normal().string();
      }
    }
    merged.merge_patch(file);
  }
  for (const auto& [name, ptr] : env_overrides()) {
    const auto value = env(name);
    if (!value) continue;
    const json::json_pointer p(ptr);
    const json& current = merged.at(p);
    try {
      if (current.is_number_float()) {
        merged[p] = std::stod(*value);
      } else if (current.is_number_integer() || current.is_number_unsigned()) {
        merged[p] = std::stoll(*value);
      } else {
        merged[p] = *value;
      }
    } catch (const std::exception&) {
      throw Error(ErrorCode::kInvalidArgument, name + ": not a number: " + *value);
    }
  }
  return ServiceConfig::from_json(merged);
}

}  // namespace safeqa::config
