#include "safeqa/system.hpp"

#include <filesystem>

#include <spdlog/sinks/basic_file_sink.h>
#include <spdlog/sinks/stdout_sinks.h>

#include "safeqa/errors.hpp"
#include "safeqa/util.hpp"

namespace safeqa::app {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

providers::HttpJsonClient client_for(const config::ProviderEndpoint& e) {
  std::optional<std::string> token;
  if (!e.token.empty()) token = e.token;
  return providers::HttpJsonClient(e.url, std::chrono::milliseconds(e.timeout_ms), token);
}

}  // namespace

std::shared_ptr<spdlog::logger> make_logger(const config::ServiceConfig& config) {
  std::vector<spdlog::sink_ptr> sinks;
  sinks.push_back(std::make_shared<spdlog::sinks::stderr_sink_mt>());
  if (!config.log_file.empty()) {
    sinks.push_back(std::make_shared<spdlog::sinks::basic_file_sink_mt>(config.log_file));
  }
  auto logger = std::make_shared<spdlog::logger>("safeqa", sinks.begin(), sinks.end());
  logger->set_level(spdlog::level::from_str(config.log_level));
  logger->flush_on(spdlog::level::trace);
  return logger;
}

std::shared_ptr<const rails::RuleSet> load_rails(const config::ServiceConfig& config) {
  std::vector<rails::RailRule> rules;
  std::string base_dir = ".";
  if (config.rails.empty()) {
    rules = rails::RuleSet::default_rules();
  } else {
    try {
      rules = rails::RuleSet::parse(json::parse(read_file(config.rails)));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kParse, config.rails + ": " + e.what());
    }
    base_dir = fs::absolute(config.rails).parent_path().string();
  }
  for (auto& rule : rules) {
    if (rule.kind == rails::RuleKind::kTopic) rule.payload["min_score"] = config.topic_min_score;
    if (rule.kind == rails::RuleKind::kGrounding) {
      rule.payload["min_recall"] = config.grounding_min_recall;
    }
  }
  return std::make_shared<const rails::RuleSet>(std::move(rules), base_dir);
}

System::System(config::ServiceConfig config) : config_(std::move(config)) {}

std::unique_ptr<System> System::open(const config::ServiceConfig& config) {
  config.validate();
  std::unique_ptr<System> s(new System(config));
  const auto& c = s->config_;
  s->logger_ = make_logger(c);

  s->sanitizer_ = std::make_unique<pii::Sanitizer>(
      c.pii_rules.empty() ? pii::RuleConfig::defaults() : pii::RuleConfig::load(c.pii_rules));

  corpus::CorpusStore::Options store_options;
  if (!c.store_dir.empty()) {
    fs::create_directories(c.store_dir);
    store_options.directory = fs::path(c.store_dir);
  }
  store_options.snapshot_every = c.snapshot_every;
  s->store_ = std::make_unique<corpus::CorpusStore>(*s->sanitizer_, store_options);

  if (c.embedding.kind == "http") {
    s->embedder_ = std::make_shared<providers::HttpEmbeddingProvider>(client_for(c.embedding), 0);
  } else {
    s->embedder_ = std::make_shared<providers::MockEmbeddingProvider>();
  }
  s->retriever_ = std::make_unique<retrieval::Retriever>(s->embedder_);
  s->guardrails_ = std::make_unique<rails::Guardrails>(*s->sanitizer_, load_rails(c));

  std::optional<fs::path> moderation_log;
  if (!c.moderation_log.empty()) {
    moderation_log = fs::path(c.moderation_log);
  } else if (!c.store_dir.empty()) {
    moderation_log = fs::path(c.store_dir) / "moderation.jsonl";
  }
  s->queue_ = std::make_unique<moderation::ModerationQueue>(*s->sanitizer_, moderation_log);

  if (c.llm.kind == "mock") {
    s->llm_ = std::make_shared<gen::MockLlmProvider>();
  } else if (c.llm.kind == "http") {
    s->llm_ = std::make_shared<gen::HttpLlmProvider>(client_for(c.llm), c.llm.model);
  }

  if (c.asr.kind == "mock") {
    auto asr = std::make_shared<lang::MockAsr>();
    if (!c.asr.fixtures.empty()) {
      asr = std::make_shared<lang::MockAsr>(lang::MockAsr::load_fixtures(c.asr.fixtures));
    }
    s->language_.asr = asr;
  } else if (c.asr.kind == "http") {
    s->language_.asr = std::make_shared<lang::HttpAsr>(client_for(c.asr));
  }
  if (c.mt.kind == "mock") {
    s->language_.mt = std::make_shared<lang::MockMt>();
  } else if (c.mt.kind == "http") {
    s->language_.mt = std::make_shared<lang::HttpMt>(client_for(c.mt));
  }
  if (c.tts.kind == "mock") {
    s->language_.tts = std::make_shared<lang::MockTts>();
  } else if (c.tts.kind == "http") {
    s->language_.tts = std::make_shared<lang::HttpTts>(client_for(c.tts));
  }

  pipeline::EngineConfig engine_config;
  engine_config.tau = c.tau;
  engine_config.default_route = lang::parse_route_mode(c.route_mode) == lang::RouteMode::kDirect
                                    ? lang::LanguageRoute::direct(c.source_lang)
                                    : lang::LanguageRoute::translate(c.source_lang, c.pipeline_lang);
  std::shared_ptr<gen::Generator> generator;
  if (s->llm_) {
    generator = std::make_shared<gen::Generator>(s->llm_, providers::RetryPolicy{},
                                                 static_cast<std::ptrdiff_t>(c.llm_permits));
  }
  s->engine_ = std::make_unique<pipeline::Engine>(
      pipeline::EngineParts{*s->store_, *s->sanitizer_, *s->retriever_, *s->guardrails_,
                            generator, s->language_, *s->queue_, &s->metrics_, s->logger_},
      engine_config);
  s->engine_->attach_index();

  if (!c.seed_jsonl.empty() && s->store_->version() == 0) {
    const auto report = s->store_->ingest_jsonl(c.seed_jsonl);
    s->logger_->info("seed import: accepted={} rejected={}", report.accepted, report.rejected);
  }
  s->logger_->info("system ready corpus_version={} index_version={}", s->store_->version(),
                   s->retriever_->version());
  return s;
}

std::unique_ptr<eval::JudgeProvider> System::make_judge() const {
  if (config_.judge.kind == "http") {
    return std::make_unique<eval::HttpJudge>("http:" + config_.judge.url, client_for(config_.judge));
  }
  return std::make_unique<eval::MockJudge>(config_.grounding_min_recall);
}

}  // namespace safeqa::app
