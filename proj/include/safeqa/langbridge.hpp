#pragma once

#include <atomic>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "safeqa/providers.hpp"

namespace safeqa::lang {

enum class AudioFormat { kWav, kMp3, kOpaque };

struct AudioRef {
  std::string uri;
  double duration_seconds = 0.0;
  AudioFormat format = AudioFormat::kOpaque;

  bool operator==(const AudioRef&) const = default;
  nlohmann::json to_json() const;
};

struct TranscriptionResult {
  std::string text;
  std::string language;
  double confidence = 1.0;
};

enum class RouteMode { kTranslate, kDirect };

std::string_view to_string(RouteMode mode);
RouteMode parse_route_mode(std::string_view text);

/// TRANSLATE: source audio/text -> pipeline language -> answer -> output
/// language. DIRECT: the pipeline runs in the source language.
struct LanguageRoute {
  RouteMode mode = RouteMode::kDirect;
  std::string source_lang = "hi";
  std::string pipeline_lang = "hi";
  std::string output_lang = "hi";

  static LanguageRoute direct(std::string lang);
  static LanguageRoute translate(std::string source, std::string pipeline = "en");

  /// DIRECT requires pipeline_lang == source_lang; tags must be non-empty.
  void validate() const;
};

class AsrProvider {
 public:
  virtual ~AsrProvider() = default;
  virtual TranscriptionResult transcribe(const AudioRef& audio, const std::string& lang) = 0;
};

class MtProvider {
 public:
  virtual ~MtProvider() = default;
  virtual std::string translate(const std::string& text, const std::string& src,
                                const std::string& tgt) = 0;
};

class TtsProvider {
 public:
  virtual ~TtsProvider() = default;
  virtual AudioRef synthesize(const std::string& text, const std::string& lang) = 0;
};

/// Maps fixture uris to registered texts. Unknown uri: non-retriable "no
/// fixture". `unreachable` simulates a provider that always times out.
class MockAsr final : public AsrProvider {
 public:
  MockAsr() = default;
  explicit MockAsr(std::map<std::string, std::string> fixtures) : fixtures_(std::move(fixtures)) {}

  /// JSON object {uri: text}.
  static std::map<std::string, std::string> load_fixtures(const std::string& path);

  TranscriptionResult transcribe(const AudioRef& audio, const std::string& lang) override;
  void add_fixture(std::string uri, std::string text) { fixtures_[std::move(uri)] = std::move(text); }

  bool unreachable = false;
  std::size_t calls() const { return calls_.load(); }

 private:
  std::map<std::string, std::string> fixtures_;
  std::atomic<std::size_t> calls_{0};
};

/// Wraps as "⟪src→tgt⟫" + text.
class MockMt final : public MtProvider {
 public:
  std::string translate(const std::string& text, const std::string& src,
                        const std::string& tgt) override;
  bool unreachable = false;
};

/// Returns "mock-tts://" + content hash of the text.
class MockTts final : public TtsProvider {
 public:
  AudioRef synthesize(const std::string& text, const std::string& lang) override;
  bool unreachable = false;
};

/// POST {audio_uri, lang} -> {text, confidence}.
class HttpAsr final : public AsrProvider {
 public:
  explicit HttpAsr(providers::HttpJsonClient client) : client_(std::move(client)) {}
  TranscriptionResult transcribe(const AudioRef& audio, const std::string& lang) override;

 private:
  providers::HttpJsonClient client_;
};

/// POST {text, src, tgt} -> {text}.
class HttpMt final : public MtProvider {
 public:
  explicit HttpMt(providers::HttpJsonClient client) : client_(std::move(client)) {}
  std::string translate(const std::string& text, const std::string& src,
                        const std::string& tgt) override;

 private:
  providers::HttpJsonClient client_;
};

/// POST {text, lang} -> {audio_uri}.
class HttpTts final : public TtsProvider {
 public:
  explicit HttpTts(providers::HttpJsonClient client) : client_(std::move(client)) {}
  AudioRef synthesize(const std::string& text, const std::string& lang) override;

 private:
  providers::HttpJsonClient client_;
};

struct Providers {
  std::shared_ptr<AsrProvider> asr;
  std::shared_ptr<MtProvider> mt;
  std::shared_ptr<TtsProvider> tts;
  providers::RetryPolicy retry;
};

/// Provider call under the retry policy. Empty transcript: "empty transcription".
TranscriptionResult transcribe(const AudioRef& audio, const std::string& lang, AsrProvider& asr,
                               const providers::RetryPolicy& retry = {});

/// src == tgt: "null translation". Every "[KIND]" placeholder in the input
/// must survive verbatim in the output.
std::string translate(const std::string& text, const std::string& src, const std::string& tgt,
                      MtProvider& mt, const providers::RetryPolicy& retry = {});

AudioRef synthesize(const std::string& text, const std::string& lang, TtsProvider& tts,
                    const providers::RetryPolicy& retry = {});

struct QueryInput {
  std::optional<std::string> text;
  std::optional<AudioRef> audio;
};

struct RoutedInput {
  std::string text;
  std::string language;
  std::optional<TranscriptionResult> transcription;
};

struct RoutedOutput {
  std::string text;
  std::optional<AudioRef> audio;
  std::vector<std::string> warnings;
};

using OutputProcessor = std::function<RoutedOutput(const std::string& answer)>;

struct Routed {
  RoutedInput input;
  OutputProcessor output;
};

/// Input-side failures throw; the output processor never throws and degrades
/// to an untranslated or text-only answer with a warning.
Routed route(const QueryInput& input, const LanguageRoute& route, const Providers& providers);

}  // namespace safeqa::lang
