#include "safeqa/langbridge.hpp"

#include <algorithm>

#include "safeqa/errors.hpp"
#include "safeqa/sanitizer.hpp"
#include "safeqa/util.hpp"

namespace safeqa::lang {

using nlohmann::json;

json AudioRef::to_json() const {
  const char* fmt = format == AudioFormat::kWav ? "wav" : format == AudioFormat::kMp3 ? "mp3" : "opaque";
  return {{"uri", uri}, {"duration", duration_seconds}, {"format", fmt}};
}

std::string_view to_string(RouteMode mode) {
  return mode == RouteMode::kTranslate ? "translate" : "direct";
}

RouteMode parse_route_mode(std::string_view text) {
  const std::string t = ascii_lower(text);
  if (t == "translate") return RouteMode::kTranslate;
  if (t == "direct") return RouteMode::kDirect;
  throw Error(ErrorCode::kParse, "unknown route mode: " + std::string(text));
}

LanguageRoute LanguageRoute::direct(std::string lang) {
  return {RouteMode::kDirect, lang, lang, lang};
}

LanguageRoute LanguageRoute::translate(std::string source, std::string pipeline) {
  return {RouteMode::kTranslate, source, std::move(pipeline), source};
}

void LanguageRoute::validate() const {
  if (source_lang.empty() || pipeline_lang.empty() || output_lang.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "language tags must be non-empty");
  }
  if (mode == RouteMode::kDirect && pipeline_lang != source_lang) {
    throw Error(ErrorCode::kInvalidArgument, "direct route requires pipeline_lang == source_lang");
  }
}

std::map<std::string, std::string> MockAsr::load_fixtures(const std::string& path) {
  try {
    return json::parse(read_file(path)).get<std::map<std::string, std::string>>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, path + ": " + e.what());
  }
}

TranscriptionResult MockAsr::transcribe(const AudioRef& audio, const std::string& lang) {
  ++calls_;
  if (unreachable) throw ProviderError("asr timeout", true);
  auto it = fixtures_.find(audio.uri);
  if (it == fixtures_.end()) throw ProviderError("no fixture", false);
  return {it->second, lang, 1.0};
}

std::string MockMt::translate(const std::string& text, const std::string& src,
                              const std::string& tgt) {
  if (unreachable) throw ProviderError("mt timeout", true);
  return "⟪" + src + "→" + tgt + "⟫" + text;
}

AudioRef MockTts::synthesize(const std::string& text, const std::string&) {
  if (unreachable) throw ProviderError("tts timeout", true);
  return {"mock-tts://" + to_hex(fnv1a64(text)), 0.0, AudioFormat::kOpaque};
}

TranscriptionResult HttpAsr::transcribe(const AudioRef& audio, const std::string& lang) {
  json r = client_.post("", {{"audio_uri", audio.uri}, {"lang", lang}});
  try {
    return {r.at("text").get<std::string>(), lang, r.value("confidence", 1.0)};
  } catch (const json::exception&) {
    throw ProviderError("malformed ASR response", false);
  }
}

std::string HttpMt::translate(const std::string& text, const std::string& src,
                              const std::string& tgt) {
  json r = client_.post("", {{"text", text}, {"src", src}, {"tgt", tgt}});
  try {
    return r.at("text").get<std::string>();
  } catch (const json::exception&) {
    throw ProviderError("malformed MT response", false);
  }
}

AudioRef HttpTts::synthesize(const std::string& text, const std::string& lang) {
  json r = client_.post("", {{"text", text}, {"lang", lang}});
  try {
    return {r.at("audio_uri").get<std::string>(), 0.0, AudioFormat::kOpaque};
  } catch (const json::exception&) {
    throw ProviderError("malformed TTS response", false);
  }
}

TranscriptionResult transcribe(const AudioRef& audio, const std::string& lang, AsrProvider& asr,
                               const providers::RetryPolicy& retry) {
  if (audio.uri.empty()) throw Error(ErrorCode::kInvalidArgument, "audio uri is empty");
  auto result = providers::with_retry(retry, [&] { return asr.transcribe(audio, lang); });
  if (normalize_whitespace(result.text).empty()) {
    throw Error(ErrorCode::kProviderRejected, "empty transcription");
  }
  result.confidence = std::clamp(result.confidence, 0.0, 1.0);
  return result;
}

namespace {

std::size_t count_occurrences(const std::string& haystack, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = haystack.find(needle); pos != std::string::npos;
       pos = haystack.find(needle, pos + needle.size())) {
    ++n;
  }
  return n;
}

}  // namespace

std::string translate(const std::string& text, const std::string& src, const std::string& tgt,
                      MtProvider& mt, const providers::RetryPolicy& retry) {
  if (src == tgt) throw Error(ErrorCode::kInvalidArgument, "null translation");
  std::string out = providers::with_retry(retry, [&] { return mt.translate(text, src, tgt); });
  for (pii::Kind kind : {pii::Kind::kPhone, pii::Kind::kAge, pii::Kind::kName, pii::Kind::kPlace,
                         pii::Kind::kIdNumber}) {
    const std::string token = pii::placeholder(kind);
    if (count_occurrences(out, token) != count_occurrences(text, token)) {
      throw Error(ErrorCode::kProviderRejected, "translation corrupted placeholder " + token);
    }
  }
  return out;
}

AudioRef synthesize(const std::string& text, const std::string& lang, TtsProvider& tts,
                    const providers::RetryPolicy& retry) {
  if (text.empty()) throw Error(ErrorCode::kInvalidArgument, "nothing to synthesize");
  return providers::with_retry(retry, [&] { return tts.synthesize(text, lang); });
}

Routed route(const QueryInput& input, const LanguageRoute& lr, const Providers& providers) {
  lr.validate();
  if (input.text.has_value() == input.audio.has_value()) {
    throw Error(ErrorCode::kInvalidArgument, "exactly one of text or audio is required");
  }
  Routed routed;
  RoutedInput& in = routed.input;
  if (input.audio) {
    if (!providers.asr) throw Error(ErrorCode::kNotInitialized, "no ASR provider configured");
    in.transcription = transcribe(*input.audio, lr.source_lang, *providers.asr, providers.retry);
    in.text = in.transcription->text;
  } else {
    in.text = *input.text;
  }
  in.language = lr.source_lang;
  if (lr.mode == RouteMode::kTranslate && lr.source_lang != lr.pipeline_lang) {
    if (!providers.mt) throw Error(ErrorCode::kNotInitialized, "no MT provider configured");
    in.text = translate(in.text, lr.source_lang, lr.pipeline_lang, *providers.mt, providers.retry);
    in.language = lr.pipeline_lang;
  }

  routed.output = [lr, providers](const std::string& answer) {
    RoutedOutput out;
    out.text = answer;
    if (lr.mode == RouteMode::kTranslate && lr.pipeline_lang != lr.output_lang) {
      if (!providers.mt) {
        out.warnings.push_back("output translation skipped: no MT provider");
      } else {
        try {
          out.text = translate(answer, lr.pipeline_lang, lr.output_lang, *providers.mt,
                               providers.retry);
        } catch (const std::exception& e) {
          out.warnings.push_back(std::string("output translation failed: ") + e.what());
        }
      }
    }
    if (!providers.tts) {
      out.warnings.push_back("audio skipped: no TTS provider");
    } else if (!out.text.empty()) {
      try {
        out.audio = synthesize(out.text, lr.output_lang, *providers.tts, providers.retry);
      } catch (const std::exception& e) {
        out.warnings.push_back(std::string("audio synthesis failed: ") + e.what());
      }
    }
    return out;
  };
  return routed;
}

}  // namespace safeqa::lang
