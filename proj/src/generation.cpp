#include "safeqa/generation.hpp"

#include <set>

#include "safeqa/errors.hpp"

namespace safeqa::gen {

using nlohmann::json;

namespace {

constexpr std::string_view kExamplesHeader = "### Examples";
constexpr std::string_view kContextHeader = "### Context";
constexpr std::string_view kQuestionHeader = "### Question";

}  // namespace

PromptTemplate PromptTemplate::defaults(std::string language) {
  PromptTemplate t;
  t.system_preamble =
      "You are a friendly, non-judgemental sexual and reproductive health educator "
      "speaking with young people from rural communities.\n"
      "Rules:\n"
      "- Never ask for or repeat personal details such as names, phone numbers, ages "
      "or places.\n"
      "- Politely refuse questions outside sexual and reproductive health.\n"
      "- Use the examples and context passages as your source of facts.\n"
      "- If you are not sure, say \"I don't know\" instead of inventing facts.";
  t.language_directive = std::move(language);
  return t;
}

std::vector<Example> select_icl_examples(std::string_view query, std::size_t k,
                                         const retrieval::Retriever& retriever) {
  if (k == 0) return {};
  auto snap = retriever.snapshot();
  auto hits = retriever.search(*snap, query, std::max<std::size_t>(k * 4, 10));
  std::vector<Example> out;
  std::set<std::string> groups;
  for (const auto& hit : hits) {
    const auto* doc = snap->doc(hit.record_id);
    if (doc == nullptr || !groups.insert(doc->group_id).second) continue;
    out.push_back({doc->text, doc->answer});
    if (out.size() == k) break;
  }
  return out;
}

std::vector<ContextPassage> context_from_hits(const std::vector<retrieval::RetrievalHit>& hits,
                                              const retrieval::IndexSnapshot& snapshot,
                                              std::size_t limit) {
  std::vector<ContextPassage> out;
  for (const auto& hit : hits) {
    if (out.size() == limit) break;
    if (const auto* doc = snapshot.doc(hit.record_id)) {
      out.push_back({doc->id, doc->text, doc->answer});
    }
  }
  return out;
}

Prompt build_prompt(std::string_view query, const std::vector<Example>& examples,
                    const std::vector<ContextPassage>& context, const PromptTemplate& tmpl) {
  if (query.empty()) throw Error(ErrorCode::kInvalidArgument, "unfilled slot: query");
  if (tmpl.system_preamble.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "unfilled slot: system_preamble");
  }
  if (tmpl.language_directive.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "unfilled slot: language_directive");
  }
  Prompt p;
  p.system = tmpl.system_preamble + "\nAnswer only in the language with tag '" +
             tmpl.language_directive + "'.";
  std::string& user = p.user;
  if (!examples.empty()) {
    user.append(kExamplesHeader).append("\n");
    for (const auto& e : examples) {
      user.append("Q: ").append(e.question).append("\n");
      user.append("A: ").append(e.answer).append("\n");
    }
    user.append("\n");
  }
  if (!context.empty()) {
    user.append(kContextHeader).append("\n");
    for (const auto& c : context) {
      user.append("[").append(c.record_id).append("] Q: ").append(c.question);
      user.append(" A: ").append(c.answer).append("\n");
    }
    user.append("\n");
  }
  user.append(kQuestionHeader).append("\n").append(query);
  return p;
}

std::string_view to_string(FinishReason reason) {
  switch (reason) {
    case FinishReason::kStop: return "stop";
    case FinishReason::kLength: return "length";
    case FinishReason::kFiltered: return "filtered";
    case FinishReason::kError: return "error";
  }
  return "error";
}

FinishReason parse_finish_reason(std::string_view text) {
  if (text == "stop") return FinishReason::kStop;
  if (text == "length") return FinishReason::kLength;
  if (text == "filtered" || text == "content_filter") return FinishReason::kFiltered;
  return FinishReason::kError;
}

std::string MockLlmProvider::no_context_answer() {
  return "I don't know the answer to this yet. A trained counsellor will follow up.";
}

GenerationResult MockLlmProvider::complete(const GenerationRequest& request) {
  const std::size_t call = ++calls_;
  const Mode mode = mode_.load();
  if (mode == Mode::kAlwaysTimeout) throw ProviderError("timeout", true);
  if (mode == Mode::kFailFirst && call <= static_cast<std::size_t>(fail_first_)) {
    throw ProviderError("upstream status 503", true);
  }
  GenerationResult result;
  result.usage.prompt_tokens = request.prompt.text().size() / 4;
  if (mode == Mode::kFiltered) {
    result.finish_reason = FinishReason::kFiltered;
    return result;
  }
  if (!override_.empty()) {
    result.text = override_;
  } else {
    // First context line looks like "[id] Q: ... A: ...".
    const std::string& user = request.prompt.user;
    const auto header = user.find(std::string(kContextHeader) + "\n");
    if (header == std::string::npos) {
      result.text = no_context_answer();
    } else {
      const auto line_start = header + kContextHeader.size() + 1;
      const auto line_end = user.find('\n', line_start);
      const std::string line = user.substr(line_start, line_end - line_start);
      const auto close = line.find(']');
      const auto answer_pos = line.find(" A: ");
      const std::string id = line.substr(1, close - 1);
      const std::string answer =
          answer_pos == std::string::npos ? std::string() : line.substr(answer_pos + 4);
      result.text = "[" + id + "] " + answer;
    }
  }
  result.usage.completion_tokens = result.text.size() / 4;
  result.finish_reason = FinishReason::kStop;
  return result;
}

HttpLlmProvider::HttpLlmProvider(providers::HttpJsonClient client, std::string model)
    : client_(std::move(client)), model_(std::move(model)) {}

GenerationResult HttpLlmProvider::complete(const GenerationRequest& request) {
  json body = {{"model", model_},
               {"messages",
                json::array({{{"role", "system"}, {"content", request.prompt.system}},
                             {{"role", "user"}, {"content", request.prompt.user}}})},
               {"temperature", request.temperature},
               {"max_tokens", request.max_tokens}};
  json response = client_.post("", body);
  GenerationResult result;
  try {
    result.text = response.value("text", "");
    result.finish_reason = parse_finish_reason(response.value("finish_reason", "stop"));
    if (auto it = response.find("usage"); it != response.end() && it->is_object()) {
      result.usage.prompt_tokens = it->value("prompt_tokens", 0);
      result.usage.completion_tokens = it->value("completion_tokens", 0);
    }
  } catch (const json::exception&) {
    throw ProviderError("malformed completion response", false);
  }
  return result;
}

Generator::Generator(std::shared_ptr<LlmProvider> provider, providers::RetryPolicy retry,
                     std::ptrdiff_t permits)
    : provider_(std::move(provider)), retry_(std::move(retry)), permits_(permits) {
  if (!provider_) throw Error(ErrorCode::kInvalidArgument, "generator needs a provider");
}

GenerationResult Generator::generate(GenerationRequest request) {
  auto guard = permits_.acquire();
  int attempts = 0;
  const auto start = std::chrono::steady_clock::now();
  GenerationResult result = providers::with_retry(
      retry_,
      [&] {
        ++request.attempt;
        return provider_->complete(request);
      },
      &attempts);
  result.attempts = attempts;
  result.provider_latency = std::chrono::duration_cast<std::chrono::milliseconds>(
      std::chrono::steady_clock::now() - start);
  if (result.finish_reason == FinishReason::kStop && result.text.empty()) {
    result.finish_reason = FinishReason::kError;
  }
  return result;
}

}  // namespace safeqa::gen
