// Operator CLI: ingest, index, calibrate, eval, serve, ask.
#include <atomic>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "safeqa/config.hpp"
#include "safeqa/corpus.hpp"
#include "safeqa/errors.hpp"
#include "safeqa/evaluation.hpp"
#include "safeqa/retrieval.hpp"
#include "safeqa/service.hpp"
#include "safeqa/synthetic.hpp"
#include "safeqa/system.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace safeqa;

namespace {

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop = true; }

config::ServiceConfig load_config(const std::string& path) {
  std::optional<std::string> file;
  if (!path.empty()) {
    if (!fs::is_regular_file(path)) throw Error(ErrorCode::kIo, "no such config file: " + path);
    file = path;
  }
  return config::load(file);
}

std::unique_ptr<corpus::CorpusStore> open_store(const pii::Sanitizer& sanitizer,
                                                const std::string& dir) {
  if (!fs::is_directory(dir)) throw Error(ErrorCode::kIo, "no such store directory: " + dir);
  corpus::CorpusStore::Options options;
  options.directory = fs::path(dir);
  return std::make_unique<corpus::CorpusStore>(sanitizer, options);
}

void emit(const json& doc, const std::string& out_path) {
  if (!out_path.empty()) write_file_atomic(out_path, doc.dump(2) + "\n");
  std::cout << doc.dump(2) << "\n";
}

std::vector<std::string> references_of(const json& item) {
  if (item.contains("references")) return item.at("references").get<std::vector<std::string>>();
  return {item.at("reference").get<std::string>()};
}

void print_table(const std::vector<std::pair<std::string, std::string>>& rows) {
  std::size_t width = 0;
  for (const auto& [k, v] : rows) width = std::max(width, k.size());
  for (const auto& [k, v] : rows) {
    std::cout << k << std::string(width - k.size() + 2, ' ') << v << "\n";
  }
}

std::string fixed4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"safeqa: sensitive-topic QA engine tooling"};
  app.require_subcommand(1);
  bool json_mode = false;
  std::string config_path;

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Load a JSONL corpus into a store");
  std::string ingest_input;
  std::string ingest_out;
  ingest->add_option("--input", ingest_input, "JSONL file")->required();
  ingest->add_option("--out", ingest_out, "Store directory (created if missing)");
  ingest->add_flag("--json", json_mode);

  // index
  auto* index = app.add_subcommand("index", "Build the retrieval index from a store");
  std::string index_store;
  std::string index_out;
  index->add_option("--store", index_store, "Store directory")->required();
  index->add_option("--out", index_out, "Write the index snapshot JSON here");
  index->add_flag("--json", json_mode);

  // calibrate
  auto* calibrate = app.add_subcommand("calibrate", "Calibrate the relevance threshold");
  std::string cal_store;
  std::uint64_t cal_seed = 1;
  double cal_fraction = 0.2;
  bool cal_write = false;
  calibrate->add_option("--store", cal_store, "Store directory")->required();
  calibrate->add_option("--seed", cal_seed, "Split seed");
  calibrate->add_option("--fraction", cal_fraction, "Held-out fraction per group");
  calibrate->add_option("--config", config_path, "Config file (updated with --write)");
  calibrate->add_flag("--write", cal_write, "Write tau into the config file");
  calibrate->add_flag("--json", json_mode);

  // eval
  auto* evalc = app.add_subcommand("eval", "Run an evaluation suite");
  std::string suite;
  std::string eval_store;
  std::string eval_input;
  std::string eval_out;
  std::uint64_t eval_seed = 20240611;
  double eval_p = 0.1;
  double eval_tau = 0.5;
  std::size_t eval_k = 5;
  std::size_t eval_probes = 1000;
  std::size_t eval_polls = 5;
  std::vector<std::size_t> eval_sizes{1000, 5000, 10000};
  evalc->add_option("--suite", suite, "retrieval | text | robustness | scalability")
      ->required()
      ->check(CLI::IsMember({"retrieval", "text", "robustness", "scalability"}));
  evalc->add_option("--store", eval_store, "Store directory (default: synthetic corpus)");
  evalc->add_option("--input", eval_input, "JSONL of {id, candidate, reference(s), context?}");
  evalc->add_option("--out", eval_out, "Also write the JSON report here");
  evalc->add_option("--seed", eval_seed);
  evalc->add_option("--p", eval_p, "Noise level for robustness")->check(CLI::Range(0.0, 0.3));
  evalc->add_option("--tau", eval_tau)->check(CLI::Range(0.0, 1.0));
  evalc->add_option("--k", eval_k)->check(CLI::PositiveNumber);
  evalc->add_option("--probes", eval_probes);
  evalc->add_option("--polls", eval_polls)->check(CLI::PositiveNumber);
  evalc->add_option("--sizes", eval_sizes)->delimiter(',');
  evalc->add_option("--config", config_path);
  evalc->add_flag("--json", json_mode);

  // serve
  auto* serve = app.add_subcommand("serve", "Run the HTTP service");
  serve->add_option("--config", config_path, "Config file")->required();
  serve->add_flag("--json", json_mode);

  // ask
  auto* ask = app.add_subcommand("ask", "Answer one query in-process");
  std::string ask_text;
  std::string ask_audio;
  std::string ask_store;
  std::string ask_lang;
  auto* text_opt = ask->add_option("--text", ask_text, "Query text");
  auto* audio_opt = ask->add_option("--audio-uri", ask_audio, "Audio URI (mock ASR fixture)");
  text_opt->excludes(audio_opt);
  ask->add_option("--store", ask_store, "Store directory (overrides config)");
  ask->add_option("--lang", ask_lang, "Source language");
  ask->add_option("--config", config_path);
  ask->add_flag("--json", json_mode);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (*ingest) {
      if (!fs::is_regular_file(ingest_input)) {
        throw Error(ErrorCode::kIo, "cannot read " + ingest_input);
      }
      pii::Sanitizer sanitizer;
      corpus::CorpusStore::Options options;
      if (!ingest_out.empty()) {
        fs::create_directories(ingest_out);
        options.directory = fs::path(ingest_out);
      }
      corpus::CorpusStore store(sanitizer, options);
      const auto report = store.ingest_jsonl(ingest_input);
      std::cout << report.to_json().dump(2) << "\n";
      return 0;
    }

    if (*index) {
      pii::Sanitizer sanitizer;
      auto store = open_store(sanitizer, index_store);
      retrieval::Retriever retriever(std::make_shared<providers::MockEmbeddingProvider>());
      retriever.rebuild(store->published());
      const auto snap = retriever.snapshot();
      if (!index_out.empty()) write_file_atomic(index_out, snap->to_json().dump());
      const json summary = {{"documents", snap->docs.size()},
                            {"index_version", snap->version},
                            {"corpus_version", store->version()},
                            {"terms", snap->sparse.terms().size()}};
      if (json_mode) {
        std::cout << summary.dump(2) << "\n";
      } else {
        print_table({{"documents", std::to_string(snap->docs.size())},
                     {"index_version", std::to_string(snap->version)},
                     {"terms", std::to_string(snap->sparse.terms().size())}});
      }
      return 0;
    }

    if (*calibrate) {
      if (cal_write && config_path.empty()) {
        std::cerr << "--write needs --config\n";
        return 2;
      }
      pii::Sanitizer sanitizer;
      auto store = open_store(sanitizer, cal_store);
      const auto split = store->holdout_split(cal_seed, cal_fraction);
      std::vector<QARecord> train;
      for (const auto& id : split.train) train.push_back(*store->get(id));
      std::vector<retrieval::HoldoutQuery> holdout;
      for (const auto& id : split.held_out) {
        const auto r = store->get(id);
        holdout.push_back({r->sanitized_question, r->group_id});
      }
      retrieval::Retriever retriever(std::make_shared<providers::MockEmbeddingProvider>());
      retriever.rebuild(train);
      const auto calibration = retrieval::calibrate_threshold(holdout, retriever);
      json out = calibration.to_json();
      out["seed"] = cal_seed;
      out["fraction"] = cal_fraction;
      out["held_out"] = holdout.size();
      if (cal_write) {
        if (!std::isfinite(calibration.tau)) {
          throw Error(ErrorCode::kPrecondition, "calibrated tau is +inf; config not updated");
        }
        json file = json::parse(read_file(config_path));
        file["thresholds"]["tau"] = calibration.tau;
        write_file_atomic(config_path, file.dump(2) + "\n");
        out["written_to"] = config_path;
      }
      if (json_mode) {
        std::cout << out.dump(2) << "\n";
      } else {
        std::cout << "tau " << out["tau"].dump() << "  f1 " << fixed4(calibration.f1) << "\n";
        for (const auto& row : calibration.sweep) {
          std::cout << "  tau=" << retrieval::threshold_to_json(row.tau).dump() << " tp=" << row.tp
                    << " fp=" << row.fp << " fn=" << row.fn << " f1=" << fixed4(row.f1) << "\n";
        }
      }
      return 0;
    }

    if (*evalc) {
      const auto cfg = load_config(config_path);
      auto records_for_eval = [&] {
        if (eval_store.empty()) return synth::generate_corpus({.seed = eval_seed});
        pii::Sanitizer sanitizer;
        return open_store(sanitizer, eval_store)->published();
      };
      json report;
      std::vector<std::pair<std::string, std::string>> table;
      if (suite == "retrieval" || suite == "robustness") {
        const auto holdout = eval::leave_one_out(records_for_eval(), eval_seed);
        retrieval::Retriever retriever(std::make_shared<providers::MockEmbeddingProvider>());
        retriever.rebuild(holdout.train);
        if (suite == "retrieval") {
          const auto r = eval::retrieval_eval(holdout.queries, retriever, eval_k, eval_tau,
                                              cfg.eval_parallelism);
          report = r.to_json();
          table = {{"queries", std::to_string(r.queries)},
                   {"top1_group_accuracy", fixed4(r.top1_group_accuracy)},
                   {"mrr", fixed4(r.mrr)},
                   {"acceptance_rate_at_tau", fixed4(r.acceptance_rate)}};
        } else {
          const auto r = eval::robustness_eval(holdout.queries, retriever, eval_p, eval_seed,
                                               eval_k, eval_tau, cfg.eval_parallelism);
          report = r.to_json();
          table = {{"p", fixed4(r.p)},
                   {"clean_top1", fixed4(r.clean.top1_group_accuracy)},
                   {"noisy_top1", fixed4(r.noisy.top1_group_accuracy)},
                   {"accuracy_delta", fixed4(r.accuracy_delta)}};
        }
      } else if (suite == "scalability") {
        const auto r = eval::scalability_eval(eval_sizes, eval_seed, eval_probes);
        report = r.to_json();
        for (const auto& row : r.rows) {
          table.emplace_back(std::to_string(row.documents) + " docs",
                             "build " + fixed4(row.build_ms) + " ms, p50 " + fixed4(row.p50_ms) +
                                 " ms, p95 " + fixed4(row.p95_ms) + " ms, oracle " +
                                 std::to_string(row.spot_checks_passed) + "/" +
                                 std::to_string(row.spot_checks));
        }
      } else {
        if (eval_input.empty()) {
          std::cerr << "--suite text needs --input\n";
          return 2;
        }
        providers::MockEmbeddingProvider embedder;
        auto judge = std::make_unique<eval::MockJudge>(cfg.grounding_min_recall);
        std::vector<std::pair<std::string, double>> b, r, s, h;
        std::size_t line_no = 0;
        for (const auto& line : read_lines(eval_input)) {
          ++line_no;
          if (normalize_whitespace(line).empty()) continue;
          json item;
          try {
            item = json::parse(line);
          } catch (const json::exception&) {
            throw Error(ErrorCode::kParse, "line " + std::to_string(line_no) + ": malformed JSON");
          }
          const std::string id = item.value("id", std::to_string(line_no));
          const std::string candidate = item.at("candidate");
          const auto refs = references_of(item);
          b.emplace_back(id, eval::bleu(candidate, refs));
          r.emplace_back(id, eval::rouge_l(candidate, refs.front()).f1);
          s.emplace_back(id, eval::bert_score(candidate, refs.front(), embedder).f1);
          if (item.contains("context")) {
            const auto context = item.at("context").get<std::vector<std::string>>();
            h.emplace_back(id, eval::chainpoll_hallucination(candidate, context, *judge, eval_polls).score);
          }
        }
        std::vector<eval::MetricReport> reports{
            eval::make_report("bleu", b, {{"max_n", 4}, {"smoothing", "add-1 for n>=2"}}),
            eval::make_report("rouge_l_f1", r, {{"beta", 1}}),
            eval::make_report("bert_score_f1", s,
                              {{"provider", embedder.id()}, {"idf", false}})};
        if (!h.empty()) {
          reports.push_back(eval::make_report("hallucination", h,
                                              {{"polls", eval_polls}, {"judge", judge->id()}}));
        }
        report = json::array();
        for (const auto& m : reports) {
          report.push_back(m.to_json());
          table.emplace_back(m.metric, fixed4(m.value));
        }
      }
      if (!eval_out.empty()) write_file_atomic(eval_out, report.dump(2) + "\n");
      if (json_mode) {
        std::cout << report.dump(2) << "\n";
      } else {
        print_table(table);
      }
      return 0;
    }

    if (*serve) {
      const auto cfg = load_config(config_path);
      cfg.validate();
      service::HttpService http(cfg);
      const int port = http.start(cfg.host, cfg.port);
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      auto system = app::System::open(cfg);
      http.attach(system.get());
      system->logger()->info("listening on {}:{}", cfg.host, port);
      if (json_mode) {
        std::cout << json{{"host", cfg.host}, {"port", port}}.dump() << std::endl;
      } else {
        std::cout << "listening on " << cfg.host << ":" << port << std::endl;
      }
      while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
      system->logger()->info("shutting down");
      http.stop();
      http.attach(nullptr);
      return 0;
    }

    if (*ask) {
      if (ask_text.empty() == ask_audio.empty()) {
        std::cerr << "exactly one of --text and --audio-uri is required\n";
        return 2;
      }
      auto cfg = load_config(config_path);
      if (!ask_store.empty()) cfg.store_dir = ask_store;
      if (json_mode && cfg.log_level == "info") cfg.log_level = "warn";
      auto system = app::System::open(cfg);
      pipeline::AskRequest request;
      if (!ask_text.empty()) request.query_text = ask_text;
      if (!ask_audio.empty()) request.audio = lang::AudioRef{ask_audio};
      if (!ask_lang.empty()) {
        request.language = ask_lang;
        request.route = lang::LanguageRoute::direct(ask_lang);
      }
      const auto envelope = system->engine().answer(request);
      if (json_mode) {
        std::cout << envelope.to_json().dump(2) << "\n";
      } else {
        std::cout << "[" << pipeline::to_string(envelope.route_taken) << "] "
                  << envelope.answer_text << "\n";
      }
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.code()) << "): " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
