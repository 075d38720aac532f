// iamm command line: synth, train, eval, generate, analyze, instruct.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "iamm/pipeline.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

struct Options {
  std::string config_path;
  std::string lexicon_path;
  std::string out_csv;
  std::string out_path;
  std::size_t max_k = 100;
  std::size_t limit = 1;
  bool send = false;
};

void log_line(const std::string& s) { std::cerr << s << '\n'; }

std::string output_file(const iamm::RunConfig& cfg, const std::string& name) {
  fs::create_directories(cfg.output_dir.empty() ? "." : cfg.output_dir);
  return (fs::path(cfg.output_dir.empty() ? "." : cfg.output_dir) / name).string();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw iamm::IoError("cannot write " + path);
  out << text << '\n';
}

// The split scored by eval / generate / analyze / instruct: test, else
// valid, else train.
iamm::Split evaluation_split(const iamm::RunConfig& cfg, const iamm::Vocab& vocab) {
  std::string corpus = cfg.test_path, knowledge = cfg.test_knowledge_path;
  if (corpus.empty()) corpus = cfg.valid_path, knowledge = cfg.valid_knowledge_path;
  if (corpus.empty()) corpus = cfg.train_path, knowledge = cfg.train_knowledge_path;
  if (corpus.empty()) throw iamm::ConfigError("no corpus path set");
  auto split = iamm::load_split(corpus, knowledge);
  iamm::encode_split(split, vocab);
  return split;
}

int run_synth(const iamm::RunConfig& cfg) {
  iamm::SyntheticSpec spec;
  if (!cfg.synthetic_spec_path.empty()) {
    std::ifstream in(cfg.synthetic_spec_path);
    if (!in) throw iamm::IoError("cannot open " + cfg.synthetic_spec_path);
    spec = iamm::parse_synthetic_spec(std::string(std::istreambuf_iterator<char>(in), {}));
  }
  if (cfg.train_path.empty()) throw iamm::ConfigError("synth: train_path is not set");
  iamm::write_synthetic(spec, cfg.train_path, cfg.train_knowledge_path);
  if (!cfg.valid_path.empty())
    iamm::write_synthetic(iamm::held_out_spec(spec, 1), cfg.valid_path, cfg.valid_knowledge_path);
  if (!cfg.test_path.empty())
    iamm::write_synthetic(iamm::held_out_spec(spec, 2), cfg.test_path, cfg.test_knowledge_path);
  return kOk;
}

template <typename Scalar>
int run_train(const iamm::RunConfig& cfg) {
  auto data = iamm::load_dataset(cfg);
  log_line("vocabulary " + std::to_string(data.vocab.size()) + ", train " +
           std::to_string(data.train.dialogues.size()) + " dialogues");
  if (const auto dir = fs::path(cfg.checkpoint_path).parent_path(); !dir.empty()) fs::create_directories(dir);
  iamm::IammModel<Scalar> model(cfg, data.vocab.size());
  iamm::Adam<Scalar> adam(model.params(), iamm::adam_options(cfg));
  iamm::TrainHooks hooks;
  hooks.log = log_line;
  const auto report = iamm::train_model(model, adam, data.vocab, data.train.encoded, data.valid.encoded,
                                        cfg.checkpoint_path, hooks);
  const std::string text = iamm::train_report_json(report);
  write_text(output_file(cfg, "train_report.json"), text);
  std::cout << text << '\n';
  return kOk;
}

template <typename Scalar>
int run_eval(const iamm::RunConfig& cfg, const Options& opt) {
  auto ck = iamm::load_checkpoint<Scalar>(cfg.checkpoint_path);
  const auto split = evaluation_split(cfg, ck.vocab);
  const auto report = iamm::evaluate(*ck.model, ck.vocab, split.encoded, cfg.max_decode_length);
  const std::string text = iamm::eval_report_json(report);
  if (!opt.out_path.empty()) write_text(opt.out_path, text);
  std::cout << text << '\n';
  return kOk;
}

template <typename Scalar>
int run_generate(const iamm::RunConfig& cfg, const Options& opt) {
  auto ck = iamm::load_checkpoint<Scalar>(cfg.checkpoint_path);
  const auto split = evaluation_split(cfg, ck.vocab);
  const std::string path = opt.out_path.empty() ? output_file(cfg, "generations.jsonl") : opt.out_path;
  std::ofstream out(path);
  if (!out) throw iamm::IoError("cannot write " + path);
  const auto& labels = iamm::emotion_labels();
  for (std::size_t i = 0; i < split.encoded.size(); ++i) {
    const auto& d = split.encoded[i];
    const int emotion = ck.model->predict(d);
    const auto tokens = iamm::response_tokens(ck.model->generate(d, cfg.max_decode_length), ck.vocab);
    const json line{{"id", d.id},
                    {"emotion", std::string(labels[static_cast<std::size_t>(emotion)])},
                    {"gold_emotion", std::string(labels[static_cast<std::size_t>(d.emotion)])},
                    {"response", iamm::join_tokens(tokens)},
                    {"reference", iamm::join_tokens(split.dialogues[i].response)}};
    out << line.dump() << '\n';
  }
  if (!out) throw iamm::IoError("write failed for " + path);
  log_line("wrote " + std::to_string(split.encoded.size()) + " responses to " + path);
  return kOk;
}

template <typename Scalar>
int run_analyze(const iamm::RunConfig& cfg, const Options& opt) {
  auto ck = iamm::load_checkpoint<Scalar>(cfg.checkpoint_path);
  const auto split = evaluation_split(cfg, ck.vocab);
  iamm::AssociatedWordCollector collector;
  for (const auto& d : split.encoded) iamm::collect_associated_words(*ck.model, ck.vocab, d, collector);
  const auto records = collector.records();
  const auto docs = iamm::dialogue_documents(split.dialogues);
  const auto grid = iamm::default_k_grid(opt.max_k);
  iamm::emit_plot_csv(iamm::idf_curves(records, iamm::IdfTable(docs), grid), opt.out_csv);
  log_line(std::to_string(collector.events()) + " selection events over " + std::to_string(records.size()) +
           " distinct words; idf curves in " + opt.out_csv);
  if (!opt.lexicon_path.empty()) {
    const fs::path csv(opt.out_csv);
    const std::string path = (csv.parent_path() / (csv.stem().string() + "_intensity.csv")).string();
    iamm::emit_plot_csv(iamm::intensity_curves(records, iamm::load_lexicon(opt.lexicon_path), docs, grid), path);
    log_line("intensity curves in " + path);
  }
  return kOk;
}

template <typename Scalar>
int run_instruct(const iamm::RunConfig& cfg, const Options& opt) {
  if (cfg.instruction_template_path.empty()) throw iamm::ConfigError("instruct: instruction_template_path is not set");
  if (opt.send && cfg.chat_url.empty()) throw iamm::ConfigError("instruct: chat_url is not set");
  auto ck = iamm::load_checkpoint<Scalar>(cfg.checkpoint_path);
  const auto split = evaluation_split(cfg, ck.vocab);
  const auto tmpl = iamm::load_instruction_template(cfg.instruction_template_path);
  iamm::ChatEndpoint endpoint;
  endpoint.url = cfg.chat_url;
  endpoint.model = cfg.chat_model;
  endpoint.api_key_env = cfg.chat_api_key_env;
  endpoint.timeout_seconds = cfg.chat_timeout_seconds;
  const std::size_t n = std::min(opt.limit, split.encoded.size());
  for (std::size_t i = 0; i < n; ++i) {
    const auto groups = iamm::association_groups(*ck.model, ck.vocab, split.encoded[i]);
    const auto prompt = iamm::build_instruction(split.dialogues[i], groups, tmpl);
    json line{{"id", split.dialogues[i].id}, {"system", prompt.system}, {"user", prompt.user}};
    if (opt.send) line["response"] = iamm::chat_send(prompt, endpoint);
    std::cout << line.dump() << '\n';
  }
  return kOk;
}

template <typename Scalar>
int dispatch(const std::string& command, const iamm::RunConfig& cfg, const Options& opt) {
  if (command == "train") return run_train<Scalar>(cfg);
  if (command == "eval") return run_eval<Scalar>(cfg, opt);
  if (command == "generate") return run_generate<Scalar>(cfg, opt);
  if (command == "analyze") return run_analyze<Scalar>(cfg, opt);
  return run_instruct<Scalar>(cfg, opt);
}

int run(const std::string& command, const Options& opt) {
  const auto cfg = iamm::load_run_config(opt.config_path);
  if (command == "synth") return run_synth(cfg);
  // Commands reading a checkpoint follow its precision, not the config's.
  const std::string precision = command == "train" ? cfg.precision : iamm::peek_checkpoint(cfg.checkpoint_path).precision;
  if (precision == "double") return dispatch<double>(command, cfg, opt);
  return dispatch<float>(command, cfg, opt);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Iterative associative memory model for empathetic response generation"};
  app.require_subcommand(1);
  Options opt;

  auto add = [&](const std::string& name, const std::string& help) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", opt.config_path, "run configuration (JSON)")->required()->check(CLI::ExistingFile);
    return sub;
  };
  add("synth", "write the planted-pair synthetic corpus to the configured paths");
  add("train", "train a model and save the best checkpoint");
  add("eval", "report acc, ppl, dist1, dist2 on the test split")->add_option("--out", opt.out_path, "also write the report here");
  add("generate", "greedy responses for the test split as JSON lines")
      ->add_option("--out", opt.out_path, "output file (default <output_dir>/generations.jsonl)");
  auto* analyze = add("analyze", "IDF and emotion-intensity curves of the associated words");
  analyze->add_option("--out-csv", opt.out_csv, "IDF curve CSV; intensity curves go to <stem>_intensity.csv")->required();
  analyze->add_option("--lexicon", opt.lexicon_path, "token,intensity CSV")->check(CLI::ExistingFile);
  analyze->add_option("--max-k", opt.max_k, "largest k on the curve grid")->check(CLI::PositiveNumber);
  auto* instruct = add("instruct", "instruction prompts built from the associated words");
  instruct->add_option("--limit", opt.limit, "number of dialogues")->check(CLI::PositiveNumber);
  instruct->add_flag("--send", opt.send, "send each prompt to the configured chat endpoint");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    return run(command, opt);
  } catch (const iamm::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kUsage;
  } catch (const iamm::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return kNumeric;
  } catch (const iamm::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kData;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kData;
  }
}
