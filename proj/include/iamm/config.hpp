#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace iamm {

// Every run parameter. JSON keys are the member names.
struct RunConfig {
  // Model sizes.
  int d = 300;
  int H = 2;
  int d_h = 20;
  int k_1 = 5;   // keywords per head
  int k_2 = 15;  // associated words per keyword
  int k_3 = 5;   // memory rows passed to the association decoder
  int encoder_layers = 1;
  int encoder_heads = 2;
  int ffn = 0;  // 0 means 4 * d

  // Optimization.
  int batch_size = 16;
  double learning_rate = 1e-4;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  int max_iterations = 14400;
  int epochs = 0;  // when > 0, train for this many epochs instead
  int validate_every = 0;  // iterations; 0 validates once per epoch
  std::uint64_t seed = 1;
  std::string precision = "float";  // "float" or "double"

  // Data.
  std::string train_path;
  std::string train_knowledge_path;
  std::string valid_path;
  std::string valid_knowledge_path;
  std::string test_path;
  std::string test_knowledge_path;
  std::string synthetic_spec_path;  // used by `synth`
  int min_freq = 1;

  // Ablations.
  bool no_explicit_association = false;
  bool no_implicit_association = false;
  bool no_word_selector = false;
  bool share_utterance_aggregator = true;

  // Decoding and output.
  int max_decode_length = 30;
  std::string checkpoint_path = "iamm.ckpt";
  std::string output_dir = ".";

  // Chat endpoint.
  std::string chat_url;
  std::string chat_model = "gpt-3.5-turbo";
  std::string chat_api_key_env = "IAMM_API_KEY";
  std::string instruction_template_path;
  int chat_timeout_seconds = 60;

  int ffn_size() const { return ffn > 0 ? ffn : 4 * d; }

  // Throws ConfigError when the sizes are inconsistent (k_2 * d_h != d, ...).
  void validate() const;
};

RunConfig parse_run_config(std::string_view json_text);
RunConfig load_run_config(const std::string& path);
std::string run_config_to_json(const RunConfig& c);

}  // namespace iamm
