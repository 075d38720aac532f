#include "iamm/config.hpp"

#include <fstream>
#include <sstream>

#include "iamm/errors.hpp"
#include "json.hpp"

namespace iamm {

using nlohmann::json;

// Single field list shared by the reader and the writer.
#define IAMM_RUN_CONFIG_FIELDS(X)                                                                               \
  X(d) X(H) X(d_h) X(k_1) X(k_2) X(k_3) X(encoder_layers) X(encoder_heads) X(ffn) X(batch_size) X(learning_rate) \
  X(adam_beta1) X(adam_beta2) X(adam_eps) X(max_iterations) X(epochs) X(validate_every) X(seed) X(precision)   \
  X(train_path) X(train_knowledge_path) X(valid_path) X(valid_knowledge_path) X(test_path)                      \
  X(test_knowledge_path) X(synthetic_spec_path) X(min_freq) X(no_explicit_association)                          \
  X(no_implicit_association) X(no_word_selector) X(share_utterance_aggregator) X(max_decode_length)             \
  X(checkpoint_path) X(output_dir) X(chat_url) X(chat_model) X(chat_api_key_env) X(instruction_template_path)   \
  X(chat_timeout_seconds)

void RunConfig::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError("config: " + m); };
  if (d < 1 || H < 1 || d_h < 1 || k_1 < 1 || k_2 < 1 || k_3 < 1) fail("sizes must be positive");
  if (k_2 * d_h != d) fail("k_2 * d_h must equal d (" + std::to_string(k_2) + " * " + std::to_string(d_h) +
                           " != " + std::to_string(d) + ")");
  if (encoder_layers < 1 || encoder_heads < 1) fail("encoder_layers and encoder_heads must be positive");
  if (d % encoder_heads != 0) fail("d must be divisible by encoder_heads");
  if (batch_size < 1) fail("batch_size must be positive");
  if (!(learning_rate > 0)) fail("learning_rate must be positive");
  if (min_freq < 1) fail("min_freq must be >= 1");
  if (precision != "float" && precision != "double") fail("precision must be \"float\" or \"double\"");
  if (max_decode_length < 1) fail("max_decode_length must be positive");
}

RunConfig parse_run_config(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("config: ") + e.what());
  }
  if (!j.is_object()) throw SchemaError("config: expected a JSON object");
  RunConfig c;
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
#define IAMM_READ(field) \
  if (it.key() == #field) known = true;
    IAMM_RUN_CONFIG_FIELDS(IAMM_READ)
#undef IAMM_READ
    if (!known) throw ConfigError("config: unknown field \"" + it.key() + "\"");
  }
  try {
#define IAMM_READ(field) c.field = j.value(#field, c.field);
    IAMM_RUN_CONFIG_FIELDS(IAMM_READ)
#undef IAMM_READ
  } catch (const json::exception& e) {
    throw SchemaError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

std::string run_config_to_json(const RunConfig& c) {
  json j;
#define IAMM_WRITE(field) j[#field] = c.field;
  IAMM_RUN_CONFIG_FIELDS(IAMM_WRITE)
#undef IAMM_WRITE
  return j.dump(2);
}

}  // namespace iamm
