#pragma once

// Instruction prompts that hand a dialogue and its associated-word pairs to
// an external chat model, and a minimal chat-completion client.

#include <chrono>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "iamm/corpus.hpp"

namespace iamm {

// Associated-word pairs selected from one sentence pair.
struct AssociationGroup {
  std::string label;  // optional; rendered as "label: " when non-empty
  std::vector<std::pair<std::string, std::string>> pairs;
};

// Template text. An optional system section comes first and is closed by a
// line containing only "---"; the rest is the user message. Placeholders
// are {situation}, {dialogue} and {associations}; "{{" and "}}" are literal
// braces.
struct InstructionTemplate {
  std::string system;
  std::string user;
};

InstructionTemplate parse_instruction_template(std::string_view text);
InstructionTemplate load_instruction_template(const std::string& path);

struct InstructionPrompt {
  std::string system;
  std::string user;

  bool operator==(const InstructionPrompt&) const = default;
};

// "(a, b), (c, d)" per group, one group per line.
std::string render_associations(const std::vector<AssociationGroup>& groups);
// One "speaker: ..." / "listener: ..." line per utterance.
std::string render_dialogue(const Dialogue& d);

// Throws InputError when there are no associated-word pairs at all and
// TemplateError on an unknown or unterminated placeholder.
InstructionPrompt build_instruction(const Dialogue& d, const std::vector<AssociationGroup>& groups,
                                    const InstructionTemplate& tmpl);
InstructionPrompt build_instruction(const Dialogue& d, const std::vector<AssociationGroup>& groups,
                                    const std::string& template_path);

struct ChatEndpoint {
  std::string url;  // http://host[:port]/path
  std::string model;
  std::string api_key_env = "IAMM_API_KEY";
  int timeout_seconds = 60;
  int max_attempts = 3;
  std::chrono::milliseconds backoff{500};  // doubled after every failed attempt
};

// JSON chat-completion request; returns choices[0].message.content. Retries
// on 5xx, 429 and connection failures. Throws ConfigError on a missing
// credential (before any request) and TransportError once attempts run out
// or on any other non-2xx status.
std::string chat_send(const InstructionPrompt& prompt, const ChatEndpoint& endpoint);

std::string chat_request_body(const InstructionPrompt& prompt, const std::string& model);

}  // namespace iamm
