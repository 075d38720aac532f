#include "iamm/instruction.hpp"

#include <fstream>
#include <sstream>

#include "iamm/errors.hpp"

namespace iamm {

InstructionTemplate parse_instruction_template(std::string_view text) {
  InstructionTemplate t;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t end = std::min(text.find('\n', pos), text.size());
    std::string_view line = text.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line == "---") {
      t.system = std::string(text.substr(0, pos));
      if (!t.system.empty() && t.system.back() == '\n') t.system.pop_back();
      t.user = std::string(text.substr(std::min(end + 1, text.size())));
      return t;
    }
    if (end == text.size()) break;
    pos = end + 1;
  }
  t.user = std::string(text);
  return t;
}

InstructionTemplate load_instruction_template(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open instruction template " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_instruction_template(ss.str());
}

std::string render_associations(const std::vector<AssociationGroup>& groups) {
  std::string out;
  bool first_group = true;
  for (const auto& g : groups) {
    if (g.pairs.empty()) continue;
    if (!first_group) out += '\n';
    first_group = false;
    if (!g.label.empty()) out += g.label + ": ";
    for (std::size_t i = 0; i < g.pairs.size(); ++i) {
      if (i) out += ", ";
      out += "(" + g.pairs[i].first + ", " + g.pairs[i].second + ")";
    }
  }
  return out;
}

std::string render_dialogue(const Dialogue& d) {
  std::string out;
  for (std::size_t i = 0; i < d.utterances.size(); ++i) {
    if (i) out += '\n';
    out += std::string(role_name(d.utterances[i].role)) + ": " + join_tokens(d.utterances[i].tokens);
  }
  return out;
}

namespace {

std::string substitute(std::string_view text, const std::string& situation, const std::string& dialogue,
                       const std::string& associations) {
  std::string out;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c == '{' && i + 1 < text.size() && text[i + 1] == '{') {
      out += '{';
      ++i;
    } else if (c == '}' && i + 1 < text.size() && text[i + 1] == '}') {
      out += '}';
      ++i;
    } else if (c == '{') {
      const std::size_t close = text.find('}', i);
      if (close == std::string_view::npos) throw TemplateError("instruction template: unterminated placeholder");
      const std::string_view name = text.substr(i + 1, close - i - 1);
      if (name == "situation") {
        out += situation;
      } else if (name == "dialogue") {
        out += dialogue;
      } else if (name == "associations") {
        out += associations;
      } else {
        throw TemplateError("instruction template: unknown placeholder {" + std::string(name) + "}");
      }
      i = close;
    } else if (c == '}') {
      throw TemplateError("instruction template: unmatched '}'");
    } else {
      out += c;
    }
  }
  return out;
}

}  // namespace

InstructionPrompt build_instruction(const Dialogue& d, const std::vector<AssociationGroup>& groups,
                                    const InstructionTemplate& tmpl) {
  bool any = false;
  for (const auto& g : groups) any = any || !g.pairs.empty();
  if (!any) throw InputError("build_instruction: no associated words");
  const std::string situation = join_tokens(d.situation);
  const std::string dialogue = render_dialogue(d);
  const std::string associations = render_associations(groups);
  return {substitute(tmpl.system, situation, dialogue, associations),
          substitute(tmpl.user, situation, dialogue, associations)};
}

InstructionPrompt build_instruction(const Dialogue& d, const std::vector<AssociationGroup>& groups,
                                    const std::string& template_path) {
  return build_instruction(d, groups, load_instruction_template(template_path));
}

}  // namespace iamm
