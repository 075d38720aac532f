#include "iamm/checkpoint.hpp"

#include <cstdint>
#include <istream>
#include <ostream>

#include "json.hpp"

namespace iamm {

using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'I', 'A', 'M', 'M', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

}  // namespace

void write_checkpoint_header(std::ostream& out, const CheckpointHeader& h) {
  json tensors = json::array();
  for (const auto& t : h.tensors) tensors.push_back({{"name", t.name}, {"rows", t.rows}, {"cols", t.cols}});
  const json j{{"config", json::parse(run_config_to_json(h.config))},
               {"precision", h.precision},
               {"vocab", h.vocab},
               {"iteration", h.iteration},
               {"adam_step", h.adam_step},
               {"moments", h.moments},
               {"tensors", std::move(tensors)}};
  const std::string text = j.dump();
  const std::uint64_t len = text.size();
  out.write(kMagic, sizeof kMagic);
  out.write(reinterpret_cast<const char*>(&kVersion), sizeof kVersion);
  out.write(reinterpret_cast<const char*>(&len), sizeof len);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
}

CheckpointHeader read_checkpoint_header(std::istream& in) {
  char magic[sizeof kMagic];
  std::uint32_t version = 0;
  std::uint64_t len = 0;
  in.read(magic, sizeof magic);
  if (!in || !std::equal(magic, magic + sizeof magic, kMagic)) throw SchemaError("not an IAMM checkpoint");
  in.read(reinterpret_cast<char*>(&version), sizeof version);
  in.read(reinterpret_cast<char*>(&len), sizeof len);
  if (!in || version != kVersion) throw SchemaError("unsupported checkpoint version");
  if (len > (std::uint64_t(1) << 32)) throw SchemaError("checkpoint header too large");
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw SchemaError("truncated checkpoint header");
  CheckpointHeader h;
  try {
    const json j = json::parse(text);
    h.config = parse_run_config(j.at("config").dump());
    h.precision = j.at("precision").get<std::string>();
    h.vocab = j.at("vocab").get<std::vector<std::string>>();
    h.iteration = j.at("iteration").get<long>();
    h.adam_step = j.at("adam_step").get<long>();
    h.moments = j.at("moments").get<bool>();
    for (const auto& t : j.at("tensors"))
      h.tensors.push_back({t.at("name").get<std::string>(), t.at("rows").get<Index>(), t.at("cols").get<Index>()});
  } catch (const json::exception& e) {
    throw SchemaError(std::string("checkpoint header: ") + e.what());
  }
  return h;
}

CheckpointHeader peek_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path);
  return read_checkpoint_header(in);
}

Vocab vocab_from_tokens(const std::vector<std::string>& tokens) {
  Vocab v;
  if (tokens.size() < static_cast<std::size_t>(Vocab::kReserved)) throw SchemaError("vocabulary lacks reserved tokens");
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i < static_cast<std::size_t>(Vocab::kReserved)) {
      if (v.token(static_cast<Index>(i)) != tokens[i]) throw SchemaError("vocabulary reserved tokens out of order");
      continue;
    }
    if (v.add(tokens[i]) != static_cast<Index>(i)) throw SchemaError("vocabulary has duplicate token " + tokens[i]);
  }
  return v;
}

}  // namespace iamm
