#pragma once

// Dialogue corpus, commonsense knowledge, vocabulary, batching and the
// planted-pair synthetic corpus.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "iamm/autodiff.hpp"
#include "iamm/types.hpp"

namespace iamm {

using Tokens = std::vector<std::string>;

// The 32 Empathetic-Dialogues labels, alphabetical; position is the label id.
const std::array<std::string_view, kNumEmotions>& emotion_labels();
int emotion_id(std::string_view label);

// Lowercases, splits on whitespace and separates ASCII punctuation into
// single-character tokens.
Tokens tokenize(std::string_view text);
std::string join_tokens(const Tokens& tokens);

std::string_view role_name(Role role);
Role parse_role(std::string_view name);

struct Utterance {
  Role role = Role::kSpeaker;
  Tokens tokens;

  bool operator==(const Utterance&) const = default;
};

struct Dialogue {
  std::string id;
  Tokens situation;
  std::vector<Utterance> utterances;
  int emotion = 0;
  Tokens response;  // empty when the source line carries no response

  bool operator==(const Dialogue&) const = default;
};

// Parses one corpus line. Throws ParseError on malformed JSON and
// SchemaError on missing fields, unknown roles or unknown emotions.
Dialogue parse_dialogue(std::string_view json_line);
std::string dialogue_to_json(const Dialogue& d);

std::vector<Dialogue> read_corpus(std::istream& in);
std::vector<Dialogue> load_corpus(const std::string& path);
void write_corpus(const std::vector<Dialogue>& corpus, std::ostream& out);

inline constexpr std::string_view kPlaceholderToken = "[none]";

// Relation texts per source: index 0 is the situation, index i >= 1 is
// utterance U_i.
struct KnowledgeSet {
  std::vector<std::array<Tokens, kNumRelations>> sources;
  std::vector<std::array<bool, kNumRelations>> placeholder;

  const std::array<Tokens, kNumRelations>& situation() const { return sources.at(0); }
  const std::array<Tokens, kNumRelations>& utterance(std::size_t i) const { return sources.at(i); }
  std::size_t placeholder_count() const;
  bool operator==(const KnowledgeSet&) const = default;
};

using KnowledgeMap = std::unordered_map<std::string, KnowledgeSet>;

struct KnowledgeReport {
  std::size_t entries = 0;       // knowledge lines read
  std::size_t placeholders = 0;  // relation slots filled with the placeholder
  std::size_t unmatched = 0;     // lines whose id is not in the corpus
};

// Reads knowledge JSONL and completes it against `corpus`: every dialogue
// gets a set with one source per situation/utterance and five relations per
// source. Duplicate ids throw SchemaError.
KnowledgeMap read_knowledge(std::istream& in, const std::vector<Dialogue>& corpus, KnowledgeReport* report = nullptr);
KnowledgeMap load_knowledge(const std::string& path, const std::vector<Dialogue>& corpus,
                            KnowledgeReport* report = nullptr);
std::string knowledge_to_json(const std::string& id, const KnowledgeSet& k);
void write_knowledge(const std::vector<Dialogue>& corpus, const KnowledgeMap& knowledge, std::ostream& out);

class Vocab {
 public:
  static constexpr Index kPad = 0;
  static constexpr Index kCls = 1;
  static constexpr Index kBos = 2;
  static constexpr Index kEos = 3;
  static constexpr Index kUnk = 4;
  static constexpr Index kReserved = 5;

  Vocab();

  Index add(const std::string& token);
  Index id(const std::string& token) const;  // kUnk when absent
  bool contains(const std::string& token) const { return ids_.count(token) != 0; }
  const std::string& token(Index id) const;
  Index size() const { return static_cast<Index>(tokens_.size()); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  static bool is_reserved(Index id) { return id >= 0 && id < kReserved; }

  std::vector<Index> encode(const Tokens& tokens) const;
  bool operator==(const Vocab& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, Index> ids_;
};

// Kept tokens (frequency >= min_freq) are ordered by descending frequency,
// then lexicographically.
Vocab build_vocab(const std::vector<Dialogue>& corpus, const KnowledgeMap& knowledge, int min_freq);

// Token ids for one dialogue; every sequence here already carries its [CLS].
struct EncodedDialogue {
  std::string id;
  std::vector<Index> situation;                // [CLS] + situation
  std::vector<std::vector<Index>> utterances;  // [CLS] + U_i
  std::vector<Role> roles;
  std::vector<Index> response;  // response tokens, without [BOS]/[EOS]
  int emotion = 0;
  // knowledge[0] situation, knowledge[i] utterance i; [CLS] + relation text
  std::vector<std::array<std::vector<Index>, kNumRelations>> knowledge;

  // Context token ids aligned with rows of the concatenated utterance encoding.
  std::vector<Index> context_ids() const;
  std::size_t utterance_count() const { return utterances.size(); }
};

EncodedDialogue encode_dialogue(const Dialogue& d, const KnowledgeSet& k, const Vocab& vocab);
std::vector<EncodedDialogue> encode_corpus(const std::vector<Dialogue>& corpus, const KnowledgeMap& knowledge,
                                           const Vocab& vocab);

// One padded batch. Row b of each id matrix belongs to dialogue indices[b];
// mask entries are true exactly at padded positions.
struct Batch {
  std::vector<std::size_t> indices;
  std::vector<std::vector<Index>> situation, context, response;
  std::vector<std::vector<bool>> situation_mask, context_mask, response_mask;
};

class BatchIterator {
 public:
  // `order` lists dialogue indices in visiting order; empty means 0..n-1.
  BatchIterator(const std::vector<EncodedDialogue>& corpus, std::size_t batch_size, Index pad_id,
                std::vector<std::size_t> order = {});
  std::optional<Batch> next();
  std::size_t batch_count() const;

 private:
  const std::vector<EncodedDialogue>* corpus_;
  std::size_t batch_size_;
  Index pad_id_;
  std::vector<std::size_t> order_;
  std::size_t pos_ = 0;
};

BatchIterator batch(const std::vector<EncodedDialogue>& corpus, std::size_t batch_size, Index pad_id = Vocab::kPad,
                    std::vector<std::size_t> order = {});

struct SyntheticSpec {
  int num_dialogues = 500;
  int num_classes = 8;
  // (situation token, utterance token) per class; generated as s<c>/u<c>
  // when empty.
  std::vector<std::pair<std::string, std::string>> planted_pairs;
  int vocab_size = 60;  // filler tokens w0..w<n-1>
  int min_utterances = 2;
  int max_utterances = 3;
  int min_length = 3;  // tokens per utterance / situation before planting
  int max_length = 6;
  std::uint64_t seed = 1;

  // Token every class-c response starts with.
  static std::string response_token(int c) { return "r" + std::to_string(c); }
  std::vector<std::pair<std::string, std::string>> resolved_pairs() const;
  void validate() const;
};

SyntheticSpec parse_synthetic_spec(std::string_view json);
std::string synthetic_spec_to_json(const SyntheticSpec& spec);

struct SyntheticCorpus {
  std::vector<Dialogue> dialogues;
  KnowledgeMap knowledge;
};

SyntheticCorpus generate_synthetic(const SyntheticSpec& spec);

}  // namespace iamm
