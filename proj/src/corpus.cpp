#include "iamm/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <set>
#include <random>
#include <sstream>

#include "json.hpp"

namespace iamm {

using nlohmann::json;

namespace {

constexpr std::array<std::string_view, kNumEmotions> kEmotionLabels = {
    "afraid",    "angry",      "annoyed",   "anticipating", "anxious",     "apprehensive", "ashamed",   "caring",
    "confident", "content",    "devastated", "disappointed", "disgusted",  "embarrassed",  "excited",   "faithful",
    "furious",   "grateful",   "guilty",    "hopeful",      "impressed",   "jealous",      "joyful",    "lonely",
    "nostalgic", "prepared",   "proud",     "sad",          "sentimental", "surprised",    "terrified", "trusting"};

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

const json& require(const json& obj, const char* key, const char* what) {
  auto it = obj.find(key);
  if (it == obj.end()) throw SchemaError(std::string(what) + ": missing \"" + key + "\"");
  return *it;
}

std::string require_string(const json& obj, const char* key, const char* what) {
  const json& v = require(obj, key, what);
  if (!v.is_string()) throw SchemaError(std::string(what) + ": \"" + key + "\" must be a string");
  return v.get<std::string>();
}

std::string source_key(std::size_t i) { return i == 0 ? "situation" : "u" + std::to_string(i); }

}  // namespace

const std::array<std::string_view, kNumEmotions>& emotion_labels() { return kEmotionLabels; }

int emotion_id(std::string_view label) {
  const std::string l = lower(label);
  for (int i = 0; i < kNumEmotions; ++i)
    if (kEmotionLabels[static_cast<std::size_t>(i)] == l) return i;
  throw SchemaError("unknown emotion label: " + std::string(label));
}

Tokens tokenize(std::string_view text) {
  Tokens out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      flush();
    } else if (std::ispunct(c)) {
      flush();
      out.emplace_back(1, ch);
    } else {
      cur.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  flush();
  return out;
}

std::string join_tokens(const Tokens& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

std::string_view role_name(Role role) { return role == Role::kSpeaker ? "speaker" : "listener"; }

Role parse_role(std::string_view name) {
  if (name == "speaker") return Role::kSpeaker;
  if (name == "listener") return Role::kListener;
  throw SchemaError("unknown role: " + std::string(name));
}

Dialogue parse_dialogue(std::string_view json_line) {
  json j;
  try {
    j = json::parse(json_line);
  } catch (const json::parse_error& e) {
    throw ParseError(e.what());
  }
  if (!j.is_object()) throw SchemaError("dialogue: expected a JSON object");
  Dialogue d;
  d.id = require_string(j, "id", "dialogue");
  d.situation = tokenize(require_string(j, "situation", "dialogue"));
  d.emotion = emotion_id(require_string(j, "emotion", "dialogue"));
  const json& utts = require(j, "utterances", "dialogue");
  if (!utts.is_array()) throw SchemaError("dialogue: \"utterances\" must be an array");
  for (const json& u : utts) {
    if (!u.is_object()) throw SchemaError("utterance: expected an object");
    Utterance utt;
    utt.role = parse_role(require_string(u, "role", "utterance"));
    utt.tokens = tokenize(require_string(u, "text", "utterance"));
    if (utt.tokens.empty()) throw SchemaError("utterance: empty text in dialogue " + d.id);
    d.utterances.push_back(std::move(utt));
  }
  if (auto it = j.find("response"); it != j.end()) {
    if (!it->is_string()) throw SchemaError("dialogue: \"response\" must be a string");
    d.response = tokenize(it->get<std::string>());
  } else if (d.utterances.size() > 1 && d.utterances.back().role == Role::kListener) {
    // Empathetic-Dialogues convention: the closing listener turn is the target.
    d.response = std::move(d.utterances.back().tokens);
    d.utterances.pop_back();
  }
  if (d.utterances.empty()) throw SchemaError("dialogue " + d.id + ": no utterances");
  if (d.situation.empty()) throw SchemaError("dialogue " + d.id + ": empty situation");
  return d;
}

std::string dialogue_to_json(const Dialogue& d) {
  json j;
  j["id"] = d.id;
  j["situation"] = join_tokens(d.situation);
  j["emotion"] = std::string(kEmotionLabels.at(static_cast<std::size_t>(d.emotion)));
  json utts = json::array();
  for (const auto& u : d.utterances) utts.push_back({{"role", role_name(u.role)}, {"text", join_tokens(u.tokens)}});
  j["utterances"] = std::move(utts);
  if (!d.response.empty()) j["response"] = join_tokens(d.response);
  return j.dump();
}

std::vector<Dialogue> read_corpus(std::istream& in) {
  std::vector<Dialogue> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    try {
      out.push_back(parse_dialogue(line));
    } catch (const ParseError& e) {
      throw ParseError("corpus line " + std::to_string(line_no) + ": " + e.what());
    } catch (const SchemaError& e) {
      throw SchemaError("corpus line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::vector<Dialogue> load_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open corpus file: " + path);
  return read_corpus(in);
}

void write_corpus(const std::vector<Dialogue>& corpus, std::ostream& out) {
  for (const auto& d : corpus) out << dialogue_to_json(d) << '\n';
}

std::size_t KnowledgeSet::placeholder_count() const {
  std::size_t n = 0;
  for (const auto& p : placeholder) n += static_cast<std::size_t>(std::count(p.begin(), p.end(), true));
  return n;
}

namespace {

KnowledgeSet placeholder_set(std::size_t sources) {
  KnowledgeSet k;
  k.sources.resize(sources);
  k.placeholder.resize(sources);
  for (std::size_t s = 0; s < sources; ++s) {
    for (int r = 0; r < kNumRelations; ++r) {
      k.sources[s][static_cast<std::size_t>(r)] = {std::string(kPlaceholderToken)};
      k.placeholder[s][static_cast<std::size_t>(r)] = true;
    }
  }
  return k;
}

}  // namespace

KnowledgeMap read_knowledge(std::istream& in, const std::vector<Dialogue>& corpus, KnowledgeReport* report) {
  std::unordered_map<std::string, const Dialogue*> by_id;
  for (const auto& d : corpus) by_id.emplace(d.id, &d);

  KnowledgeReport rep;
  KnowledgeMap out;
  std::unordered_map<std::string, bool> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError("knowledge line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!j.is_object()) throw SchemaError("knowledge line " + std::to_string(line_no) + ": expected an object");
    const std::string id = require_string(j, "id", "knowledge");
    if (seen.count(id)) throw SchemaError("knowledge: duplicate id " + id);
    seen.emplace(id, true);
    ++rep.entries;
    auto dit = by_id.find(id);
    if (dit == by_id.end()) {
      ++rep.unmatched;
      continue;
    }
    const json& sources = require(j, "sources", "knowledge");
    if (!sources.is_object()) throw SchemaError("knowledge " + id + ": \"sources\" must be an object");
    KnowledgeSet k = placeholder_set(dit->second->utterances.size() + 1);
    for (std::size_t s = 0; s < k.sources.size(); ++s) {
      auto sit = sources.find(source_key(s));
      if (sit == sources.end()) continue;
      if (!sit->is_object()) throw SchemaError("knowledge " + id + ": source must be an object");
      for (int r = 0; r < kNumRelations; ++r) {
        auto rit = sit->find(std::string(kRelations[static_cast<std::size_t>(r)]));
        if (rit == sit->end()) continue;
        if (!rit->is_string()) throw SchemaError("knowledge " + id + ": relation text must be a string");
        Tokens toks = tokenize(rit->get<std::string>());
        if (toks.empty()) continue;
        k.sources[s][static_cast<std::size_t>(r)] = std::move(toks);
        k.placeholder[s][static_cast<std::size_t>(r)] = false;
      }
    }
    out.emplace(id, std::move(k));
  }
  for (const auto& d : corpus) {
    if (!out.count(d.id)) out.emplace(d.id, placeholder_set(d.utterances.size() + 1));
    rep.placeholders += out.at(d.id).placeholder_count();
  }
  if (report) *report = rep;
  return out;
}

KnowledgeMap load_knowledge(const std::string& path, const std::vector<Dialogue>& corpus, KnowledgeReport* report) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open knowledge file: " + path);
  return read_knowledge(in, corpus, report);
}

std::string knowledge_to_json(const std::string& id, const KnowledgeSet& k) {
  json sources = json::object();
  for (std::size_t s = 0; s < k.sources.size(); ++s) {
    json rel = json::object();
    for (int r = 0; r < kNumRelations; ++r) {
      const auto ri = static_cast<std::size_t>(r);
      if (!k.placeholder.empty() && k.placeholder[s][ri]) continue;
      rel[std::string(kRelations[ri])] = join_tokens(k.sources[s][ri]);
    }
    sources[source_key(s)] = std::move(rel);
  }
  json j;
  j["id"] = id;
  j["sources"] = std::move(sources);
  return j.dump();
}

void write_knowledge(const std::vector<Dialogue>& corpus, const KnowledgeMap& knowledge, std::ostream& out) {
  for (const auto& d : corpus) {
    auto it = knowledge.find(d.id);
    if (it != knowledge.end()) out << knowledge_to_json(d.id, it->second) << '\n';
  }
}

Vocab::Vocab() {
  for (const char* t : {"[PAD]", "[CLS]", "[BOS]", "[EOS]", "[UNK]"}) add(t);
}

Index Vocab::add(const std::string& token) {
  auto it = ids_.find(token);
  if (it != ids_.end()) return it->second;
  const Index id = size();
  tokens_.push_back(token);
  ids_.emplace(token, id);
  return id;
}

Index Vocab::id(const std::string& token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? kUnk : it->second;
}

const std::string& Vocab::token(Index id) const {
  if (id < 0 || id >= size()) throw InputError("vocab: id out of range");
  return tokens_[static_cast<std::size_t>(id)];
}

std::vector<Index> Vocab::encode(const Tokens& tokens) const {
  std::vector<Index> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(id(t));
  return out;
}

Vocab build_vocab(const std::vector<Dialogue>& corpus, const KnowledgeMap& knowledge, int min_freq) {
  if (min_freq < 1) throw InputError("build_vocab: min_freq must be >= 1");
  std::map<std::string, long> freq;
  auto count = [&](const Tokens& toks) {
    for (const auto& t : toks) ++freq[t];
  };
  for (const auto& d : corpus) {
    count(d.situation);
    for (const auto& u : d.utterances) count(u.tokens);
    count(d.response);
    auto it = knowledge.find(d.id);
    if (it == knowledge.end()) continue;
    for (const auto& src : it->second.sources)
      for (const auto& rel : src) count(rel);
  }
  std::vector<std::pair<std::string, long>> kept;
  for (auto& [tok, n] : freq)
    if (n >= min_freq) kept.emplace_back(tok, n);
  std::stable_sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  Vocab v;
  for (const auto& [tok, n] : kept) v.add(tok);
  return v;
}

std::vector<Index> EncodedDialogue::context_ids() const {
  std::vector<Index> out;
  for (const auto& u : utterances) out.insert(out.end(), u.begin(), u.end());
  return out;
}

EncodedDialogue encode_dialogue(const Dialogue& d, const KnowledgeSet& k, const Vocab& vocab) {
  auto with_cls = [&](const Tokens& toks) {
    std::vector<Index> ids{Vocab::kCls};
    for (const auto& t : toks) ids.push_back(vocab.id(t));
    return ids;
  };
  EncodedDialogue e;
  e.id = d.id;
  e.emotion = d.emotion;
  e.situation = with_cls(d.situation);
  for (const auto& u : d.utterances) {
    e.utterances.push_back(with_cls(u.tokens));
    e.roles.push_back(u.role);
  }
  e.response = vocab.encode(d.response);
  if (k.sources.size() != d.utterances.size() + 1)
    throw SchemaError("knowledge for " + d.id + " has " + std::to_string(k.sources.size()) + " sources, expected " +
                      std::to_string(d.utterances.size() + 1));
  for (const auto& src : k.sources) {
    std::array<std::vector<Index>, kNumRelations> rel;
    for (std::size_t r = 0; r < rel.size(); ++r) rel[r] = with_cls(src[r]);
    e.knowledge.push_back(std::move(rel));
  }
  return e;
}

std::vector<EncodedDialogue> encode_corpus(const std::vector<Dialogue>& corpus, const KnowledgeMap& knowledge,
                                           const Vocab& vocab) {
  std::vector<EncodedDialogue> out;
  out.reserve(corpus.size());
  for (const auto& d : corpus) {
    auto it = knowledge.find(d.id);
    if (it == knowledge.end()) throw SchemaError("no knowledge for dialogue " + d.id);
    out.push_back(encode_dialogue(d, it->second, vocab));
  }
  return out;
}

BatchIterator::BatchIterator(const std::vector<EncodedDialogue>& corpus, std::size_t batch_size, Index pad_id,
                             std::vector<std::size_t> order)
    : corpus_(&corpus), batch_size_(batch_size), pad_id_(pad_id), order_(std::move(order)) {
  if (batch_size_ < 1) throw InputError("batch: batch_size must be >= 1");
  if (order_.empty()) {
    order_.resize(corpus.size());
    for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
  }
  for (std::size_t i : order_)
    if (i >= corpus.size()) throw InputError("batch: order index out of range");
}

std::size_t BatchIterator::batch_count() const { return (order_.size() + batch_size_ - 1) / batch_size_; }

std::optional<Batch> BatchIterator::next() {
  if (pos_ >= order_.size()) return std::nullopt;
  Batch b;
  const std::size_t end = std::min(order_.size(), pos_ + batch_size_);
  b.indices.assign(order_.begin() + static_cast<std::ptrdiff_t>(pos_), order_.begin() + static_cast<std::ptrdiff_t>(end));
  pos_ = end;
  auto pad = [&](std::vector<std::vector<Index>>& seqs, std::vector<std::vector<bool>>& masks) {
    std::size_t longest = 0;
    for (const auto& s : seqs) longest = std::max(longest, s.size());
    masks.clear();
    for (auto& s : seqs) {
      std::vector<bool> m(longest, false);
      for (std::size_t t = s.size(); t < longest; ++t) m[t] = true;
      s.resize(longest, pad_id_);
      masks.push_back(std::move(m));
    }
  };
  for (std::size_t i : b.indices) {
    const auto& d = (*corpus_)[i];
    b.situation.push_back(d.situation);
    b.context.push_back(d.context_ids());
    b.response.push_back(d.response);
  }
  pad(b.situation, b.situation_mask);
  pad(b.context, b.context_mask);
  pad(b.response, b.response_mask);
  return b;
}

BatchIterator batch(const std::vector<EncodedDialogue>& corpus, std::size_t batch_size, Index pad_id,
                    std::vector<std::size_t> order) {
  return BatchIterator(corpus, batch_size, pad_id, std::move(order));
}

std::vector<std::pair<std::string, std::string>> SyntheticSpec::resolved_pairs() const {
  if (!planted_pairs.empty()) return planted_pairs;
  std::vector<std::pair<std::string, std::string>> out;
  for (int c = 0; c < num_classes; ++c) out.emplace_back("s" + std::to_string(c), "u" + std::to_string(c));
  return out;
}

void SyntheticSpec::validate() const {
  if (num_dialogues < 1) throw ConfigError("synthetic: num_dialogues must be >= 1");
  if (num_classes < 1 || num_classes > kNumEmotions) throw ConfigError("synthetic: num_classes must be in [1, 32]");
  if (vocab_size < 1) throw ConfigError("synthetic: vocab_size must be >= 1");
  if (min_utterances < 1 || max_utterances < min_utterances) throw ConfigError("synthetic: bad utterance range");
  if (min_length < 1 || max_length < min_length) throw ConfigError("synthetic: bad length range");
  const auto pairs = resolved_pairs();
  if (static_cast<int>(pairs.size()) != num_classes) throw ConfigError("synthetic: need one planted pair per class");
  std::map<std::string, int> owner;
  for (std::size_t c = 0; c < pairs.size(); ++c) {
    for (const auto* t : {&pairs[c].first, &pairs[c].second}) {
      if (tokenize(*t) != Tokens{*t}) throw ConfigError("synthetic: planted token must be a single lowercase word: " + *t);
      auto [it, fresh] = owner.emplace(*t, static_cast<int>(c));
      if (!fresh) throw ConfigError("synthetic: planted pairs must be disjoint across classes: " + *t);
    }
  }
}

SyntheticSpec parse_synthetic_spec(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("synthetic spec: ") + e.what());
  }
  if (!j.is_object()) throw SchemaError("synthetic spec: expected a JSON object");
  static const std::set<std::string> known{"num_dialogues", "num_classes", "planted_pairs", "vocab_size", "min_utterances",
                                           "max_utterances", "min_length", "max_length", "seed"};
  for (const auto& [key, value] : j.items())
    if (!known.count(key)) throw ConfigError("synthetic spec: unknown field " + key);
  SyntheticSpec s;
  try {
    s.num_dialogues = j.value("num_dialogues", s.num_dialogues);
    s.num_classes = j.value("num_classes", s.num_classes);
    s.vocab_size = j.value("vocab_size", s.vocab_size);
    s.min_utterances = j.value("min_utterances", s.min_utterances);
    s.max_utterances = j.value("max_utterances", s.max_utterances);
    s.min_length = j.value("min_length", s.min_length);
    s.max_length = j.value("max_length", s.max_length);
    s.seed = j.value("seed", s.seed);
    if (auto it = j.find("planted_pairs"); it != j.end())
      s.planted_pairs = it->get<std::vector<std::pair<std::string, std::string>>>();
  } catch (const json::exception& e) {
    throw SchemaError(std::string("synthetic spec: ") + e.what());
  }
  s.validate();
  return s;
}

std::string synthetic_spec_to_json(const SyntheticSpec& s) {
  json j;
  j["num_dialogues"] = s.num_dialogues;
  j["num_classes"] = s.num_classes;
  j["planted_pairs"] = s.resolved_pairs();
  j["vocab_size"] = s.vocab_size;
  j["min_utterances"] = s.min_utterances;
  j["max_utterances"] = s.max_utterances;
  j["min_length"] = s.min_length;
  j["max_length"] = s.max_length;
  j["seed"] = s.seed;
  return j.dump(2);
}

SyntheticCorpus generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  const auto pairs = spec.resolved_pairs();
  std::mt19937_64 rng(spec.seed);
  auto uniform = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  auto fillers = [&](int n) {
    Tokens t;
    for (int i = 0; i < n; ++i) t.push_back("w" + std::to_string(uniform(0, spec.vocab_size - 1)));
    return t;
  };
  auto plant = [&](Tokens& t, const std::string& token) {
    t.insert(t.begin() + uniform(0, static_cast<int>(t.size())), token);
  };

  SyntheticCorpus out;
  for (int n = 0; n < spec.num_dialogues; ++n) {
    const int c = uniform(0, spec.num_classes - 1);
    const auto& [sit_tok, utt_tok] = pairs[static_cast<std::size_t>(c)];
    Dialogue d;
    d.id = "syn-" + std::to_string(n);
    d.emotion = c;
    d.situation = fillers(uniform(spec.min_length, spec.max_length));
    plant(d.situation, sit_tok);
    const int m = uniform(spec.min_utterances, spec.max_utterances);
    for (int i = 0; i < m; ++i) {
      // Roles alternate so that the final utterance is the speaker's.
      Utterance u;
      u.role = (m - 1 - i) % 2 == 0 ? Role::kSpeaker : Role::kListener;
      u.tokens = fillers(uniform(spec.min_length, spec.max_length));
      if (i == m - 1) plant(u.tokens, utt_tok);
      d.utterances.push_back(std::move(u));
    }
    d.response = {SyntheticSpec::response_token(c)};
    for (const auto& t : fillers(uniform(1, 2))) d.response.push_back(t);

    KnowledgeSet k;
    k.sources.resize(static_cast<std::size_t>(m) + 1);
    k.placeholder.resize(static_cast<std::size_t>(m) + 1);
    for (auto& src : k.sources)
      for (auto& rel : src) rel = fillers(uniform(2, 3));
    for (auto& p : k.placeholder) p.fill(false);
    k.sources[0][1] = {"to", "feel", sit_tok};  // situation xReact
    out.knowledge.emplace(d.id, std::move(k));
    out.dialogues.push_back(std::move(d));
  }
  return out;
}

}  // namespace iamm
