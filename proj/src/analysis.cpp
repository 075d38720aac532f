#include "iamm/analysis.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include "iamm/errors.hpp"

namespace iamm {

void AssociatedWordCollector::add(const std::string& token, double score, const std::string& dialogue_id) {
  auto& r = by_token_[token];
  r.token = token;
  ++r.count;
  r.weight += score;
  r.dialogues.push_back(dialogue_id);
  ++events_;
}

std::vector<AssociatedWordRecord> AssociatedWordCollector::records() const {
  std::vector<AssociatedWordRecord> out;
  out.reserve(by_token_.size());
  for (const auto& [_, r] : by_token_) out.push_back(r);
  return out;
}

std::vector<AssociatedWordRecord> rank_by_count(std::vector<AssociatedWordRecord> records) {
  std::sort(records.begin(), records.end(), [](const auto& a, const auto& b) {
    if (a.count != b.count) return a.count > b.count;
    if (a.weight != b.weight) return a.weight > b.weight;
    return a.token < b.token;
  });
  return records;
}

std::vector<AssociatedWordRecord> rank_by_weight(std::vector<AssociatedWordRecord> records) {
  std::sort(records.begin(), records.end(), [](const auto& a, const auto& b) {
    if (a.weight != b.weight) return a.weight > b.weight;
    if (a.count != b.count) return a.count > b.count;
    return a.token < b.token;
  });
  return records;
}

std::vector<Tokens> dialogue_documents(const std::vector<Dialogue>& corpus) {
  std::vector<Tokens> docs;
  docs.reserve(corpus.size());
  for (const auto& d : corpus) {
    Tokens doc = d.situation;
    for (const auto& u : d.utterances) doc.insert(doc.end(), u.tokens.begin(), u.tokens.end());
    doc.insert(doc.end(), d.response.begin(), d.response.end());
    docs.push_back(std::move(doc));
  }
  return docs;
}

IdfTable::IdfTable(const std::vector<Tokens>& documents) : n_(documents.size()) {
  for (const auto& doc : documents) {
    const std::set<std::string> seen(doc.begin(), doc.end());
    for (const auto& t : seen) ++df_[t];
  }
}

std::size_t IdfTable::document_frequency(const std::string& token) const {
  auto it = df_.find(token);
  return it == df_.end() ? 0 : it->second;
}

double IdfTable::idf(const std::string& token) const {
  if (n_ == 0) throw InputError("idf: empty corpus");
  return std::log(static_cast<double>(n_) / (1.0 + static_cast<double>(document_frequency(token))));
}

double IdfTable::corpus_mean() const {
  if (df_.empty()) throw InputError("idf: empty corpus");
  // Sum in token order so the result does not depend on hash iteration order.
  const std::map<std::string, std::size_t> ordered(df_.begin(), df_.end());
  double s = 0.0;
  for (const auto& [t, _] : ordered) s += idf(t);
  return s / static_cast<double>(ordered.size());
}

double IntensityLexicon::intensity(const std::string& token) const {
  auto it = values.find(token);
  return it == values.end() ? default_intensity : it->second;
}

IntensityLexicon read_lexicon(std::istream& in) {
  IntensityLexicon lex;
  std::string line;
  std::size_t line_no = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!header) {
      if (line != "token,intensity") throw ParseError("lexicon line 1: expected header \"token,intensity\"");
      header = true;
      continue;
    }
    const auto comma = line.rfind(',');
    if (comma == std::string::npos || comma == 0)
      throw ParseError("lexicon line " + std::to_string(line_no) + ": expected token,intensity");
    const std::string token = line.substr(0, comma);
    const std::string num = line.substr(comma + 1);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(num.data(), num.data() + num.size(), v);
    if (ec != std::errc() || ptr != num.data() + num.size())
      throw ParseError("lexicon line " + std::to_string(line_no) + ": bad intensity \"" + num + "\"");
    if (!(v >= 0.0 && v <= 1.0))
      throw SchemaError("lexicon line " + std::to_string(line_no) + ": intensity outside [0, 1]");
    lex.values[token] = v;
  }
  if (!header) throw ParseError("lexicon: missing header");
  return lex;
}

IntensityLexicon load_lexicon(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open lexicon " + path);
  return read_lexicon(in);
}

Curve idf_curves(const std::vector<AssociatedWordRecord>& records, const IdfTable& idf,
                 const std::vector<std::size_t>& k_grid) {
  return ranked_curve(records, [&](const std::string& t) { return idf.idf(t); }, idf.corpus_mean(), k_grid);
}

Curve intensity_curves(const std::vector<AssociatedWordRecord>& records, const IntensityLexicon& lexicon,
                       const std::vector<Tokens>& documents, const std::vector<std::size_t>& k_grid) {
  std::set<std::string> types;
  for (const auto& doc : documents) types.insert(doc.begin(), doc.end());
  if (types.empty()) throw InputError("intensity curves: empty corpus");
  double s = 0.0;
  for (const auto& t : types) s += lexicon.intensity(t);
  const double mean = s / static_cast<double>(types.size());
  return ranked_curve(records, [&](const std::string& t) { return lexicon.intensity(t); }, mean, k_grid);
}

std::vector<std::size_t> default_k_grid(std::size_t max_k) {
  std::vector<std::size_t> k;
  for (std::size_t i = 1; i <= max_k; ++i) k.push_back(i);
  return k;
}

namespace {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& s, std::size_t line_no) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw ParseError("plot csv line " + std::to_string(line_no) + ": bad number \"" + s + "\"");
  return v;
}

}  // namespace

void write_plot_csv(const Curve& curve, std::ostream& out) {
  out << "k,count_ranked_value,weight_ranked_value,corpus_mean\n";
  for (const auto& p : curve)
    out << p.k << ',' << format_double(p.count_ranked) << ',' << format_double(p.weight_ranked) << ','
        << format_double(p.corpus_mean) << '\n';
}

void emit_plot_csv(const Curve& curve, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  write_plot_csv(curve, out);
  if (!out) throw IoError("write failed for " + path);
}

Curve read_plot_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "k,count_ranked_value,weight_ranked_value,corpus_mean")
    throw ParseError("plot csv: bad header");
  Curve out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.size() != 4) throw ParseError("plot csv line " + std::to_string(line_no) + ": expected 4 fields");
    CurvePoint p;
    p.k = static_cast<std::size_t>(parse_double(f[0], line_no));
    p.count_ranked = parse_double(f[1], line_no);
    p.weight_ranked = parse_double(f[2], line_no);
    p.corpus_mean = parse_double(f[3], line_no);
    out.push_back(p);
  }
  return out;
}

}  // namespace iamm
