#pragma once

// Binary checkpoints: a magic tag, a JSON header (config, vocabulary,
// counters, tensor table) and the raw parameter tensors followed by the Adam
// moments, all at the model's precision. Loading reproduces every value
// bit-for-bit.

#include <fstream>
#include <iosfwd>
#include <memory>
#include <string>
#include <type_traits>
#include <vector>

#include "iamm/config.hpp"
#include "iamm/corpus.hpp"
#include "iamm/model.hpp"
#include "iamm/optimizer.hpp"

namespace iamm {

struct TensorInfo {
  std::string name;
  Index rows = 0;
  Index cols = 0;
};

struct CheckpointHeader {
  RunConfig config;
  std::string precision;  // "float" or "double"
  std::vector<std::string> vocab;
  long iteration = 0;
  long adam_step = 0;
  bool moments = false;
  std::vector<TensorInfo> tensors;
};

void write_checkpoint_header(std::ostream& out, const CheckpointHeader& h);
CheckpointHeader read_checkpoint_header(std::istream& in);
CheckpointHeader peek_checkpoint(const std::string& path);

Vocab vocab_from_tokens(const std::vector<std::string>& tokens);

template <typename Scalar>
constexpr const char* precision_name() {
  return std::is_same_v<Scalar, double> ? "double" : "float";
}

template <typename Scalar>
struct LoadedCheckpoint {
  std::unique_ptr<IammModel<Scalar>> model;
  Vocab vocab;
  AdamState<Scalar> adam;
  long iteration = 0;
};

template <typename Scalar>
void save_checkpoint(const std::string& path, const IammModel<Scalar>& model, const Vocab& vocab,
                     const AdamState<Scalar>* adam, long iteration) {
  CheckpointHeader h;
  h.config = model.config();
  h.precision = precision_name<Scalar>();
  h.vocab = vocab.tokens();
  h.iteration = iteration;
  h.adam_step = adam ? adam->step : 0;
  h.moments = adam != nullptr;
  for (const auto& p : model.params()) h.tensors.push_back({p.name, p.value.rows(), p.value.cols()});
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint " + path);
  write_checkpoint_header(out, h);
  auto write = [&](const Matrix<Scalar>& m) {
    out.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(Scalar)));
  };
  for (const auto& p : model.params()) write(p.value);
  if (adam) {
    for (const auto& m : adam->m) write(m);
    for (const auto& v : adam->v) write(v);
  }
  if (!out) throw IoError("write failed for checkpoint " + path);
}

template <typename Scalar>
LoadedCheckpoint<Scalar> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path);
  const CheckpointHeader h = read_checkpoint_header(in);
  if (h.precision != precision_name<Scalar>())
    throw SchemaError("checkpoint " + path + " stores " + h.precision + " tensors");
  LoadedCheckpoint<Scalar> out;
  out.vocab = vocab_from_tokens(h.vocab);
  out.model = std::make_unique<IammModel<Scalar>>(h.config, out.vocab.size());
  out.iteration = h.iteration;
  auto& params = out.model->params();
  if (params.count() != h.tensors.size()) throw SchemaError("checkpoint " + path + ": parameter count mismatch");
  auto read = [&](Matrix<Scalar>& m) {
    in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(Scalar)));
    if (!in) throw SchemaError("checkpoint " + path + ": truncated tensor data");
  };
  std::size_t i = 0;
  for (auto& p : params) {
    const auto& t = h.tensors[i++];
    if (t.name != p.name || t.rows != p.value.rows() || t.cols != p.value.cols())
      throw SchemaError("checkpoint " + path + ": tensor " + t.name + " does not match the model");
    read(p.value);
  }
  if (h.moments) {
    out.adam.step = h.adam_step;
    for (auto* moments : {&out.adam.m, &out.adam.v}) {
      for (const auto& p : params) {
        moments->push_back(Matrix<Scalar>(p.value.rows(), p.value.cols()));
        read(moments->back());
      }
    }
  }
  return out;
}

}  // namespace iamm
