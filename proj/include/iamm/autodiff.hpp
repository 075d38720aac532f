#pragma once

// Reverse-mode differentiation over dense row-major Eigen matrices.
//
// A Tape records every operation of one forward pass. Each node owns its
// value, a lazily allocated gradient and a closure that pushes the gradient
// to its inputs. Parameters enter the tape by reference; Tape::backward adds
// their gradients into Parameter::grad so that several tapes (one per
// dialogue of a batch) accumulate into the same parameter.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <deque>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "iamm/errors.hpp"

namespace iamm {

using Index = Eigen::Index;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
struct Parameter {
  std::string name;
  Matrix<Scalar> value;
  Matrix<Scalar> grad;

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
  Index size() const { return value.size(); }
};

template <typename Scalar>
class Tape;

template <typename Scalar>
class Var {
 public:
  Var() = default;
  Var(Tape<Scalar>* tape, std::size_t id) : tape_(tape), id_(id) {}

  const Matrix<Scalar>& value() const { return tape_->value(id_); }
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  Tape<Scalar>* tape() const { return tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape<Scalar>* tape_ = nullptr;
  std::size_t id_ = 0;
};

template <typename Scalar>
class Tape {
 public:
  using Mat = Matrix<Scalar>;
  using Backward = std::function<void(Tape&, const Mat&)>;

  // A tape built with record = false keeps values only (inference).
  explicit Tape(bool record = true) : record_(record) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return record_; }

  Var<Scalar> constant(Mat value) {
    nodes_.push_back(Node{std::move(value), {}, {}, false, nullptr, nullptr});
    return Var<Scalar>(this, nodes_.size() - 1);
  }

  // Repeated calls with the same parameter return the same node.
  Var<Scalar> param(Parameter<Scalar>& p) {
    auto it = param_nodes_.find(&p);
    if (it != param_nodes_.end()) return Var<Scalar>(this, it->second);
    nodes_.push_back(Node{{}, {}, {}, record_, &p, &p.value});
    param_nodes_.emplace(&p, nodes_.size() - 1);
    return Var<Scalar>(this, nodes_.size() - 1);
  }

  // Records an op node. `backward` is dropped when no input needs a gradient.
  Var<Scalar> push(Mat value, bool needs_grad, Backward backward) {
    needs_grad = needs_grad && record_;
    nodes_.push_back(Node{std::move(value), {}, needs_grad ? std::move(backward) : Backward{},
                          needs_grad, nullptr, nullptr});
    return Var<Scalar>(this, nodes_.size() - 1);
  }

  const Mat& value(std::size_t id) const {
    const Node& n = nodes_[id];
    return n.external ? *n.external : n.value;
  }

  bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }
  bool needs_grad(const Var<Scalar>& v) const { return nodes_[v.id()].needs_grad; }

  // Gradient buffer of a node, zero-initialized on first access.
  Mat& grad(std::size_t id) {
    Node& n = nodes_[id];
    if (n.grad.size() == 0) {
      const Mat& v = value(id);
      n.grad.setZero(v.rows(), v.cols());
    }
    return n.grad;
  }

  template <typename Derived>
  void accumulate(std::size_t id, const Eigen::MatrixBase<Derived>& g) {
    if (!nodes_[id].needs_grad) return;
    grad(id) += g;
  }

  std::size_t size() const { return nodes_.size(); }

  // Seeds d(root)/d(root) = 1 for a 1x1 root and runs the closures in reverse.
  void backward(const Var<Scalar>& root) {
    if (!record_) throw InputError("backward on a non-recording tape");
    if (root.rows() != 1 || root.cols() != 1) throw InputError("backward root must be 1x1");
    grad(root.id()).setConstant(Scalar(1));
    for (std::size_t i = root.id() + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.needs_grad || n.grad.size() == 0) continue;
      if (n.param) {
        if (n.param->grad.size() == 0) n.param->zero_grad();
        n.param->grad += n.grad;
      } else if (n.backward) {
        n.backward(*this, n.grad);
      }
    }
  }

 private:
  struct Node {
    Mat value;
    Mat grad;
    Backward backward;
    bool needs_grad;
    Parameter<Scalar>* param;
    const Mat* external;
  };

  bool record_;
  std::deque<Node> nodes_;
  std::unordered_map<const Parameter<Scalar>*, std::size_t> param_nodes_;
};

namespace detail {

template <typename Scalar>
void require_same_tape(const Var<Scalar>& a, const Var<Scalar>& b) {
  if (a.tape() != b.tape()) throw InputError("operands recorded on different tapes");
}

template <typename Scalar>
void require_shape(bool ok, const char* op, const Var<Scalar>& a, const Var<Scalar>& b) {
  if (!ok) {
    throw InputError(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                     std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                     std::to_string(b.cols()));
  }
}

template <typename Scalar>
bool any_grad(const Var<Scalar>& a) {
  return a.tape()->needs_grad(a);
}

template <typename Scalar>
bool any_grad(const Var<Scalar>& a, const Var<Scalar>& b) {
  return a.tape()->needs_grad(a) || b.tape()->needs_grad(b);
}

}  // namespace detail

// Additive mask value; exp() of it underflows to exactly zero.
template <typename Scalar>
constexpr Scalar masked_logit() {
  return Scalar(-1e9);
}

template <typename Scalar>
Var<Scalar> matmul(const Var<Scalar>& a, const Var<Scalar>& b) {
  detail::require_same_tape(a, b);
  detail::require_shape(a.cols() == b.rows(), "matmul", a, b);
  auto* t = a.tape();
  const std::size_t ia = a.id(), ib = b.id();
  return t->push(a.value() * b.value(), detail::any_grad(a, b), [ia, ib](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
    if (tp.needs_grad(ia)) tp.accumulate(ia, g * tp.value(ib).transpose());
    if (tp.needs_grad(ib)) tp.accumulate(ib, tp.value(ia).transpose() * g);
  });
}

// a * b^T
template <typename Scalar>
Var<Scalar> matmul_nt(const Var<Scalar>& a, const Var<Scalar>& b) {
  detail::require_same_tape(a, b);
  detail::require_shape(a.cols() == b.cols(), "matmul_nt", a, b);
  auto* t = a.tape();
  const std::size_t ia = a.id(), ib = b.id();
  return t->push(a.value() * b.value().transpose(), detail::any_grad(a, b),
                 [ia, ib](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
                   if (tp.needs_grad(ia)) tp.accumulate(ia, g * tp.value(ib));
                   if (tp.needs_grad(ib)) tp.accumulate(ib, g.transpose() * tp.value(ia));
                 });
}

template <typename Scalar>
Var<Scalar> operator+(const Var<Scalar>& a, const Var<Scalar>& b) {
  detail::require_same_tape(a, b);
  detail::require_shape(a.rows() == b.rows() && a.cols() == b.cols(), "add", a, b);
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape()->push(a.value() + b.value(), detail::any_grad(a, b),
                        [ia, ib](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
                          tp.accumulate(ia, g);
                          tp.accumulate(ib, g);
                        });
}

template <typename Scalar>
Var<Scalar> operator-(const Var<Scalar>& a, const Var<Scalar>& b) {
  detail::require_same_tape(a, b);
  detail::require_shape(a.rows() == b.rows() && a.cols() == b.cols(), "sub", a, b);
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape()->push(a.value() - b.value(), detail::any_grad(a, b),
                        [ia, ib](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
                          tp.accumulate(ia, g);
                          tp.accumulate(ib, -g);
                        });
}

// alpha * a + beta, elementwise.
template <typename Scalar>
Var<Scalar> affine(const Var<Scalar>& a, Scalar alpha, Scalar beta) {
  const std::size_t ia = a.id();
  Matrix<Scalar> out = (a.value().array() * alpha + beta).matrix();
  return a.tape()->push(std::move(out), detail::any_grad(a), [ia, alpha](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
    tp.accumulate(ia, g * alpha);
  });
}

template <typename Scalar>
Var<Scalar> operator*(Scalar s, const Var<Scalar>& a) {
  return affine(a, s, Scalar(0));
}

// Adds a 1 x cols row to every row of a.
template <typename Scalar>
Var<Scalar> add_row(const Var<Scalar>& a, const Var<Scalar>& row) {
  detail::require_same_tape(a, row);
  detail::require_shape(row.rows() == 1 && row.cols() == a.cols(), "add_row", a, row);
  const std::size_t ia = a.id(), ir = row.id();
  Matrix<Scalar> out = a.value().rowwise() + row.value().row(0);
  return a.tape()->push(std::move(out), detail::any_grad(a, row),
                        [ia, ir](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
                          tp.accumulate(ia, g);
                          if (tp.needs_grad(ir)) tp.accumulate(ir, g.colwise().sum());
                        });
}

template <typename Scalar>
Var<Scalar> cwise_product(const Var<Scalar>& a, const Var<Scalar>& b) {
  detail::require_same_tape(a, b);
  detail::require_shape(a.rows() == b.rows() && a.cols() == b.cols(), "cwise_product", a, b);
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape()->push(a.value().cwiseProduct(b.value()), detail::any_grad(a, b),
                        [ia, ib](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
                          if (tp.needs_grad(ia)) tp.accumulate(ia, g.cwiseProduct(tp.value(ib)));
                          if (tp.needs_grad(ib)) tp.accumulate(ib, g.cwiseProduct(tp.value(ia)));
                        });
}

// Scales row r of a by col(r, 0); col is rows x 1.
template <typename Scalar>
Var<Scalar> scale_rows(const Var<Scalar>& a, const Var<Scalar>& col) {
  detail::require_same_tape(a, col);
  detail::require_shape(col.cols() == 1 && col.rows() == a.rows(), "scale_rows", a, col);
  const std::size_t ia = a.id(), ic = col.id();
  Matrix<Scalar> out = (a.value().array().colwise() * col.value().col(0).array()).matrix();
  return a.tape()->push(std::move(out), detail::any_grad(a, col),
                        [ia, ic](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
                          const auto& c = tp.value(ic);
                          const auto& av = tp.value(ia);
                          if (tp.needs_grad(ia)) tp.accumulate(ia, (g.array().colwise() * c.col(0).array()).matrix());
                          if (tp.needs_grad(ic)) tp.accumulate(ic, g.cwiseProduct(av).rowwise().sum());
                        });
}

template <typename Scalar>
Var<Scalar> sigmoid(const Var<Scalar>& a) {
  const std::size_t out_id = a.tape()->size();
  const std::size_t ia = a.id();
  Matrix<Scalar> out = a.value().unaryExpr([](Scalar x) {
    // Two branches keep exp() from overflowing for large |x|.
    if (x >= Scalar(0)) return Scalar(1) / (Scalar(1) + std::exp(-x));
    const Scalar e = std::exp(x);
    return e / (Scalar(1) + e);
  });
  return a.tape()->push(std::move(out), detail::any_grad(a), [ia, out_id](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
    const auto& y = tp.value(out_id);
    tp.accumulate(ia, (g.array() * y.array() * (Scalar(1) - y.array())).matrix());
  });
}

template <typename Scalar>
Var<Scalar> tanh(const Var<Scalar>& a) {
  const std::size_t out_id = a.tape()->size();
  const std::size_t ia = a.id();
  Matrix<Scalar> out = a.value().array().tanh().matrix();
  return a.tape()->push(std::move(out), detail::any_grad(a), [ia, out_id](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
    const auto& y = tp.value(out_id);
    tp.accumulate(ia, (g.array() * (Scalar(1) - y.array().square())).matrix());
  });
}

template <typename Scalar>
Var<Scalar> relu(const Var<Scalar>& a) {
  const std::size_t ia = a.id();
  Matrix<Scalar> out = a.value().cwiseMax(Scalar(0));
  return a.tape()->push(std::move(out), detail::any_grad(a), [ia](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
    const auto& x = tp.value(ia);
    tp.accumulate(ia, (x.array() > Scalar(0)).select(g, Scalar(0)).matrix());
  });
}

template <typename Scalar>
Var<Scalar> log(const Var<Scalar>& a) {
  const std::size_t ia = a.id();
  Matrix<Scalar> out = a.value().array().log().matrix();
  return a.tape()->push(std::move(out), detail::any_grad(a), [ia](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
    tp.accumulate(ia, (g.array() / tp.value(ia).array()).matrix());
  });
}

// Row-wise softmax. `additive_mask`, when non-empty, is added to the logits
// before normalization (use masked_logit() for excluded positions).
template <typename Scalar>
Var<Scalar> softmax_rows(const Var<Scalar>& a, const Matrix<Scalar>& additive_mask = {}) {
  const std::size_t out_id = a.tape()->size();
  const std::size_t ia = a.id();
  Matrix<Scalar> z = a.value();
  if (additive_mask.size() != 0) {
    if (additive_mask.rows() != z.rows() || additive_mask.cols() != z.cols())
      throw InputError("softmax_rows: mask shape mismatch");
    z += additive_mask;
  }
  for (Index r = 0; r < z.rows(); ++r) {
    auto row = z.row(r);
    const Scalar m = row.maxCoeff();
    row = (row.array() - m).exp().matrix();
    row /= row.sum();
  }
  return a.tape()->push(std::move(z), detail::any_grad(a), [ia, out_id](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
    const auto& y = tp.value(out_id);
    Matrix<Scalar> dot = g.cwiseProduct(y).rowwise().sum();
    tp.accumulate(ia, (y.array() * (g.array().colwise() - dot.col(0).array())).matrix());
  });
}

template <typename Scalar>
Var<Scalar> log_softmax_rows(const Var<Scalar>& a) {
  const std::size_t out_id = a.tape()->size();
  const std::size_t ia = a.id();
  Matrix<Scalar> z = a.value();
  for (Index r = 0; r < z.rows(); ++r) {
    auto row = z.row(r);
    const Scalar m = row.maxCoeff();
    const Scalar lse = m + std::log((row.array() - m).exp().sum());
    row.array() -= lse;
  }
  return a.tape()->push(std::move(z), detail::any_grad(a), [ia, out_id](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
    const auto& y = tp.value(out_id);
    Matrix<Scalar> gs = g.rowwise().sum();
    tp.accumulate(ia, (g.array() - y.array().exp().colwise() * gs.col(0).array()).matrix());
  });
}

// Per-row normalization to zero mean and unit variance, then gamma * x + beta.
template <typename Scalar>
Var<Scalar> layer_norm_rows(const Var<Scalar>& a, const Var<Scalar>& gamma, const Var<Scalar>& beta,
                            Scalar eps = Scalar(1e-5)) {
  detail::require_same_tape(a, gamma);
  detail::require_shape(gamma.rows() == 1 && gamma.cols() == a.cols(), "layer_norm", a, gamma);
  detail::require_shape(beta.rows() == 1 && beta.cols() == a.cols(), "layer_norm", a, beta);
  const Index n = a.cols();
  const Matrix<Scalar>& x = a.value();
  Matrix<Scalar> xhat(x.rows(), n);
  Matrix<Scalar> inv_std(x.rows(), 1);
  for (Index r = 0; r < x.rows(); ++r) {
    const Scalar mean = x.row(r).mean();
    const Scalar var = (x.row(r).array() - mean).square().mean();
    inv_std(r, 0) = Scalar(1) / std::sqrt(var + eps);
    xhat.row(r) = (x.row(r).array() - mean) * inv_std(r, 0);
  }
  Matrix<Scalar> out = (xhat.array().rowwise() * gamma.value().row(0).array()).matrix();
  out.rowwise() += beta.value().row(0);
  const std::size_t ia = a.id(), ig = gamma.id(), ib = beta.id();
  const bool ng = detail::any_grad(a, gamma) || detail::any_grad(beta);
  return a.tape()->push(std::move(out), ng,
                        [ia, ig, ib, n, xhat = std::move(xhat), inv_std = std::move(inv_std)](
                            Tape<Scalar>& tp, const Matrix<Scalar>& g) {
                          if (tp.needs_grad(ig)) tp.accumulate(ig, g.cwiseProduct(xhat).colwise().sum());
                          if (tp.needs_grad(ib)) tp.accumulate(ib, g.colwise().sum());
                          if (!tp.needs_grad(ia)) return;
                          const auto& gm = tp.value(ig);
                          Matrix<Scalar> gx = (g.array().rowwise() * gm.row(0).array()).matrix();
                          Matrix<Scalar> da(gx.rows(), n);
                          for (Index r = 0; r < gx.rows(); ++r) {
                            const Scalar m1 = gx.row(r).mean();
                            const Scalar m2 = gx.row(r).cwiseProduct(xhat.row(r)).mean();
                            da.row(r) = (gx.row(r).array() - m1 - xhat.row(r).array() * m2) * inv_std(r, 0);
                          }
                          tp.accumulate(ia, da);
                        });
}

template <typename Scalar>
Var<Scalar> concat_rows(std::span<const Var<Scalar>> parts) {
  if (parts.empty()) throw InputError("concat_rows: no operands");
  Tape<Scalar>* t = parts.front().tape();
  const Index cols = parts.front().cols();
  Index rows = 0;
  bool ng = false;
  std::vector<std::size_t> ids;
  for (const auto& p : parts) {
    detail::require_same_tape(parts.front(), p);
    if (p.cols() != cols) throw InputError("concat_rows: column mismatch");
    rows += p.rows();
    ng = ng || t->needs_grad(p);
    ids.push_back(p.id());
  }
  Matrix<Scalar> out(rows, cols);
  Index r = 0;
  for (const auto& p : parts) {
    out.middleRows(r, p.rows()) = p.value();
    r += p.rows();
  }
  return t->push(std::move(out), ng, [ids = std::move(ids)](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
    Index r0 = 0;
    for (std::size_t id : ids) {
      const Index n = tp.value(id).rows();
      tp.accumulate(id, g.middleRows(r0, n));
      r0 += n;
    }
  });
}

template <typename Scalar>
Var<Scalar> concat_rows(std::initializer_list<Var<Scalar>> parts) {
  std::vector<Var<Scalar>> v(parts);
  return concat_rows(std::span<const Var<Scalar>>(v));
}

template <typename Scalar>
Var<Scalar> concat_cols(std::span<const Var<Scalar>> parts) {
  if (parts.empty()) throw InputError("concat_cols: no operands");
  Tape<Scalar>* t = parts.front().tape();
  const Index rows = parts.front().rows();
  Index cols = 0;
  bool ng = false;
  std::vector<std::size_t> ids;
  for (const auto& p : parts) {
    detail::require_same_tape(parts.front(), p);
    if (p.rows() != rows) throw InputError("concat_cols: row mismatch");
    cols += p.cols();
    ng = ng || t->needs_grad(p);
    ids.push_back(p.id());
  }
  Matrix<Scalar> out(rows, cols);
  Index c = 0;
  for (const auto& p : parts) {
    out.middleCols(c, p.cols()) = p.value();
    c += p.cols();
  }
  return t->push(std::move(out), ng, [ids = std::move(ids)](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
    Index c0 = 0;
    for (std::size_t id : ids) {
      const Index n = tp.value(id).cols();
      tp.accumulate(id, g.middleCols(c0, n));
      c0 += n;
    }
  });
}

template <typename Scalar>
Var<Scalar> concat_cols(std::initializer_list<Var<Scalar>> parts) {
  std::vector<Var<Scalar>> v(parts);
  return concat_cols(std::span<const Var<Scalar>>(v));
}

template <typename Scalar>
Var<Scalar> slice_rows(const Var<Scalar>& a, Index start, Index count) {
  if (start < 0 || count < 0 || start + count > a.rows()) throw InputError("slice_rows: out of range");
  const std::size_t ia = a.id();
  return a.tape()->push(a.value().middleRows(start, count), detail::any_grad(a),
                        [ia, start, count](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
                          tp.grad(ia).middleRows(start, count) += g;
                        });
}

template <typename Scalar>
Var<Scalar> slice_cols(const Var<Scalar>& a, Index start, Index count) {
  if (start < 0 || count < 0 || start + count > a.cols()) throw InputError("slice_cols: out of range");
  const std::size_t ia = a.id();
  return a.tape()->push(a.value().middleCols(start, count), detail::any_grad(a),
                        [ia, start, count](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
                          tp.grad(ia).middleCols(start, count) += g;
                        });
}

// Rows of a at `indices`, in order; repeated indices are allowed.
template <typename Scalar>
Var<Scalar> gather_rows(const Var<Scalar>& a, std::vector<Index> indices) {
  const Matrix<Scalar>& av = a.value();
  Matrix<Scalar> out(static_cast<Index>(indices.size()), av.cols());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] < 0 || indices[i] >= av.rows()) throw InputError("gather_rows: index out of range");
    out.row(static_cast<Index>(i)) = av.row(indices[i]);
  }
  const std::size_t ia = a.id();
  return a.tape()->push(std::move(out), detail::any_grad(a),
                        [ia, indices = std::move(indices)](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
                          auto& ga = tp.grad(ia);
                          for (std::size_t i = 0; i < indices.size(); ++i) ga.row(indices[i]) += g.row(static_cast<Index>(i));
                        });
}

template <typename Scalar>
Var<Scalar> transpose(const Var<Scalar>& a) {
  const std::size_t ia = a.id();
  Matrix<Scalar> out = a.value().transpose();
  return a.tape()->push(std::move(out), detail::any_grad(a), [ia](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
    tp.accumulate(ia, g.transpose());
  });
}

template <typename Scalar>
Var<Scalar> sum(const Var<Scalar>& a) {
  const std::size_t ia = a.id();
  Matrix<Scalar> out(1, 1);
  out(0, 0) = a.value().sum();
  return a.tape()->push(std::move(out), detail::any_grad(a), [ia](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
    tp.grad(ia).array() += g(0, 0);
  });
}

// Column means: (rows x cols) -> (1 x cols).
template <typename Scalar>
Var<Scalar> mean_rows(const Var<Scalar>& a) {
  if (a.rows() == 0) throw InputError("mean_rows: empty operand");
  const std::size_t ia = a.id();
  const Scalar inv = Scalar(1) / static_cast<Scalar>(a.rows());
  Matrix<Scalar> out = a.value().colwise().sum() * inv;
  return a.tape()->push(std::move(out), detail::any_grad(a), [ia, inv](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
    tp.grad(ia).rowwise() += g.row(0) * inv;
  });
}

template <typename Scalar>
Var<Scalar> element(const Var<Scalar>& a, Index r, Index c) {
  if (r < 0 || r >= a.rows() || c < 0 || c >= a.cols()) throw InputError("element: out of range");
  const std::size_t ia = a.id();
  Matrix<Scalar> out(1, 1);
  out(0, 0) = a.value()(r, c);
  return a.tape()->push(std::move(out), detail::any_grad(a), [ia, r, c](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
    tp.grad(ia)(r, c) += g(0, 0);
  });
}

// Adds column j of a (L x M) into column ids[j] of an L x width result.
template <typename Scalar>
Var<Scalar> scatter_cols(const Var<Scalar>& a, std::vector<Index> ids, Index width) {
  if (static_cast<Index>(ids.size()) != a.cols()) throw InputError("scatter_cols: id count mismatch");
  Matrix<Scalar> out = Matrix<Scalar>::Zero(a.rows(), width);
  for (std::size_t j = 0; j < ids.size(); ++j) {
    if (ids[j] < 0 || ids[j] >= width) throw InputError("scatter_cols: id out of range");
    out.col(ids[j]) += a.value().col(static_cast<Index>(j));
  }
  const std::size_t ia = a.id();
  return a.tape()->push(std::move(out), detail::any_grad(a),
                        [ia, ids = std::move(ids)](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
                          auto& ga = tp.grad(ia);
                          for (std::size_t j = 0; j < ids.size(); ++j) ga.col(static_cast<Index>(j)) += g.col(ids[j]);
                        });
}

// Fused gather used by second-order selection. For output row r that has a
// keyword (r < keywords.size()) and slot k < selected[r].size():
//   out[r, k*dv : (k+1)*dv] = key_scores[0, kw] * scores[kw, j] * values[j, :]
// with kw = keywords[r], j = selected[r][k]. Remaining rows and slots are zero.
template <typename Scalar>
Var<Scalar> weighted_gather(const Var<Scalar>& scores, const Var<Scalar>& key_scores, const Var<Scalar>& values,
                            std::vector<Index> keywords, std::vector<std::vector<Index>> selected, Index out_rows,
                            Index slots) {
  detail::require_same_tape(scores, key_scores);
  detail::require_same_tape(scores, values);
  if (key_scores.rows() != 1 || key_scores.cols() != scores.rows())
    throw InputError("weighted_gather: keyword score shape mismatch");
  if (values.rows() != scores.cols()) throw InputError("weighted_gather: value row mismatch");
  if (keywords.size() != selected.size() || static_cast<Index>(keywords.size()) > out_rows)
    throw InputError("weighted_gather: keyword count mismatch");
  const Index dv = values.cols();
  const auto& s = scores.value();
  const auto& ks = key_scores.value();
  const auto& v = values.value();
  Matrix<Scalar> out = Matrix<Scalar>::Zero(out_rows, slots * dv);
  for (std::size_t r = 0; r < keywords.size(); ++r) {
    const Index kw = keywords[r];
    if (static_cast<Index>(selected[r].size()) > slots) throw InputError("weighted_gather: too many slots");
    for (std::size_t k = 0; k < selected[r].size(); ++k) {
      const Index j = selected[r][k];
      out.row(static_cast<Index>(r)).segment(static_cast<Index>(k) * dv, dv) = ks(0, kw) * s(kw, j) * v.row(j);
    }
  }
  const std::size_t is = scores.id(), ik = key_scores.id(), iv = values.id();
  const bool ng = detail::any_grad(scores, key_scores) || detail::any_grad(values);
  return scores.tape()->push(
      std::move(out), ng,
      [is, ik, iv, dv, keywords = std::move(keywords), selected = std::move(selected)](Tape<Scalar>& tp,
                                                                                       const Matrix<Scalar>& g) {
        const auto& s = tp.value(is);
        const auto& ks = tp.value(ik);
        const auto& v = tp.value(iv);
        const bool gs = tp.needs_grad(is), gk = tp.needs_grad(ik), gv = tp.needs_grad(iv);
        for (std::size_t r = 0; r < keywords.size(); ++r) {
          const Index kw = keywords[r];
          for (std::size_t k = 0; k < selected[r].size(); ++k) {
            const Index j = selected[r][k];
            const auto seg = g.row(static_cast<Index>(r)).segment(static_cast<Index>(k) * dv, dv);
            const Scalar gv_dot = seg.dot(v.row(j));
            if (gs) tp.grad(is)(kw, j) += ks(0, kw) * gv_dot;
            if (gk) tp.grad(ik)(0, kw) += s(kw, j) * gv_dot;
            if (gv) tp.grad(iv).row(j) += (ks(0, kw) * s(kw, j)) * seg;
          }
        }
      });
}

template <typename Scalar>
bool all_finite(const Matrix<Scalar>& m) {
  return m.allFinite();
}

}  // namespace iamm
