//
// Copyright 2026 The invrat Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

// Matrix-valued reverse-mode differentiation.
//
// A Tape records every operation in creation order, so creation order is a
// topological order and `backward` is a single reverse sweep. Leaves created
// from a Param accumulate straight into Param::grad. A tape built with
// recording disabled computes values only and cannot be differentiated; it is
// used for inference and for the sampling half of a training step.

#ifndef INVRAT_AUTODIFF_HPP_
#define INVRAT_AUTODIFF_HPP_

#include <Eigen/Core>
#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "invrat/error.hpp"

namespace invrat {

using Matrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Param {
  std::string name;
  Matrix value;
  Matrix grad;

  Param() = default;
  Param(std::string n, Matrix v)
      : name(std::move(n)), value(std::move(v)),
        grad(Matrix::Zero(value.rows(), value.cols())) {}

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
  Eigen::Index size() const { return value.size(); }
};

class Tape;

struct Var {
  Tape* tape = nullptr;
  int id = -1;

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const { return value()(0, 0); }
};

class Tape {
 public:
  explicit Tape(bool record = true) : record_(record) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return record_; }

  Var constant(Matrix v) {
    Node n;
    n.value = std::move(v);
    return push(std::move(n));
  }
  Var scalar(double x) { return constant(Matrix::Constant(1, 1, x)); }

  // Leaf whose gradient lands in `p.grad`. The value is referenced, not copied.
  Var param(Param& p) {
    Node n;
    n.param = &p;
    n.needs_grad = record_;
    return push(std::move(n));
  }

  const Matrix& value(int id) const {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    return n.param ? n.param->value : n.value;
  }
  bool needs_grad(int id) const {
    return nodes_[static_cast<std::size_t>(id)].needs_grad;
  }

  // Gradient buffer of a node, zero-initialized on first use.
  Matrix& grad(int id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.param) return n.param->grad;
    if (n.grad.size() == 0) n.grad.setZero(n.value.rows(), n.value.cols());
    return n.grad;
  }

  // Creates an op node. `backward` receives the tape, the output gradient and
  // the node's own id; it is only stored when some input needs a gradient.
  template <typename Fn>
  Var op(Matrix value, std::initializer_list<Var> inputs, Fn&& backward) {
    Node n;
    n.value = std::move(value);
    if (record_) {
      for (const Var& v : inputs) n.needs_grad = n.needs_grad || needs_grad(v.id);
    }
    if (n.needs_grad) n.backward = std::forward<Fn>(backward);
    return push(std::move(n));
  }

  // Accumulates d(loss)/d(param) into every Param reachable from `loss`.
  void backward(Var loss) {
    if (!record_) {
      throw Error(ErrorKind::kInvalidArgument, "tape was built without recording");
    }
    const Matrix& v = value(loss.id);
    if (v.rows() != 1 || v.cols() != 1) {
      throw Error(ErrorKind::kInvalidArgument, "backward needs a scalar loss");
    }
    if (!std::isfinite(v(0, 0))) {
      throw Error(ErrorKind::kNonFinite, "loss is not finite");
    }
    if (!needs_grad(loss.id)) return;
    grad(loss.id).setConstant(1.0);
    for (int i = loss.id; i >= 0; --i) {
      Node& n = nodes_[static_cast<std::size_t>(i)];
      if (!n.backward || n.grad.size() == 0) continue;
      n.backward(*this, n.grad, i);
    }
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    Param* param = nullptr;
    bool needs_grad = false;
    std::function<void(Tape&, const Matrix&, int)> backward;
  };

  Var push(Node n) {
    nodes_.push_back(std::move(n));
    return Var{this, static_cast<int>(nodes_.size()) - 1};
  }

  bool record_;
  std::vector<Node> nodes_;
};

inline const Matrix& Var::value() const { return tape->value(id); }

namespace ad {

inline void accumulate(Tape& t, Var v, const Matrix& g) {
  if (t.needs_grad(v.id)) t.grad(v.id) += g;
}

inline void check_same_shape(Var a, Var b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw Error(ErrorKind::kInvalidArgument,
                std::string(what) + ": shape mismatch");
  }
}

inline Var add(Var a, Var b) {
  check_same_shape(a, b, "add");
  return a.tape->op(a.value() + b.value(), {a, b},
                    [a, b](Tape& t, const Matrix& g, int) {
                      accumulate(t, a, g);
                      accumulate(t, b, g);
                    });
}

inline Var sub(Var a, Var b) {
  check_same_shape(a, b, "sub");
  return a.tape->op(a.value() - b.value(), {a, b},
                    [a, b](Tape& t, const Matrix& g, int) {
                      accumulate(t, a, g);
                      accumulate(t, b, -g);
                    });
}

inline Var mul(Var a, Var b) {
  check_same_shape(a, b, "mul");
  return a.tape->op(a.value().cwiseProduct(b.value()), {a, b},
                    [a, b](Tape& t, const Matrix& g, int) {
                      accumulate(t, a, g.cwiseProduct(b.value()));
                      accumulate(t, b, g.cwiseProduct(a.value()));
                    });
}

// s * a + shift, elementwise.
inline Var affine(Var a, double s, double shift = 0.0) {
  Matrix out = a.value() * s;
  if (shift != 0.0) out.array() += shift;
  return a.tape->op(std::move(out), {a}, [a, s](Tape& t, const Matrix& g, int) {
    accumulate(t, a, g * s);
  });
}

inline Var matmul(Var a, Var b) {
  if (a.cols() != b.rows()) {
    throw Error(ErrorKind::kInvalidArgument, "matmul: inner dimensions differ");
  }
  return a.tape->op(a.value() * b.value(), {a, b},
                    [a, b](Tape& t, const Matrix& g, int) {
                      if (t.needs_grad(a.id)) {
                        t.grad(a.id).noalias() += g * b.value().transpose();
                      }
                      if (t.needs_grad(b.id)) {
                        t.grad(b.id).noalias() += a.value().transpose() * g;
                      }
                    });
}

// a (r x c) + row (1 x c), the row broadcast over every row of a.
inline Var add_row(Var a, Var row) {
  if (row.rows() != 1 || row.cols() != a.cols()) {
    throw Error(ErrorKind::kInvalidArgument, "add_row: shape mismatch");
  }
  Matrix out = a.value();
  out.rowwise() += row.value().row(0);
  return a.tape->op(std::move(out), {a, row},
                    [a, row](Tape& t, const Matrix& g, int) {
                      accumulate(t, a, g);
                      if (t.needs_grad(row.id)) t.grad(row.id) += g.colwise().sum();
                    });
}

// Row i of a scaled by col(i, 0).
inline Var scale_rows(Var a, Var col) {
  if (col.cols() != 1 || col.rows() != a.rows()) {
    throw Error(ErrorKind::kInvalidArgument, "scale_rows: shape mismatch");
  }
  Matrix out = a.value();
  for (Eigen::Index i = 0; i < out.rows(); ++i) out.row(i) *= col.value()(i, 0);
  return a.tape->op(
      std::move(out), {a, col}, [a, col](Tape& t, const Matrix& g, int) {
        if (t.needs_grad(a.id)) {
          Matrix& ga = t.grad(a.id);
          for (Eigen::Index i = 0; i < g.rows(); ++i) {
            ga.row(i) += g.row(i) * col.value()(i, 0);
          }
        }
        if (t.needs_grad(col.id)) {
          t.grad(col.id) += g.cwiseProduct(a.value()).rowwise().sum();
        }
      });
}

// col (r x 1) times row (1 x c).
inline Var outer(Var col, Var row) {
  if (col.cols() != 1 || row.rows() != 1) {
    throw Error(ErrorKind::kInvalidArgument, "outer: expects a column and a row");
  }
  return col.tape->op(col.value() * row.value(), {col, row},
                      [col, row](Tape& t, const Matrix& g, int) {
                        if (t.needs_grad(col.id)) {
                          t.grad(col.id) += g * row.value().transpose();
                        }
                        if (t.needs_grad(row.id)) {
                          t.grad(row.id) += col.value().transpose() * g;
                        }
                      });
}

inline Var tanh(Var a) {
  Matrix out = a.value().array().tanh().matrix();
  return a.tape->op(std::move(out), {a}, [a](Tape& t, const Matrix& g, int self) {
    const Matrix& y = t.value(self);
    accumulate(t, a, (g.array() * (1.0 - y.array().square())).matrix());
  });
}

inline double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline Var sigmoid(Var a) {
  Matrix out = a.value().unaryExpr([](double x) { return stable_sigmoid(x); });
  return a.tape->op(std::move(out), {a}, [a](Tape& t, const Matrix& g, int self) {
    const Matrix& y = t.value(self);
    accumulate(t, a, (g.array() * y.array() * (1.0 - y.array())).matrix());
  });
}

inline Var relu(Var a) {
  Matrix out = a.value().cwiseMax(0.0);
  return a.tape->op(std::move(out), {a}, [a](Tape& t, const Matrix& g, int) {
    accumulate(t, a,
               (g.array() * (a.value().array() > 0.0).cast<double>()).matrix());
  });
}

// d|x|/dx is taken as 0 at x = 0.
inline Var abs(Var a) {
  Matrix out = a.value().cwiseAbs();
  return a.tape->op(std::move(out), {a}, [a](Tape& t, const Matrix& g, int) {
    accumulate(t, a,
               (g.array() * a.value().array().sign()).matrix());
  });
}

inline Var sum(Var a) {
  const Eigen::Index r = a.rows(), c = a.cols();
  return a.tape->op(Matrix::Constant(1, 1, a.value().sum()), {a},
                    [a, r, c](Tape& t, const Matrix& g, int) {
                      accumulate(t, a, Matrix::Constant(r, c, g(0, 0)));
                    });
}

inline Var mean(Var a) {
  const double n = static_cast<double>(a.value().size());
  return affine(sum(a), 1.0 / n);
}

// Column j as an r x 1 matrix.
inline Var column(Var a, Eigen::Index j) {
  return a.tape->op(a.value().col(j), {a}, [a, j](Tape& t, const Matrix& g, int) {
    if (t.needs_grad(a.id)) t.grad(a.id).col(j) += g.col(0);
  });
}

// a[1:] - a[:-1] for a column vector; empty when a has one row.
inline Var row_diff(Var a) {
  const Eigen::Index n = a.rows();
  if (a.cols() != 1) {
    throw Error(ErrorKind::kInvalidArgument, "row_diff expects a column vector");
  }
  Matrix out(n > 0 ? n - 1 : 0, 1);
  for (Eigen::Index i = 1; i < n; ++i) out(i - 1, 0) = a.value()(i, 0) - a.value()(i - 1, 0);
  return a.tape->op(std::move(out), {a}, [a, n](Tape& t, const Matrix& g, int) {
    if (!t.needs_grad(a.id)) return;
    Matrix& ga = t.grad(a.id);
    for (Eigen::Index i = 1; i < n; ++i) {
      ga(i, 0) += g(i - 1, 0);
      ga(i - 1, 0) -= g(i - 1, 0);
    }
  });
}

// Rows of `table` selected by `ids`. Rows listed in `frozen_id` (if >= 0)
// read as zero and receive no gradient.
inline Var embedding(Tape& tape, Param& table, std::span<const int> ids,
                     int frozen_id = -1) {
  const Eigen::Index n = table.value.cols();
  Matrix out(static_cast<Eigen::Index>(ids.size()), n);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const int id = ids[i];
    if (id < 0 || id >= table.value.rows()) {
      throw Error(ErrorKind::kOutOfRange,
                  "id " + std::to_string(id) + " outside table '" + table.name +
                      "' of " + std::to_string(table.value.rows()) + " rows");
    }
    if (id == frozen_id) {
      out.row(static_cast<Eigen::Index>(i)).setZero();
    } else {
      out.row(static_cast<Eigen::Index>(i)) = table.value.row(id);
    }
  }
  Var leaf = tape.param(table);
  std::vector<int> rows(ids.begin(), ids.end());
  return tape.op(std::move(out), {leaf},
                 [leaf, rows = std::move(rows), frozen_id](Tape& t, const Matrix& g, int) {
                   Matrix& gt = t.grad(leaf.id);
                   for (std::size_t i = 0; i < rows.size(); ++i) {
                     if (rows[i] == frozen_id) continue;
                     gt.row(rows[i]) += g.row(static_cast<Eigen::Index>(i));
                   }
                 });
}

// Sliding window over rows: output row i concatenates input rows
// i - w/2 .. i + w/2, zero outside the sequence. (L x n) -> (L x w*n).
inline Var unfold(Var a, int window) {
  if (window < 1 || window % 2 == 0) {
    throw Error(ErrorKind::kInvalidArgument, "unfold needs an odd window");
  }
  const Eigen::Index len = a.rows(), n = a.cols();
  const int half = window / 2;
  Matrix out = Matrix::Zero(len, n * window);
  for (Eigen::Index i = 0; i < len; ++i) {
    for (int k = 0; k < window; ++k) {
      const Eigen::Index src = i + k - half;
      if (src < 0 || src >= len) continue;
      out.block(i, k * n, 1, n) = a.value().row(src);
    }
  }
  return a.tape->op(std::move(out), {a}, [a, len, n, window, half](Tape& t, const Matrix& g, int) {
    if (!t.needs_grad(a.id)) return;
    Matrix& ga = t.grad(a.id);
    for (Eigen::Index i = 0; i < len; ++i) {
      for (int k = 0; k < window; ++k) {
        const Eigen::Index src = i + k - half;
        if (src < 0 || src >= len) continue;
        ga.row(src) += g.block(i, k * n, 1, n);
      }
    }
  });
}

// Mean of the rows whose `include` flag is set. (L x h) -> (1 x h).
inline Var masked_mean_rows(Var a, const std::vector<bool>& include) {
  if (include.size() != static_cast<std::size_t>(a.rows())) {
    throw Error(ErrorKind::kInvalidArgument, "masked_mean_rows: length mismatch");
  }
  Matrix out = Matrix::Zero(1, a.cols());
  double count = 0.0;
  for (std::size_t i = 0; i < include.size(); ++i) {
    if (!include[i]) continue;
    out += a.value().row(static_cast<Eigen::Index>(i));
    count += 1.0;
  }
  if (count == 0.0) {
    throw Error(ErrorKind::kInvalidArgument, "no rows to pool");
  }
  out /= count;
  return a.tape->op(std::move(out), {a}, [a, include, count](Tape& t, const Matrix& g, int) {
    if (!t.needs_grad(a.id)) return;
    Matrix& ga = t.grad(a.id);
    for (std::size_t i = 0; i < include.size(); ++i) {
      if (include[i]) ga.row(static_cast<Eigen::Index>(i)) += g / count;
    }
  });
}

// -log softmax(logits)[label] for a 1 x k logit row.
inline Var cross_entropy(Var logits, int label) {
  if (logits.rows() != 1 || label < 0 || label >= logits.cols()) {
    throw Error(ErrorKind::kInvalidArgument, "cross_entropy: bad logits or label");
  }
  const Matrix& z = logits.value();
  if (!z.allFinite()) {
    throw Error(ErrorKind::kNonFinite, "cross_entropy: non-finite logits");
  }
  const double zmax = z.maxCoeff();
  const double lse = zmax + std::log((z.array() - zmax).exp().sum());
  Matrix probs = (z.array() - lse).exp().matrix();
  const double loss = lse - z(0, label);
  return logits.tape->op(Matrix::Constant(1, 1, loss), {logits},
                         [logits, label, probs = std::move(probs)](Tape& t, const Matrix& g, int) {
                           Matrix d = probs;
                           d(0, label) -= 1.0;
                           accumulate(t, logits, d * g(0, 0));
                         });
}

// Forward value `hard`, gradient passed to `soft` unchanged.
inline Var straight_through(Matrix hard, Var soft) {
  if (hard.rows() != soft.rows() || hard.cols() != soft.cols()) {
    throw Error(ErrorKind::kInvalidArgument, "straight_through: shape mismatch");
  }
  return soft.tape->op(std::move(hard), {soft}, [soft](Tape& t, const Matrix& g, int) {
    accumulate(t, soft, g);
  });
}

}  // namespace ad

// Accumulates gradients of `loss` into the Params it depends on. Callers zero
// the gradients they care about beforehand.
inline void gradients(Tape& tape, Var loss) { tape.backward(loss); }

}  // namespace invrat

#endif  // INVRAT_AUTODIFF_HPP_
