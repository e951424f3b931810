// Copyright 2026 The ORPL Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "orpl/numerics/ops.hpp"

#include <cmath>
#include <limits>
#include <memory>

namespace orpl {

namespace {

enum class Broadcast { kSame, kRow, kCol, kScalar };

template <typename S>
Broadcast broadcast_kind(const Matrix<S>& a, const Matrix<S>& b, const char* op) {
  if (a.rows() == b.rows() && a.cols() == b.cols()) return Broadcast::kSame;
  if (b.rows() == 1 && b.cols() == 1) return Broadcast::kScalar;
  if (b.rows() == 1 && b.cols() == a.cols()) return Broadcast::kRow;
  if (b.cols() == 1 && b.rows() == a.rows()) return Broadcast::kCol;
  throw DimensionError(std::string(op) + ": incompatible shapes " + std::to_string(a.rows()) + "x" +
                       std::to_string(a.cols()) + " and " + std::to_string(b.rows()) + "x" +
                       std::to_string(b.cols()));
}

template <typename S>
Matrix<S> expand(const Matrix<S>& b, Index rows, Index cols, Broadcast kind) {
  switch (kind) {
    case Broadcast::kSame: return b;
    case Broadcast::kRow: return b.replicate(rows, 1);
    case Broadcast::kCol: return b.replicate(1, cols);
    case Broadcast::kScalar: return Matrix<S>::Constant(rows, cols, b(0, 0));
  }
  return b;
}

template <typename S>
Matrix<S> reduce(const Matrix<S>& g, Broadcast kind) {
  switch (kind) {
    case Broadcast::kSame: return g;
    case Broadcast::kRow: return g.colwise().sum();
    case Broadcast::kCol: return g.rowwise().sum();
    case Broadcast::kScalar: return Matrix<S>::Constant(1, 1, g.sum());
  }
  return g;
}

template <typename S>
S stable_sigmoid(S x) {
  if (x >= S(0)) return S(1) / (S(1) + std::exp(-x));
  const S e = std::exp(x);
  return e / (S(1) + e);
}

// Elementwise op with derivative expressed through input x and output y.
template <typename S, typename F, typename D>
Var<S> unary(const Var<S>& a, F f, D df) {
  Tape<S>& t = a.tape();
  const std::size_t ia = a.id();
  Matrix<S> y = a.value().unaryExpr(f);
  return t.record(std::move(y), a.requires_grad(), [ia, df](Tape<S>& t, std::size_t self) {
    const Matrix<S>& x = t.value(ia);
    const Matrix<S>& y = t.value(self);
    Matrix<S> d(x.rows(), x.cols());
    for (Index i = 0; i < x.size(); ++i) d.data()[i] = df(x.data()[i], y.data()[i]);
    t.accumulate(ia, t.grad(self).cwiseProduct(d));
  });
}

}  // namespace

template <typename S>
Var<S> matmul(const Var<S>& a, const Var<S>& b) {
  if (a.cols() != b.rows())
    throw DimensionError("matmul: " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) + " times " +
                         std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  Tape<S>& t = a.tape();
  const std::size_t ia = a.id(), ib = b.id();
  return t.record(a.value() * b.value(), a.requires_grad() || b.requires_grad(),
                  [ia, ib](Tape<S>& t, std::size_t self) {
                    const Matrix<S>& g = t.grad(self);
                    if (t.requires_grad(ia)) t.accumulate(ia, g * t.value(ib).transpose());
                    if (t.requires_grad(ib)) t.accumulate(ib, t.value(ia).transpose() * g);
                  });
}

template <typename S>
Var<S> transpose(const Var<S>& a) {
  Tape<S>& t = a.tape();
  const std::size_t ia = a.id();
  return t.record(a.value().transpose(), a.requires_grad(),
                  [ia](Tape<S>& t, std::size_t self) { t.accumulate(ia, t.grad(self).transpose()); });
}

template <typename S>
Var<S> add(const Var<S>& a, const Var<S>& b) {
  const Broadcast kind = broadcast_kind(a.value(), b.value(), "add");
  Tape<S>& t = a.tape();
  const std::size_t ia = a.id(), ib = b.id();
  Matrix<S> y = a.value() + expand(b.value(), a.rows(), a.cols(), kind);
  return t.record(std::move(y), a.requires_grad() || b.requires_grad(),
                  [ia, ib, kind](Tape<S>& t, std::size_t self) {
                    const Matrix<S>& g = t.grad(self);
                    if (t.requires_grad(ia)) t.accumulate(ia, g);
                    if (t.requires_grad(ib)) t.accumulate(ib, reduce(g, kind));
                  });
}

template <typename S>
Var<S> sub(const Var<S>& a, const Var<S>& b) {
  const Broadcast kind = broadcast_kind(a.value(), b.value(), "sub");
  Tape<S>& t = a.tape();
  const std::size_t ia = a.id(), ib = b.id();
  Matrix<S> y = a.value() - expand(b.value(), a.rows(), a.cols(), kind);
  return t.record(std::move(y), a.requires_grad() || b.requires_grad(),
                  [ia, ib, kind](Tape<S>& t, std::size_t self) {
                    const Matrix<S>& g = t.grad(self);
                    if (t.requires_grad(ia)) t.accumulate(ia, g);
                    if (t.requires_grad(ib)) t.accumulate(ib, -reduce(g, kind));
                  });
}

template <typename S>
Var<S> mul(const Var<S>& a, const Var<S>& b) {
  const Broadcast kind = broadcast_kind(a.value(), b.value(), "mul");
  Tape<S>& t = a.tape();
  const std::size_t ia = a.id(), ib = b.id();
  Matrix<S> y = a.value().cwiseProduct(expand(b.value(), a.rows(), a.cols(), kind));
  return t.record(std::move(y), a.requires_grad() || b.requires_grad(),
                  [ia, ib, kind](Tape<S>& t, std::size_t self) {
                    const Matrix<S>& g = t.grad(self);
                    const Matrix<S>& av = t.value(ia);
                    if (t.requires_grad(ia))
                      t.accumulate(ia, g.cwiseProduct(expand(t.value(ib), av.rows(), av.cols(), kind)));
                    if (t.requires_grad(ib)) t.accumulate(ib, reduce<S>(g.cwiseProduct(av), kind));
                  });
}

template <typename S>
Var<S> scale(const Var<S>& a, S s) {
  Tape<S>& t = a.tape();
  const std::size_t ia = a.id();
  return t.record(a.value() * s, a.requires_grad(),
                  [ia, s](Tape<S>& t, std::size_t self) { t.accumulate(ia, t.grad(self) * s); });
}

template <typename S>
Var<S> add_scalar(const Var<S>& a, S s) {
  Tape<S>& t = a.tape();
  const std::size_t ia = a.id();
  Matrix<S> y = a.value().array() + s;
  return t.record(std::move(y), a.requires_grad(),
                  [ia](Tape<S>& t, std::size_t self) { t.accumulate(ia, t.grad(self)); });
}

template <typename S>
Var<S> relu(const Var<S>& a) {
  return unary(a, [](S x) { return x > S(0) ? x : S(0); }, [](S x, S) { return x > S(0) ? S(1) : S(0); });
}

template <typename S>
Var<S> swish(const Var<S>& a) {
  return unary(
      a, [](S x) { return x * stable_sigmoid(x); },
      [](S x, S) {
        const S s = stable_sigmoid(x);
        return s * (S(1) + x * (S(1) - s));
      });
}

template <typename S>
Var<S> tanh(const Var<S>& a) {
  return unary(a, [](S x) { return std::tanh(x); }, [](S, S y) { return S(1) - y * y; });
}

template <typename S>
Var<S> sigmoid(const Var<S>& a) {
  return unary(a, [](S x) { return stable_sigmoid(x); }, [](S, S y) { return y * (S(1) - y); });
}

template <typename S>
Var<S> exp(const Var<S>& a) {
  return unary(a, [](S x) { return std::exp(x); }, [](S, S y) { return y; });
}

template <typename S>
Var<S> log(const Var<S>& a) {
  return unary(a, [](S x) { return std::log(x); }, [](S x, S) { return S(1) / x; });
}

template <typename S>
Var<S> softplus(const Var<S>& a) {
  return unary(
      a, [](S x) { return std::log1p(std::exp(-std::abs(x))) + std::max(x, S(0)); },
      [](S x, S) { return stable_sigmoid(x); });
}

template <typename S>
Var<S> square(const Var<S>& a) {
  return unary(a, [](S x) { return x * x; }, [](S x, S) { return S(2) * x; });
}

template <typename S>
Var<S> abs(const Var<S>& a) {
  return unary(
      a, [](S x) { return std::abs(x); },
      [](S x, S) { return x > S(0) ? S(1) : (x < S(0) ? S(-1) : S(0)); });
}

template <typename S>
Var<S> sqrt(const Var<S>& a) {
  return unary(a, [](S x) { return std::sqrt(x); }, [](S, S y) { return S(0.5) / y; });
}

template <typename S>
Var<S> clamp(const Var<S>& a, S lo, S hi) {
  return unary(
      a, [lo, hi](S x) { return std::min(std::max(x, lo), hi); },
      [lo, hi](S x, S) { return (x >= lo && x <= hi) ? S(1) : S(0); });
}

template <typename S>
Var<S> sum(const Var<S>& a) {
  Tape<S>& t = a.tape();
  const std::size_t ia = a.id();
  return t.record(Matrix<S>::Constant(1, 1, a.value().sum()), a.requires_grad(),
                  [ia](Tape<S>& t, std::size_t self) {
                    const Matrix<S>& x = t.value(ia);
                    t.accumulate(ia, Matrix<S>::Constant(x.rows(), x.cols(), t.grad(self)(0, 0)));
                  });
}

template <typename S>
Var<S> mean(const Var<S>& a) {
  if (a.value().size() == 0) throw EmptyInputError("mean of an empty matrix");
  return scale(sum(a), S(1) / static_cast<S>(a.value().size()));
}

template <typename S>
Var<S> row_sum(const Var<S>& a) {
  Tape<S>& t = a.tape();
  const std::size_t ia = a.id();
  return t.record(a.value().rowwise().sum(), a.requires_grad(), [ia](Tape<S>& t, std::size_t self) {
    t.accumulate(ia, t.grad(self).replicate(1, t.value(ia).cols()));
  });
}

template <typename S>
Var<S> col_sum(const Var<S>& a) {
  Tape<S>& t = a.tape();
  const std::size_t ia = a.id();
  return t.record(a.value().colwise().sum(), a.requires_grad(), [ia](Tape<S>& t, std::size_t self) {
    t.accumulate(ia, t.grad(self).replicate(t.value(ia).rows(), 1));
  });
}

template <typename S>
Var<S> logsumexp_rows(const Var<S>& a) {
  const Matrix<S>& x = a.value();
  if (x.cols() == 0) throw EmptyInputError("logsumexp over zero columns");
  Matrix<S> y(x.rows(), 1);
  auto soft = std::make_shared<Matrix<S>>(x.rows(), x.cols());
  for (Index r = 0; r < x.rows(); ++r) {
    const S m = x.row(r).maxCoeff();
    soft->row(r) = (x.row(r).array() - m).exp().matrix();
    const S z = soft->row(r).sum();
    soft->row(r) /= z;
    y(r, 0) = m + std::log(z);
  }
  Tape<S>& t = a.tape();
  const std::size_t ia = a.id();
  return t.record(std::move(y), a.requires_grad(), [ia, soft](Tape<S>& t, std::size_t self) {
    const Matrix<S>& g = t.grad(self);
    t.accumulate(ia, (soft->array().colwise() * g.col(0).array()).matrix());
  });
}

template <typename S>
Var<S> softmax_rows(const Var<S>& a) {
  const Matrix<S>& x = a.value();
  Matrix<S> y(x.rows(), x.cols());
  for (Index r = 0; r < x.rows(); ++r) {
    const S m = x.row(r).maxCoeff();
    y.row(r) = (x.row(r).array() - m).exp().matrix();
    y.row(r) /= y.row(r).sum();
  }
  Tape<S>& t = a.tape();
  const std::size_t ia = a.id();
  return t.record(std::move(y), a.requires_grad(), [ia](Tape<S>& t, std::size_t self) {
    const Matrix<S>& p = t.value(self);
    const Matrix<S>& g = t.grad(self);
    Matrix<S> dot = (g.cwiseProduct(p)).rowwise().sum();
    Matrix<S> d = p.cwiseProduct(g - dot.replicate(1, g.cols()));
    t.accumulate(ia, d);
  });
}

template <typename S>
Var<S> concat_cols(std::span<const Var<S>> parts) {
  if (parts.empty()) throw EmptyInputError("concat_cols of nothing");
  const Index rows = parts[0].rows();
  Index cols = 0;
  bool rg = false;
  for (const auto& p : parts) {
    if (p.rows() != rows) throw DimensionError("concat_cols: row count mismatch");
    cols += p.cols();
    rg = rg || p.requires_grad();
  }
  Matrix<S> y(rows, cols);
  std::vector<std::pair<std::size_t, Index>> ids;
  Index c = 0;
  for (const auto& p : parts) {
    y.middleCols(c, p.cols()) = p.value();
    ids.emplace_back(p.id(), p.cols());
    c += p.cols();
  }
  Tape<S>& t = parts[0].tape();
  return t.record(std::move(y), rg, [ids](Tape<S>& t, std::size_t self) {
    Index c = 0;
    for (const auto& [id, n] : ids) {
      if (t.requires_grad(id)) t.accumulate(id, t.grad(self).middleCols(c, n));
      c += n;
    }
  });
}

template <typename S>
Var<S> concat_rows(std::span<const Var<S>> parts) {
  if (parts.empty()) throw EmptyInputError("concat_rows of nothing");
  const Index cols = parts[0].cols();
  Index rows = 0;
  bool rg = false;
  for (const auto& p : parts) {
    if (p.cols() != cols) throw DimensionError("concat_rows: column count mismatch");
    rows += p.rows();
    rg = rg || p.requires_grad();
  }
  Matrix<S> y(rows, cols);
  std::vector<std::pair<std::size_t, Index>> ids;
  Index r = 0;
  for (const auto& p : parts) {
    y.middleRows(r, p.rows()) = p.value();
    ids.emplace_back(p.id(), p.rows());
    r += p.rows();
  }
  Tape<S>& t = parts[0].tape();
  return t.record(std::move(y), rg, [ids](Tape<S>& t, std::size_t self) {
    Index r = 0;
    for (const auto& [id, n] : ids) {
      if (t.requires_grad(id)) t.accumulate(id, t.grad(self).middleRows(r, n));
      r += n;
    }
  });
}

template <typename S>
Var<S> slice_cols(const Var<S>& a, Index start, Index count) {
  if (start < 0 || count < 0 || start + count > a.cols()) throw DimensionError("slice_cols out of range");
  Tape<S>& t = a.tape();
  const std::size_t ia = a.id();
  return t.record(a.value().middleCols(start, count), a.requires_grad(),
                  [ia, start, count](Tape<S>& t, std::size_t self) {
                    const Matrix<S>& x = t.value(ia);
                    Matrix<S> d = Matrix<S>::Zero(x.rows(), x.cols());
                    d.middleCols(start, count) = t.grad(self);
                    t.accumulate(ia, d);
                  });
}

template <typename S>
Var<S> slice_rows(const Var<S>& a, Index start, Index count) {
  if (start < 0 || count < 0 || start + count > a.rows()) throw DimensionError("slice_rows out of range");
  Tape<S>& t = a.tape();
  const std::size_t ia = a.id();
  return t.record(a.value().middleRows(start, count), a.requires_grad(),
                  [ia, start, count](Tape<S>& t, std::size_t self) {
                    const Matrix<S>& x = t.value(ia);
                    Matrix<S> d = Matrix<S>::Zero(x.rows(), x.cols());
                    d.middleRows(start, count) = t.grad(self);
                    t.accumulate(ia, d);
                  });
}

template <typename S>
Var<S> gather_rows(const Var<S>& a, std::span<const Index> rows) {
  const Matrix<S>& x = a.value();
  Matrix<S> y(static_cast<Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= x.rows()) throw DimensionError("gather_rows index out of range");
    y.row(static_cast<Index>(i)) = x.row(rows[i]);
  }
  Tape<S>& t = a.tape();
  const std::size_t ia = a.id();
  std::vector<Index> idx(rows.begin(), rows.end());
  return t.record(std::move(y), a.requires_grad(), [ia, idx](Tape<S>& t, std::size_t self) {
    const Matrix<S>& x = t.value(ia);
    const Matrix<S>& g = t.grad(self);
    Matrix<S> d = Matrix<S>::Zero(x.rows(), x.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) d.row(idx[i]) += g.row(static_cast<Index>(i));
    t.accumulate(ia, d);
  });
}

template <typename S>
Var<S> broadcast_rows(const Var<S>& a, Index rows) {
  if (a.rows() != 1) throw DimensionError("broadcast_rows expects a single row");
  Tape<S>& t = a.tape();
  const std::size_t ia = a.id();
  return t.record(a.value().replicate(rows, 1), a.requires_grad(), [ia](Tape<S>& t, std::size_t self) {
    t.accumulate(ia, t.grad(self).colwise().sum());
  });
}

template <typename S>
Var<S> stop_gradient(const Var<S>& a) {
  auto& log = detail::stop_gradient_log();
  Tape<S>& t = a.tape();
  using Mode = detail::StopGradientLog::Mode;
  if (log.mode == Mode::kRecord) {
    log.values.push_back(a.value().template cast<double>());
  } else if (log.mode == Mode::kReplay) {
    if (log.cursor >= log.values.size()) throw ConfigurationError("stop-gradient replay ran past the recording");
    const Matrix<double>& v = log.values[log.cursor++];
    if (v.rows() != a.rows() || v.cols() != a.cols())
      throw ConfigurationError("stop-gradient replay shape mismatch (non-deterministic graph?)");
    return t.constant(v.template cast<S>());
  }
  return t.constant(a.value());
}

template <typename S>
Var<S> attention(const Var<S>& q, const Var<S>& k, const Var<S>& v, Index seq_len, Index batch, Index heads,
                 bool causal) {
  const Index rows = seq_len * batch;
  if (seq_len <= 0 || batch <= 0) throw EmptyInputError("attention over an empty sequence");
  if (q.rows() != rows || k.rows() != rows || v.rows() != rows)
    throw DimensionError("attention: row count must be seq_len * batch");
  if (q.cols() != k.cols() || q.cols() != v.cols() || q.cols() % heads != 0)
    throw DimensionError("attention: q/k/v widths must match and divide by heads");
  const Index dh = q.cols() / heads;
  const S inv_scale = S(1) / std::sqrt(static_cast<S>(dh));

  // probs[b * heads + h] is seq_len x seq_len (lower triangular when causal).
  auto probs = std::make_shared<std::vector<Matrix<S>>>(static_cast<std::size_t>(batch * heads));
  Matrix<S> out = Matrix<S>::Zero(rows, q.cols());
  const Matrix<S>& Q = q.value();
  const Matrix<S>& K = k.value();
  const Matrix<S>& V = v.value();
  Matrix<S> qb(seq_len, dh), kb(seq_len, dh), vb(seq_len, dh);
  for (Index b = 0; b < batch; ++b) {
    for (Index h = 0; h < heads; ++h) {
      for (Index l = 0; l < seq_len; ++l) {
        qb.row(l) = Q.row(l * batch + b).segment(h * dh, dh);
        kb.row(l) = K.row(l * batch + b).segment(h * dh, dh);
        vb.row(l) = V.row(l * batch + b).segment(h * dh, dh);
      }
      Matrix<S>& P = (*probs)[static_cast<std::size_t>(b * heads + h)];
      P = Matrix<S>::Zero(seq_len, seq_len);
      for (Index i = 0; i < seq_len; ++i) {
        const Index n = causal ? i + 1 : seq_len;
        RowVector<S> s = (qb.row(i) * kb.topRows(n).transpose()) * inv_scale;
        const S m = s.maxCoeff();
        s = (s.array() - m).exp().matrix();
        s /= s.sum();
        P.row(i).head(n) = s;
        out.row(i * batch + b).segment(h * dh, dh) = s * vb.topRows(n);
      }
    }
  }

  Tape<S>& t = q.tape();
  const std::size_t iq = q.id(), ik = k.id(), iv = v.id();
  const bool rg = q.requires_grad() || k.requires_grad() || v.requires_grad();
  return t.record(std::move(out), rg,
                  [iq, ik, iv, probs, seq_len, batch, heads, dh, inv_scale](Tape<S>& t, std::size_t self) {
                    const Matrix<S>& Q = t.value(iq);
                    const Matrix<S>& K = t.value(ik);
                    const Matrix<S>& V = t.value(iv);
                    const Matrix<S>& G = t.grad(self);
                    Matrix<S> dQ = Matrix<S>::Zero(Q.rows(), Q.cols());
                    Matrix<S> dK = Matrix<S>::Zero(K.rows(), K.cols());
                    Matrix<S> dV = Matrix<S>::Zero(V.rows(), V.cols());
                    Matrix<S> qb(seq_len, dh), kb(seq_len, dh), vb(seq_len, dh), gb(seq_len, dh);
                    for (Index b = 0; b < batch; ++b) {
                      for (Index h = 0; h < heads; ++h) {
                        for (Index l = 0; l < seq_len; ++l) {
                          const Index r = l * batch + b;
                          qb.row(l) = Q.row(r).segment(h * dh, dh);
                          kb.row(l) = K.row(r).segment(h * dh, dh);
                          vb.row(l) = V.row(r).segment(h * dh, dh);
                          gb.row(l) = G.row(r).segment(h * dh, dh);
                        }
                        const Matrix<S>& P = (*probs)[static_cast<std::size_t>(b * heads + h)];
                        Matrix<S> dVb = P.transpose() * gb;
                        Matrix<S> dP = gb * vb.transpose();
                        Matrix<S> dot = (dP.cwiseProduct(P)).rowwise().sum();
                        Matrix<S> dS = P.cwiseProduct(dP - dot.replicate(1, seq_len)) * inv_scale;
                        Matrix<S> dQb = dS * kb;
                        Matrix<S> dKb = dS.transpose() * qb;
                        for (Index l = 0; l < seq_len; ++l) {
                          const Index r = l * batch + b;
                          dQ.row(r).segment(h * dh, dh) += dQb.row(l);
                          dK.row(r).segment(h * dh, dh) += dKb.row(l);
                          dV.row(r).segment(h * dh, dh) += dVb.row(l);
                        }
                      }
                    }
                    t.accumulate(iq, dQ);
                    t.accumulate(ik, dK);
                    t.accumulate(iv, dV);
                  });
}

template <typename S>
Var<S> straight_through_onehot(const Var<S>& logits, Index blocks,
                               const Eigen::Matrix<Index, Eigen::Dynamic, Eigen::Dynamic>& choice) {
  const Matrix<S>& x = logits.value();
  if (blocks <= 0 || x.cols() % blocks != 0) throw DimensionError("straight_through: width must divide into blocks");
  if (choice.rows() != x.rows() || choice.cols() != blocks) throw DimensionError("straight_through: choice shape");
  const Index bd = x.cols() / blocks;
  Matrix<S> y = Matrix<S>::Zero(x.rows(), x.cols());
  auto probs = std::make_shared<Matrix<S>>(x.rows(), x.cols());
  for (Index r = 0; r < x.rows(); ++r) {
    for (Index k = 0; k < blocks; ++k) {
      auto seg = x.row(r).segment(k * bd, bd);
      const S m = seg.maxCoeff();
      RowVector<S> p = (seg.array() - m).exp().matrix();
      p /= p.sum();
      probs->row(r).segment(k * bd, bd) = p;
      const Index c = choice(r, k);
      if (c < 0 || c >= bd) throw DimensionError("straight_through: choice out of range");
      y(r, k * bd + c) = S(1);
    }
  }
  Tape<S>& t = logits.tape();
  const std::size_t il = logits.id();
  return t.record(std::move(y), logits.requires_grad(), [il, probs, blocks, bd](Tape<S>& t, std::size_t self) {
    const Matrix<S>& g = t.grad(self);
    const Matrix<S>& P = *probs;
    Matrix<S> d(P.rows(), P.cols());
    for (Index r = 0; r < P.rows(); ++r) {
      for (Index k = 0; k < blocks; ++k) {
        auto p = P.row(r).segment(k * bd, bd);
        auto gs = g.row(r).segment(k * bd, bd);
        const S dot = gs.dot(p);
        d.row(r).segment(k * bd, bd) = p.cwiseProduct((gs.array() - dot).matrix());
      }
    }
    t.accumulate(il, d);
  });
}

#define ORPL_INSTANTIATE_OPS(S)                                                                         \
  template Var<S> matmul(const Var<S>&, const Var<S>&);                                                \
  template Var<S> transpose(const Var<S>&);                                                            \
  template Var<S> add(const Var<S>&, const Var<S>&);                                                   \
  template Var<S> sub(const Var<S>&, const Var<S>&);                                                   \
  template Var<S> mul(const Var<S>&, const Var<S>&);                                                   \
  template Var<S> scale(const Var<S>&, S);                                                             \
  template Var<S> add_scalar(const Var<S>&, S);                                                        \
  template Var<S> relu(const Var<S>&);                                                                 \
  template Var<S> swish(const Var<S>&);                                                                \
  template Var<S> tanh(const Var<S>&);                                                                 \
  template Var<S> sigmoid(const Var<S>&);                                                              \
  template Var<S> exp(const Var<S>&);                                                                  \
  template Var<S> log(const Var<S>&);                                                                  \
  template Var<S> softplus(const Var<S>&);                                                             \
  template Var<S> square(const Var<S>&);                                                               \
  template Var<S> abs(const Var<S>&);                                                                  \
  template Var<S> sqrt(const Var<S>&);                                                                 \
  template Var<S> clamp(const Var<S>&, S, S);                                                          \
  template Var<S> sum(const Var<S>&);                                                                  \
  template Var<S> mean(const Var<S>&);                                                                 \
  template Var<S> row_sum(const Var<S>&);                                                              \
  template Var<S> col_sum(const Var<S>&);                                                              \
  template Var<S> logsumexp_rows(const Var<S>&);                                                       \
  template Var<S> softmax_rows(const Var<S>&);                                                         \
  template Var<S> concat_cols(std::span<const Var<S>>);                                                \
  template Var<S> concat_rows(std::span<const Var<S>>);                                                \
  template Var<S> slice_cols(const Var<S>&, Index, Index);                                             \
  template Var<S> slice_rows(const Var<S>&, Index, Index);                                             \
  template Var<S> gather_rows(const Var<S>&, std::span<const Index>);                                  \
  template Var<S> broadcast_rows(const Var<S>&, Index);                                                \
  template Var<S> stop_gradient(const Var<S>&);                                                        \
  template Var<S> attention(const Var<S>&, const Var<S>&, const Var<S>&, Index, Index, Index, bool);   \
  template Var<S> straight_through_onehot(const Var<S>&, Index,                                        \
                                          const Eigen::Matrix<Index, Eigen::Dynamic, Eigen::Dynamic>&);

ORPL_INSTANTIATE_OPS(float)
ORPL_INSTANTIATE_OPS(double)

}  // namespace orpl
