#include "uqgfn/nn/ops.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "uqgfn/common/errors.hpp"

namespace uqgfn::nn {

namespace {

enum class Broadcast { kSame, kColumn, kRow, kScalar };

Broadcast broadcast_kind(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() == b.rows() && a.cols() == b.cols()) return Broadcast::kSame;
  if (b.rows() == 1 && b.cols() == 1) return Broadcast::kScalar;
  if (b.cols() == 1 && b.rows() == a.rows()) return Broadcast::kColumn;
  if (b.rows() == 1 && b.cols() == a.cols()) return Broadcast::kRow;
  throw UsageError(std::string(op) + ": incompatible shapes " + std::to_string(a.rows()) + "x" +
                   std::to_string(a.cols()) + " and " + std::to_string(b.rows()) + "x" +
                   std::to_string(b.cols()));
}

Matrix expand(const Matrix& b, Broadcast kind, Eigen::Index rows, Eigen::Index cols) {
  switch (kind) {
    case Broadcast::kSame: return b;
    case Broadcast::kScalar: return Matrix::Constant(rows, cols, b(0, 0));
    case Broadcast::kColumn: return b.replicate(1, cols);
    case Broadcast::kRow: return b.replicate(rows, 1);
  }
  return b;
}

Matrix reduce(const Matrix& g, Broadcast kind) {
  switch (kind) {
    case Broadcast::kSame: return g;
    case Broadcast::kScalar: return Matrix::Constant(1, 1, g.sum());
    case Broadcast::kColumn: return g.rowwise().sum();
    case Broadcast::kRow: return g.colwise().sum();
  }
  return g;
}

Tape& tape_of(Var a) {
  if (!a.valid()) throw UsageError("op applied to an unbound Var");
  return *a.tape();
}

template <class Fwd, class Deriv>
Var unary(Var a, Fwd fwd, Deriv deriv) {
  Tape& t = tape_of(a);
  const int ia = a.index();
  Matrix out = a.value().unaryExpr(fwd);
  return t.record(std::move(out), {a}, [ia, deriv](Tape& tape, int self) {
    const Matrix& x = tape.value_at(ia);
    const Matrix& y = tape.value_at(self);
    const Matrix& g = tape.grad_at(self);
    Matrix d(x.rows(), x.cols());
    for (Eigen::Index k = 0; k < x.size(); ++k) d(k) = g(k) * deriv(x(k), y(k));
    tape.accumulate(ia, d);
  });
}

}  // namespace

Var matmul(Var a, Var b) {
  Tape& t = tape_of(a);
  if (a.cols() != b.rows())
    throw UsageError("matmul: inner dimensions differ (" + std::to_string(a.cols()) + " vs " +
                     std::to_string(b.rows()) + ")");
  const int ia = a.index();
  const int ib = b.index();
  Matrix out = a.value() * b.value();
  return t.record(std::move(out), {a, b}, [ia, ib](Tape& tape, int self) {
    const Matrix& g = tape.grad_at(self);
    if (tape.requires_grad(ia)) tape.accumulate_expr(ia, g * tape.value_at(ib).transpose());
    if (tape.requires_grad(ib)) tape.accumulate_expr(ib, tape.value_at(ia).transpose() * g);
  });
}

Var add(Var a, Var b) {
  Tape& t = tape_of(a);
  const Broadcast kind = broadcast_kind(a.value(), b.value(), "add");
  const int ia = a.index();
  const int ib = b.index();
  Matrix out = a.value() + expand(b.value(), kind, a.rows(), a.cols());
  return t.record(std::move(out), {a, b}, [ia, ib, kind](Tape& tape, int self) {
    const Matrix& g = tape.grad_at(self);
    tape.accumulate(ia, g);
    if (tape.requires_grad(ib)) tape.accumulate(ib, reduce(g, kind));
  });
}

Var sub(Var a, Var b) {
  Tape& t = tape_of(a);
  const Broadcast kind = broadcast_kind(a.value(), b.value(), "sub");
  const int ia = a.index();
  const int ib = b.index();
  Matrix out = a.value() - expand(b.value(), kind, a.rows(), a.cols());
  return t.record(std::move(out), {a, b}, [ia, ib, kind](Tape& tape, int self) {
    const Matrix& g = tape.grad_at(self);
    tape.accumulate(ia, g);
    if (tape.requires_grad(ib)) tape.accumulate(ib, -reduce(g, kind));
  });
}

Var mul(Var a, Var b) {
  Tape& t = tape_of(a);
  const Broadcast kind = broadcast_kind(a.value(), b.value(), "mul");
  const int ia = a.index();
  const int ib = b.index();
  Matrix out = a.value().cwiseProduct(expand(b.value(), kind, a.rows(), a.cols()));
  return t.record(std::move(out), {a, b}, [ia, ib, kind](Tape& tape, int self) {
    const Matrix& g = tape.grad_at(self);
    const Matrix& av = tape.value_at(ia);
    const Matrix bv = expand(tape.value_at(ib), kind, av.rows(), av.cols());
    if (tape.requires_grad(ia)) tape.accumulate_expr(ia, g.cwiseProduct(bv));
    if (tape.requires_grad(ib)) tape.accumulate(ib, reduce(g.cwiseProduct(av), kind));
  });
}

Var scale(Var a, double factor) {
  Tape& t = tape_of(a);
  const int ia = a.index();
  return t.record(a.value() * factor, {a}, [ia, factor](Tape& tape, int self) {
    tape.accumulate_expr(ia, tape.grad_at(self) * factor);
  });
}

Var add_scalar(Var a, double offset) {
  Tape& t = tape_of(a);
  const int ia = a.index();
  Matrix out = a.value().array() + offset;
  return t.record(std::move(out), {a},
                  [ia](Tape& tape, int self) { tape.accumulate(ia, tape.grad_at(self)); });
}

Var neg(Var a) { return scale(a, -1.0); }

Var relu(Var a) {
  return unary(
      a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var tanh(Var a) {
  return unary(
      a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var sigmoid(Var a) {
  return unary(
      a,
      [](double x) {
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Var exp(Var a) {
  return unary(
      a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var log(Var a) {
  if ((a.value().array() <= 0.0).any()) throw NumericalError("log of a non-positive value");
  return unary(
      a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var square(Var a) {
  return unary(
      a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var clamp(Var a, double lo, double hi) {
  return unary(
      a, [lo, hi](double x) { return x < lo ? lo : (x > hi ? hi : x); },
      [lo, hi](double x, double) { return (x < lo || x > hi) ? 0.0 : 1.0; });
}

Var sum(Var a) {
  Tape& t = tape_of(a);
  const int ia = a.index();
  return t.record(Matrix::Constant(1, 1, a.value().sum()), {a}, [ia](Tape& tape, int self) {
    const Matrix& x = tape.value_at(ia);
    tape.accumulate_expr(ia, Matrix::Constant(x.rows(), x.cols(), tape.grad_at(self)(0, 0)));
  });
}

Var mean(Var a) {
  const double n = static_cast<double>(a.value().size());
  if (n == 0.0) throw UsageError("mean of an empty Var");
  return scale(sum(a), 1.0 / n);
}

Var sum_rows(Var a) {
  Tape& t = tape_of(a);
  const int ia = a.index();
  Matrix out = a.value().colwise().sum();
  return t.record(std::move(out), {a}, [ia](Tape& tape, int self) {
    const Matrix& x = tape.value_at(ia);
    tape.accumulate_expr(ia, tape.grad_at(self).replicate(x.rows(), 1));
  });
}

Var log_softmax(Var a, std::span<const std::uint8_t> mask) {
  Tape& t = tape_of(a);
  const Matrix& x = a.value();
  if (!mask.empty() && static_cast<Eigen::Index>(mask.size()) != x.size())
    throw UsageError("log_softmax: mask size does not match input");
  std::vector<std::uint8_t> m(mask.begin(), mask.end());
  auto valid = [&m, &x](Eigen::Index r, Eigen::Index c) {
    return m.empty() || m[static_cast<std::size_t>(c * x.rows() + r)] != 0;
  };
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    double hi = -std::numeric_limits<double>::infinity();
    for (Eigen::Index r = 0; r < x.rows(); ++r)
      if (valid(r, c)) hi = std::max(hi, x(r, c));
    if (!std::isfinite(hi)) throw UsageError("log_softmax: column with no valid entry");
    double z = 0.0;
    for (Eigen::Index r = 0; r < x.rows(); ++r)
      if (valid(r, c)) z += std::exp(x(r, c) - hi);
    const double lse = hi + std::log(z);
    for (Eigen::Index r = 0; r < x.rows(); ++r) out(r, c) = valid(r, c) ? x(r, c) - lse : kMaskedLogProb;
  }
  const int ia = a.index();
  return t.record(std::move(out), {a}, [ia, m = std::move(m)](Tape& tape, int self) {
    const Matrix& y = tape.value_at(self);
    const Matrix& g = tape.grad_at(self);
    Matrix d = Matrix::Zero(y.rows(), y.cols());
    for (Eigen::Index c = 0; c < y.cols(); ++c) {
      double gsum = 0.0;
      for (Eigen::Index r = 0; r < y.rows(); ++r)
        if (m.empty() || m[static_cast<std::size_t>(c * y.rows() + r)]) gsum += g(r, c);
      for (Eigen::Index r = 0; r < y.rows(); ++r)
        if (m.empty() || m[static_cast<std::size_t>(c * y.rows() + r)])
          d(r, c) = g(r, c) - std::exp(y(r, c)) * gsum;
    }
    tape.accumulate(ia, d);
  });
}

Var pick(Var a, std::span<const int> rows) {
  Tape& t = tape_of(a);
  const Matrix& x = a.value();
  if (static_cast<Eigen::Index>(rows.size()) != x.cols()) throw UsageError("pick: one row index per column required");
  Matrix out(1, x.cols());
  std::vector<int> r(rows.begin(), rows.end());
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    const int row = r[static_cast<std::size_t>(c)];
    if (row < 0 || row >= x.rows()) throw UsageError("pick: row index out of range");
    out(0, c) = x(row, c);
  }
  const int ia = a.index();
  return t.record(std::move(out), {a}, [ia, r = std::move(r)](Tape& tape, int self) {
    const Matrix& x = tape.value_at(ia);
    const Matrix& g = tape.grad_at(self);
    Matrix d = Matrix::Zero(x.rows(), x.cols());
    for (Eigen::Index c = 0; c < x.cols(); ++c) d(r[static_cast<std::size_t>(c)], c) = g(0, c);
    tape.accumulate(ia, d);
  });
}

Var slice_rows(Var a, Eigen::Index start, Eigen::Index count) {
  Tape& t = tape_of(a);
  if (start < 0 || count < 0 || start + count > a.rows()) throw UsageError("slice_rows: range out of bounds");
  const int ia = a.index();
  Matrix out = a.value().middleRows(start, count);
  return t.record(std::move(out), {a}, [ia, start, count](Tape& tape, int self) {
    const Matrix& x = tape.value_at(ia);
    Matrix d = Matrix::Zero(x.rows(), x.cols());
    d.middleRows(start, count) = tape.grad_at(self);
    tape.accumulate(ia, d);
  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw UsageError("concat_rows: no parts");
  Tape& t = tape_of(parts[0]);
  Eigen::Index rows = 0;
  const Eigen::Index cols = parts[0].cols();
  for (Var p : parts) {
    if (p.cols() != cols) throw UsageError("concat_rows: column counts differ");
    rows += p.rows();
  }
  Matrix out(rows, cols);
  std::vector<int> ids;
  std::vector<Eigen::Index> offsets;
  Eigen::Index off = 0;
  for (Var p : parts) {
    out.middleRows(off, p.rows()) = p.value();
    ids.push_back(p.index());
    offsets.push_back(off);
    off += p.rows();
  }
  return t.record(std::move(out), parts, [ids, offsets](Tape& tape, int self) {
    const Matrix& g = tape.grad_at(self);
    for (std::size_t k = 0; k < ids.size(); ++k) {
      const Eigen::Index r = tape.value_at(ids[k]).rows();
      tape.accumulate_expr(ids[k], g.middleRows(offsets[k], r));
    }
  });
}

Var gather_cols(Var table, std::span<const int> ids) {
  Tape& t = tape_of(table);
  const Matrix& w = table.value();
  std::vector<int> idx(ids.begin(), ids.end());
  Matrix out(w.rows(), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t j = 0; j < idx.size(); ++j) {
    if (idx[j] < 0 || idx[j] >= w.cols()) throw UsageError("gather_cols: id out of range");
    out.col(static_cast<Eigen::Index>(j)) = w.col(idx[j]);
  }
  const int it = table.index();
  return t.record(std::move(out), {table}, [it, idx = std::move(idx)](Tape& tape, int self) {
    const Matrix& w = tape.value_at(it);
    const Matrix& g = tape.grad_at(self);
    Matrix d = Matrix::Zero(w.rows(), w.cols());
    for (std::size_t j = 0; j < idx.size(); ++j) d.col(idx[j]) += g.col(static_cast<Eigen::Index>(j));
    tape.accumulate(it, d);
  });
}

Var segment_sum(Var a, std::span<const int> lengths) {
  Tape& t = tape_of(a);
  if (a.rows() != 1) throw UsageError("segment_sum expects a 1 x N row");
  std::vector<int> len(lengths.begin(), lengths.end());
  Eigen::Index total = 0;
  for (int l : len) {
    if (l < 0) throw UsageError("segment_sum: negative length");
    total += l;
  }
  if (total != a.cols()) throw UsageError("segment_sum: lengths do not cover the input");
  Matrix out(1, static_cast<Eigen::Index>(len.size()));
  Eigen::Index off = 0;
  for (std::size_t s = 0; s < len.size(); ++s) {
    out(0, static_cast<Eigen::Index>(s)) = a.value().middleCols(off, len[s]).sum();
    off += len[s];
  }
  const int ia = a.index();
  return t.record(std::move(out), {a}, [ia, len = std::move(len)](Tape& tape, int self) {
    const Matrix& g = tape.grad_at(self);
    Matrix d(1, tape.value_at(ia).cols());
    Eigen::Index off = 0;
    for (std::size_t s = 0; s < len.size(); ++s) {
      d.middleCols(off, len[s]).setConstant(g(0, static_cast<Eigen::Index>(s)));
      off += len[s];
    }
    tape.accumulate(ia, d);
  });
}

namespace {

std::vector<int> checked_runs(const Var& a, std::span<const int> lengths, const char* what) {
  if (a.rows() != 1) throw UsageError(std::string(what) + " expects a 1 x N row");
  std::vector<int> len(lengths.begin(), lengths.end());
  Eigen::Index total = 0;
  for (int l : len) {
    if (l < 0) throw UsageError(std::string(what) + ": negative length");
    total += l;
  }
  if (total != a.cols()) throw UsageError(std::string(what) + ": lengths do not cover the input");
  return len;
}

Matrix center_runs(const Matrix& x, const std::vector<int>& len) {
  Matrix out = x;
  Eigen::Index off = 0;
  for (int l : len) {
    if (l > 0) out.middleCols(off, l).array() -= x.middleCols(off, l).mean();
    off += l;
  }
  return out;
}

}  // namespace

Var segment_center(Var a, std::span<const int> lengths) {
  Tape& t = tape_of(a);
  std::vector<int> len = checked_runs(a, lengths, "segment_center");
  Matrix out = center_runs(a.value(), len);
  const int ia = a.index();
  return t.record(std::move(out), {a}, [ia, len = std::move(len)](Tape& tape, int self) {
    tape.accumulate(ia, center_runs(tape.grad_at(self), len));
  });
}

Var segment_cumsum_exclusive(Var a, std::span<const int> lengths) {
  Tape& t = tape_of(a);
  std::vector<int> len = checked_runs(a, lengths, "segment_cumsum_exclusive");
  Matrix out(1, a.cols());
  Eigen::Index off = 0;
  for (int l : len) {
    double run = 0.0;
    for (int k = 0; k < l; ++k) {
      out(0, off + k) = run;
      run += a.value()(0, off + k);
    }
    off += l;
  }
  const int ia = a.index();
  return t.record(std::move(out), {a}, [ia, len = std::move(len)](Tape& tape, int self) {
    const Matrix& g = tape.grad_at(self);
    Matrix d(1, g.cols());
    Eigen::Index off = 0;
    for (int l : len) {
      double run = 0.0;
      for (int k = l - 1; k >= 0; --k) {
        d(0, off + k) = run;
        run += g(0, off + k);
      }
      off += l;
    }
    tape.accumulate(ia, d);
  });
}

Var scatter_cols(Var a, std::span<const int> ids, Eigen::Index total) {
  Tape& t = tape_of(a);
  if (static_cast<Eigen::Index>(ids.size()) != a.cols()) throw UsageError("scatter_cols: id count mismatch");
  std::vector<int> id(ids.begin(), ids.end());
  Matrix out = Matrix::Zero(a.rows(), total);
  for (std::size_t j = 0; j < id.size(); ++j) {
    if (id[j] < 0 || id[j] >= total) throw UsageError("scatter_cols: id out of range");
    out.col(id[j]) += a.value().col(static_cast<Eigen::Index>(j));
  }
  const int ia = a.index();
  return t.record(std::move(out), {a}, [ia, id = std::move(id)](Tape& tape, int self) {
    const Matrix& g = tape.grad_at(self);
    Matrix d(g.rows(), static_cast<Eigen::Index>(id.size()));
    for (std::size_t j = 0; j < id.size(); ++j) d.col(static_cast<Eigen::Index>(j)) = g.col(id[j]);
    tape.accumulate(ia, d);
  });
}

}  // namespace uqgfn::nn
