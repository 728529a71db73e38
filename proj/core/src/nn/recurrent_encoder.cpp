#include "uqgfn/nn/recurrent_encoder.hpp"

#include <algorithm>
#include <cmath>

#include "uqgfn/common/errors.hpp"
#include "uqgfn/nn/dense_net.hpp"
#include "uqgfn/nn/ops.hpp"

namespace uqgfn::nn {

RecurrentEncoder::RecurrentEncoder(int vocab_size, int embed_dim, int hidden_dim, Rng& rng) {
  if (vocab_size <= 0 || embed_dim <= 0 || hidden_dim <= 0)
    throw UsageError("RecurrentEncoder dimensions must be positive");
  embedding = Parameter(glorot_uniform(embed_dim, vocab_size, rng));
  wz = Parameter(glorot_uniform(hidden_dim, embed_dim, rng));
  uz = Parameter(glorot_uniform(hidden_dim, hidden_dim, rng));
  bz = Parameter(Matrix::Zero(hidden_dim, 1));
  wr = Parameter(glorot_uniform(hidden_dim, embed_dim, rng));
  ur = Parameter(glorot_uniform(hidden_dim, hidden_dim, rng));
  br = Parameter(Matrix::Zero(hidden_dim, 1));
  wn = Parameter(glorot_uniform(hidden_dim, embed_dim, rng));
  un = Parameter(glorot_uniform(hidden_dim, hidden_dim, rng));
  bn = Parameter(Matrix::Zero(hidden_dim, 1));
  bun = Parameter(Matrix::Zero(hidden_dim, 1));
}

void RecurrentEncoder::check_tokens(std::span<const std::vector<int>> sequences) const {
  for (const auto& seq : sequences)
    for (int t : seq)
      if (t < 0 || t >= vocab_size()) throw UsageError("token id " + std::to_string(t) + " outside vocabulary");
}

Vector RecurrentEncoder::encode(std::span<const int> tokens) const {
  std::vector<int> seq(tokens.begin(), tokens.end());
  Matrix out = encode_batch(std::span<const std::vector<int>>(&seq, 1));
  return out.col(0);
}

namespace {

Matrix sigmoid_of(const Matrix& x) {
  return x.unaryExpr([](double v) {
    if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
  });
}

std::size_t max_length(std::span<const std::vector<int>> sequences) {
  std::size_t n = 0;
  for (const auto& s : sequences) n = std::max(n, s.size());
  return n;
}

}  // namespace

Matrix RecurrentEncoder::encode_batch(std::span<const std::vector<int>> sequences) const {
  check_tokens(sequences);
  const Eigen::Index batch = static_cast<Eigen::Index>(sequences.size());
  const Eigen::Index hd = hidden_dim();
  Matrix h = Matrix::Zero(hd, batch);
  const std::size_t steps = max_length(sequences);
  for (std::size_t t = 0; t < steps; ++t) {
    Matrix e(embed_dim(), batch);
    Matrix active = Matrix::Zero(hd, batch);
    for (Eigen::Index b = 0; b < batch; ++b) {
      const auto& seq = sequences[static_cast<std::size_t>(b)];
      const bool live = t < seq.size();
      e.col(b) = embedding.value.col(live ? seq[t] : 0);
      if (live) active.col(b).setOnes();
    }
    Matrix z = wz.value * e + uz.value * h;
    z.colwise() += bz.value.col(0);
    z = sigmoid_of(z);
    Matrix r = wr.value * e + ur.value * h;
    r.colwise() += br.value.col(0);
    r = sigmoid_of(r);
    Matrix hn = un.value * h;
    hn.colwise() += bun.value.col(0);
    Matrix n = wn.value * e + r.cwiseProduct(hn);
    n.colwise() += bn.value.col(0);
    n = n.array().tanh().matrix();
    Matrix next = n + z.cwiseProduct(h - n);
    h += active.cwiseProduct(next - h);
  }
  return h;
}

Var RecurrentEncoder::encode_batch(Tape& tape, std::span<const std::vector<int>> sequences) {
  check_tokens(sequences);
  const Eigen::Index batch = static_cast<Eigen::Index>(sequences.size());
  const Eigen::Index hd = hidden_dim();
  Var h = tape.constant(Matrix::Zero(hd, batch));
  const std::size_t steps = max_length(sequences);
  if (steps == 0) return h;
  Var emb = tape.parameter(embedding);
  Var Wz = tape.parameter(wz), Uz = tape.parameter(uz), Bz = tape.parameter(bz);
  Var Wr = tape.parameter(wr), Ur = tape.parameter(ur), Br = tape.parameter(br);
  Var Wn = tape.parameter(wn), Un = tape.parameter(un), Bn = tape.parameter(bn), Bun = tape.parameter(bun);
  for (std::size_t t = 0; t < steps; ++t) {
    std::vector<int> ids(static_cast<std::size_t>(batch));
    Matrix active = Matrix::Zero(hd, batch);
    for (Eigen::Index b = 0; b < batch; ++b) {
      const auto& seq = sequences[static_cast<std::size_t>(b)];
      const bool live = t < seq.size();
      ids[static_cast<std::size_t>(b)] = live ? seq[t] : 0;
      if (live) active.col(b).setOnes();
    }
    Var e = gather_cols(emb, ids);
    Var z = sigmoid(add(add(matmul(Wz, e), matmul(Uz, h)), Bz));
    Var r = sigmoid(add(add(matmul(Wr, e), matmul(Ur, h)), Br));
    Var n = nn::tanh(add(add(matmul(Wn, e), mul(r, add(matmul(Un, h), Bun))), Bn));
    Var next = add(n, mul(z, sub(h, n)));
    h = add(h, mul(tape.constant(std::move(active)), sub(next, h)));
  }
  return h;
}

std::vector<Parameter*> RecurrentEncoder::parameters() {
  return {&embedding, &wz, &uz, &bz, &wr, &ur, &br, &wn, &un, &bn, &bun};
}

nlohmann::json RecurrentEncoder::to_json() const {
  return {{"type", "gru"},
          {"embedding", matrix_to_json(embedding.value)},
          {"wz", matrix_to_json(wz.value)},
          {"uz", matrix_to_json(uz.value)},
          {"bz", matrix_to_json(bz.value)},
          {"wr", matrix_to_json(wr.value)},
          {"ur", matrix_to_json(ur.value)},
          {"br", matrix_to_json(br.value)},
          {"wn", matrix_to_json(wn.value)},
          {"un", matrix_to_json(un.value)},
          {"bn", matrix_to_json(bn.value)},
          {"bun", matrix_to_json(bun.value)}};
}

RecurrentEncoder RecurrentEncoder::from_json(const nlohmann::json& doc) {
  RecurrentEncoder enc;
  enc.embedding = Parameter(matrix_from_json(doc.at("embedding")));
  enc.wz = Parameter(matrix_from_json(doc.at("wz")));
  enc.uz = Parameter(matrix_from_json(doc.at("uz")));
  enc.bz = Parameter(matrix_from_json(doc.at("bz")));
  enc.wr = Parameter(matrix_from_json(doc.at("wr")));
  enc.ur = Parameter(matrix_from_json(doc.at("ur")));
  enc.br = Parameter(matrix_from_json(doc.at("br")));
  enc.wn = Parameter(matrix_from_json(doc.at("wn")));
  enc.un = Parameter(matrix_from_json(doc.at("un")));
  enc.bn = Parameter(matrix_from_json(doc.at("bn")));
  enc.bun = Parameter(matrix_from_json(doc.at("bun")));
  return enc;
}

}  // namespace uqgfn::nn
