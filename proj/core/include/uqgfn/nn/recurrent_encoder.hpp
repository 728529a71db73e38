#pragma once

#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "uqgfn/common/rng.hpp"
#include "uqgfn/nn/tape.hpp"

namespace uqgfn::nn {

/// Token embedding followed by a single gated recurrent (GRU) cell.
///
///   z = sigmoid(Wz e + Uz h + bz)
///   r = sigmoid(Wr e + Ur h + br)
///   n = tanh(Wn e + bn + r * (Un h + bun))
///   h' = (1 - z) * n + z * h
///
/// The encoding of a sequence is the hidden state after its last token; the
/// empty sequence encodes to the zero initial state.
class RecurrentEncoder {
 public:
  RecurrentEncoder() = default;
  RecurrentEncoder(int vocab_size, int embed_dim, int hidden_dim, Rng& rng);

  int vocab_size() const { return static_cast<int>(embedding.value.cols()); }
  int embed_dim() const { return static_cast<int>(embedding.value.rows()); }
  int hidden_dim() const { return static_cast<int>(wz.value.rows()); }

  Vector encode(std::span<const int> tokens) const;
  /// hidden_dim x B encodings of variable-length sequences.
  Matrix encode_batch(std::span<const std::vector<int>> sequences) const;
  Var encode_batch(Tape& tape, std::span<const std::vector<int>> sequences);

  std::vector<Parameter*> parameters();

  nlohmann::json to_json() const;
  static RecurrentEncoder from_json(const nlohmann::json& doc);

  Parameter embedding;  // embed_dim x vocab
  Parameter wz, uz, bz;
  Parameter wr, ur, br;
  Parameter wn, un, bn, bun;

 private:
  void check_tokens(std::span<const std::vector<int>> sequences) const;
};

}  // namespace uqgfn::nn
