#pragma once

#include <span>
#include <vector>

#include "uqgfn/nn/tape.hpp"

namespace uqgfn::nn {

/// Log-probability stored for masked entries by log_softmax. Finite so that
/// products with zero weights stay zero.
inline constexpr double kMaskedLogProb = -1e30;

Var matmul(Var a, Var b);

// Elementwise binary ops. `b` may broadcast: same shape, a column (rows x 1),
// a row (1 x cols) or a scalar (1 x 1).
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);

Var scale(Var a, double factor);
Var add_scalar(Var a, double offset);
Var neg(Var a);

Var relu(Var a);
Var tanh(Var a);
Var sigmoid(Var a);
Var exp(Var a);
/// Natural log; inputs must be positive.
Var log(Var a);
Var square(Var a);
/// Clamps to [lo, hi]; gradient is zero where the clamp is active.
Var clamp(Var a, double lo, double hi);

Var sum(Var a);
Var mean(Var a);
/// Column sums as a 1 x cols row.
Var sum_rows(Var a);

/// Column-wise log-softmax. Entries with mask 0 get kMaskedLogProb and no gradient.
/// `mask` is column-major rows x cols (empty = no mask).
Var log_softmax(Var a, std::span<const std::uint8_t> mask = {});

/// out(0, j) = a(rows[j], j).
Var pick(Var a, std::span<const int> rows);
Var slice_rows(Var a, Eigen::Index start, Eigen::Index count);
Var concat_rows(std::span<const Var> parts);
/// out(:, j) = table(:, ids[j]).
Var gather_cols(Var table, std::span<const int> ids);
/// Sums consecutive runs of a 1 x N row; run lengths must add up to N.
Var segment_sum(Var a, std::span<const int> lengths);
/// Subtracts each run's mean from the entries of that run (1 x N row).
Var segment_center(Var a, std::span<const int> lengths);
/// Exclusive running sum within each run: out[k] = sum of earlier entries of the same run.
Var segment_cumsum_exclusive(Var a, std::span<const int> lengths);
/// Places column j of `a` at column ids[j] of a rows x total result; other columns are zero.
Var scatter_cols(Var a, std::span<const int> ids, Eigen::Index total);

}  // namespace uqgfn::nn
