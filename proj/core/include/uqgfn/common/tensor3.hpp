#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "uqgfn/common/errors.hpp"
#include "uqgfn/common/linalg.hpp"

namespace uqgfn {

/// Dense rank-3 array indexed (item, step, channel), row-major in that order.
class Tensor3 {
 public:
  Tensor3() = default;
  Tensor3(std::size_t items, std::size_t steps, std::size_t channels, double fill = 0.0)
      : items_(items), steps_(steps), channels_(channels), data_(items * steps * channels, fill) {}

  std::size_t items() const { return items_; }
  std::size_t steps() const { return steps_; }
  std::size_t channels() const { return channels_; }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t t, std::size_t c) { return data_[offset(i, t, c)]; }
  double operator()(std::size_t i, std::size_t t, std::size_t c) const { return data_[offset(i, t, c)]; }

  /// steps x channels slice of one item.
  Matrix item(std::size_t i) const {
    Matrix m(static_cast<Eigen::Index>(steps_), static_cast<Eigen::Index>(channels_));
    for (std::size_t t = 0; t < steps_; ++t)
      for (std::size_t c = 0; c < channels_; ++c)
        m(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(c)) = (*this)(i, t, c);
    return m;
  }
  void set_item(std::size_t i, const Matrix& m) {
    if (static_cast<std::size_t>(m.rows()) != steps_ || static_cast<std::size_t>(m.cols()) != channels_)
      throw UsageError("Tensor3::set_item: slice shape mismatch");
    for (std::size_t t = 0; t < steps_; ++t)
      for (std::size_t c = 0; c < channels_; ++c)
        (*this)(i, t, c) = m(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(c));
  }
  /// All items' values of one (step, channel) cell.
  Vector column(std::size_t t, std::size_t c) const {
    Vector v(static_cast<Eigen::Index>(items_));
    for (std::size_t i = 0; i < items_; ++i) v(static_cast<Eigen::Index>(i)) = (*this)(i, t, c);
    return v;
  }

  const std::vector<double>& data() const { return data_; }

 private:
  std::size_t offset(std::size_t i, std::size_t t, std::size_t c) const {
    return (i * steps_ + t) * channels_ + c;
  }

  std::size_t items_ = 0;
  std::size_t steps_ = 0;
  std::size_t channels_ = 0;
  std::vector<double> data_;
};

}  // namespace uqgfn
