#pragma once

#include <vector>

#include "jse/types.hpp"

namespace jse {

/// One M x M complex matrix per time-frequency bin, stored [n][f] column-major.
class MatrixField {
 public:
  MatrixField() = default;
  MatrixField(std::size_t frames, std::size_t bins, std::size_t channels)
      : frames_(frames), bins_(bins), channels_(channels),
        data_(frames * bins * channels * channels, Complex{}) {}

  std::size_t frames() const { return frames_; }
  std::size_t bins() const { return bins_; }
  std::size_t channels() const { return channels_; }

  CMat at(std::size_t n, std::size_t f) const {
    const auto M = static_cast<Eigen::Index>(channels_);
    return Eigen::Map<const Eigen::MatrixXcd>(ptr(n, f), M, M);
  }
  void set(std::size_t n, std::size_t f, const CMat& v) {
    const auto M = static_cast<Eigen::Index>(channels_);
    Eigen::Map<Eigen::MatrixXcd>(ptr(n, f), M, M) = v;
  }
  Complex* ptr(std::size_t n, std::size_t f) { return &data_[(n * bins_ + f) * channels_ * channels_]; }
  const Complex* ptr(std::size_t n, std::size_t f) const {
    return &data_[(n * bins_ + f) * channels_ * channels_];
  }

  const std::vector<Complex>& raw() const { return data_; }

 private:
  std::size_t frames_ = 0;
  std::size_t bins_ = 0;
  std::size_t channels_ = 0;
  std::vector<Complex> data_;
};

}  // namespace jse
