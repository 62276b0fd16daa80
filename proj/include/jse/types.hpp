#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "jse/error.hpp"

namespace jse {

using Complex = std::complex<double>;

// Spatial matrices are at most kMaxMics x kMaxMics, so they live on the stack.
inline constexpr int kMaxMics = 8;

using CMat = Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, kMaxMics, kMaxMics>;
using CVec = Eigen::Matrix<Complex, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxMics, 1>;
using CMatX = Eigen::MatrixXcd;
using CVecX = Eigen::VectorXcd;

/// Real multichannel waveform, channel-major.
class Signal {
 public:
  Signal() = default;
  Signal(std::size_t channels, std::size_t samples)
      : channels_(channels), samples_(samples), data_(channels * samples, 0.0) {}

  std::size_t channels() const { return channels_; }
  std::size_t samples() const { return samples_; }
  bool empty() const { return channels_ == 0 || samples_ == 0; }

  double& operator()(std::size_t m, std::size_t t) { return data_[m * samples_ + t]; }
  double operator()(std::size_t m, std::size_t t) const { return data_[m * samples_ + t]; }

  std::span<double> channel(std::size_t m) { return {data_.data() + m * samples_, samples_}; }
  std::span<const double> channel(std::size_t m) const {
    return {data_.data() + m * samples_, samples_};
  }

  std::vector<double>& raw() { return data_; }
  const std::vector<double>& raw() const { return data_; }

  static Signal mono(std::vector<double> samples) {
    Signal s;
    s.channels_ = 1;
    s.samples_ = samples.size();
    s.data_ = std::move(samples);
    return s;
  }

  Signal& operator+=(const Signal& o);
  Signal& operator*=(double g);
  friend Signal operator+(Signal a, const Signal& b) { return a += b; }
  friend Signal operator-(Signal a, const Signal& b);
  friend Signal operator*(double g, Signal a) { return a *= g; }

  double energy() const;
  double energy(std::size_t begin, std::size_t end) const;

 private:
  std::size_t channels_ = 0;
  std::size_t samples_ = 0;
  std::vector<double> data_;
};

}  // namespace jse
