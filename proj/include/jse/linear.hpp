#pragma once

#include <vector>

#include "jse/dsp.hpp"
#include "jse/gaussian.hpp"
#include "jse/matrix_field.hpp"

namespace jse {

/// Multiframe echo canceller h(k, f) in C^M, k = 0..K-1.
class EchoFilter {
 public:
  EchoFilter() = default;
  EchoFilter(std::size_t bins, std::size_t taps, std::size_t channels)
      : bins_(bins), taps_(taps), channels_(channels), h_(bins * taps * channels) {}

  std::size_t bins() const { return bins_; }
  std::size_t taps() const { return taps_; }
  std::size_t channels() const { return channels_; }

  Complex& operator()(std::size_t f, std::size_t k, std::size_t m) { return h_[(f * taps_ + k) * channels_ + m]; }
  Complex operator()(std::size_t f, std::size_t k, std::size_t m) const { return h_[(f * taps_ + k) * channels_ + m]; }

  /// h_underline(f) = [h(0, f); ...; h(K-1, f)].
  CVecX stacked(std::size_t f) const;
  void set_stacked(std::size_t f, const CVecX& v);

  std::vector<Complex>& raw() { return h_; }
  const std::vector<Complex>& raw() const { return h_; }
  bool operator==(const EchoFilter&) const = default;

 private:
  std::size_t bins_ = 0, taps_ = 0, channels_ = 0;
  std::vector<Complex> h_;
};

/// Delayed multichannel linear-prediction filter G(l, f), l = delay..delay+L-1.
/// Tap index j in [0, L) refers to lag delay + j.
class DereverbFilter {
 public:
  DereverbFilter() = default;
  DereverbFilter(std::size_t bins, std::size_t taps, std::size_t channels, std::size_t delay)
      : bins_(bins), taps_(taps), channels_(channels), delay_(delay), g_(bins * taps * channels * channels) {}

  std::size_t bins() const { return bins_; }
  std::size_t taps() const { return taps_; }
  std::size_t channels() const { return channels_; }
  std::size_t delay() const { return delay_; }

  /// Entry (m, m') of G(delay + j, f).
  Complex& operator()(std::size_t f, std::size_t j, std::size_t m, std::size_t mp) {
    return g_[((f * taps_ + j) * channels_ + m) * channels_ + mp];
  }
  Complex operator()(std::size_t f, std::size_t j, std::size_t m, std::size_t mp) const {
    return g_[((f * taps_ + j) * channels_ + m) * channels_ + mp];
  }
  CMat tap(std::size_t f, std::size_t j) const;
  void set_tap(std::size_t f, std::size_t j, const CMat& g);

  /// g_underline(f): per tap, the rows of G stacked as [g_1; ...; g_M] with g_m = G(m, :)^T.
  CVecX stacked(std::size_t f) const;
  void set_stacked(std::size_t f, const CVecX& v);

  std::vector<Complex>& raw() { return g_; }
  const std::vector<Complex>& raw() const { return g_; }
  bool operator==(const DereverbFilter&) const = default;

 private:
  std::size_t bins_ = 0, taps_ = 0, channels_ = 0, delay_ = 1;
  std::vector<Complex> g_;
};

struct EchoCancelled {
  Spectrogram e;      // d - y_hat
  Spectrogram y_hat;  // sum_k h(k) x(n - k)
};

EchoCancelled apply_echo_canceller(const Spectrogram& d, const Spectrogram& x, const EchoFilter& h);

struct Dereverberated {
  Spectrogram r;      // e - e_l_hat
  Spectrogram e_hat;  // sum_l G(l) e(n - l)
};

Dereverberated apply_dereverb(const Spectrogram& e, const DereverbFilter& g);

/// The M x M taps X_r(j, f) = x(j, f) I - sum_l x(j - l, f) G(l, f) for every frame j.
/// X_r_underline(n, f) is [X_r(n), X_r(n-1), ..., X_r(n-K+1)].
class FarendTaps {
 public:
  FarendTaps() = default;
  FarendTaps(std::size_t frames, std::size_t bins, std::size_t channels, std::size_t taps)
      : taps_(taps), field_(frames, bins, channels) {}

  std::size_t frames() const { return field_.frames(); }
  std::size_t bins() const { return field_.bins(); }
  std::size_t channels() const { return field_.channels(); }
  std::size_t taps() const { return taps_; }

  /// X_r(n - k, f); zero for n - k < 0.
  CMat tap(long n, std::size_t f, std::size_t k) const;
  /// The M x MK matrix X_r_underline(n, f).
  CMatX stacked(long n, std::size_t f) const;

  MatrixField& field() { return field_; }
  const MatrixField& field() const { return field_; }

 private:
  std::size_t taps_ = 0;
  MatrixField field_;
};

FarendTaps dereverberated_farend_taps(const Spectrogram& x, const DereverbFilter& g, std::size_t taps,
                                      std::size_t channels);

/// r_d(n, f) = d(n, f) - sum_l G(l, f) d(n - l, f).
Spectrogram dereverberated_mixture(const Spectrogram& d, const DereverbFilter& g);

/// Solves (A + eps I) z = b with a Hermitian positive-definite factorization,
/// falling back to a pseudo-inverse. Throws SingularSystem on failure.
CVecX solve_regularized(const CMatX& a, const CVecX& b, double eps, std::size_t bin);

struct NormalEquations {
  std::vector<CMatX> lhs;  // per f
  std::vector<CVecX> rhs;  // per f
};

NormalEquations echo_normal_equations(const FarendTaps& xr, const Spectrogram& r_d, const MixtureCovariance& mix);

/// h_underline(f) = (P(f) + eps I)^{-1} p(f).
EchoFilter update_H(const FarendTaps& xr, const Spectrogram& r_d, const MixtureCovariance& mix,
                    double eps = kDefaultEpsilon);

/// Normal equations for G with lagged frames taken from `regressor` and the
/// prediction target `target`. The cascaded topology uses e for both; the
/// parallel topology regresses e on the mixture d.
NormalEquations dereverb_normal_equations(const Spectrogram& regressor, const Spectrogram& target,
                                          const MixtureCovariance& mix, std::size_t taps, std::size_t delay);

DereverbFilter update_G(const Spectrogram& regressor, const Spectrogram& target, const MixtureCovariance& mix,
                        std::size_t taps, std::size_t delay, double eps = kDefaultEpsilon);

inline DereverbFilter update_G(const Spectrogram& e, const MixtureCovariance& mix, std::size_t taps,
                               std::size_t delay, double eps = kDefaultEpsilon) {
  return update_G(e, e, mix, taps, delay, eps);
}

/// Multichannel WPE with per-bin PSD weights lambda = ||r||^2 / M and identity
/// spatial model, `iterations` passes starting from lambda of e itself.
DereverbFilter wpe(const Spectrogram& e, std::size_t taps, std::size_t delay, int iterations,
                   double eps = kDefaultEpsilon);

}  // namespace jse
