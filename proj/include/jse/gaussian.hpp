#pragma once

#include <array>
#include <string_view>
#include <vector>

#include "jse/dsp.hpp"
#include "jse/matrix_field.hpp"

namespace jse {

inline constexpr double kDefaultEpsilon = 1e-5;
/// Floor applied to a PSD before it is used as a divisor.
inline constexpr double kPsdFloor = 1e-12;

/// The four sources of the local Gaussian model: early near-end target,
/// residual late near-end reverberation, dereverberated residual echo and
/// dereverberated noise.
enum class Source : int { s_e = 0, s_r = 1, z_r = 2, b_r = 3 };
inline constexpr int kNumSources = 4;
inline constexpr std::array<Source, kNumSources> kSources = {Source::s_e, Source::s_r, Source::z_r, Source::b_r};
std::string_view source_name(Source c);

/// Per-source PSD v_c(n, f) and SCM R_c(f).
class SourceStats {
 public:
  SourceStats() = default;
  /// Zero PSDs and identity SCMs.
  SourceStats(std::size_t frames, std::size_t bins, std::size_t channels);

  std::size_t frames() const { return frames_; }
  std::size_t bins() const { return bins_; }
  std::size_t channels() const { return channels_; }

  double& psd(Source c, std::size_t n, std::size_t f) { return psd_[idx(c)][n * bins_ + f]; }
  double psd(Source c, std::size_t n, std::size_t f) const { return psd_[idx(c)][n * bins_ + f]; }
  std::vector<double>& psd(Source c) { return psd_[idx(c)]; }
  const std::vector<double>& psd(Source c) const { return psd_[idx(c)]; }

  CMat scm(Source c, std::size_t f) const;
  void set_scm(Source c, std::size_t f, const CMat& r);
  void reset_scms();

 private:
  static std::size_t idx(Source c) { return static_cast<std::size_t>(c); }
  std::size_t frames_ = 0, bins_ = 0, channels_ = 0;
  std::array<std::vector<double>, kNumSources> psd_;
  std::array<std::vector<Complex>, kNumSources> scm_;  // [f][M x M]
};

/// R_dd(n, f) = sum_c v_c R_c, with its inverse and log-determinant.
struct MixtureCovariance {
  MatrixField r_dd;
  MatrixField inverse;
  std::vector<double> log_det;  // [n * F + f]
  /// Bins where eps * I was added because an eigenvalue fell below eps.
  std::size_t regularized_bins = 0;
};

MixtureCovariance mixture_covariance(const SourceStats& stats, double eps = kDefaultEpsilon);

/// W_c(n, f) = v_c R_c R_dd^{-1}.
MatrixField wiener_filter(const SourceStats& stats, const MixtureCovariance& mix, Source c);

/// c_hat(n, f) = W_c(n, f) r(n, f).
Spectrogram estimate_source(const MatrixField& w, const Spectrogram& r);

/// R_hat_c = c_hat c_hat^H + (I - W_c) v_c R_c.
MatrixField posterior_moment(const Spectrogram& c_hat, const MatrixField& w, const SourceStats& stats, Source c);

enum class ScmWeighting { unweighted, psd };

/// Weighted SCM M-step followed by trace normalization to M. Returns [F] SCMs.
std::vector<CMat> update_scm(const MatrixField& r_hat, const std::vector<double>& psd, ScmWeighting weighting,
                             double eps = kDefaultEpsilon);

/// v_unc(n, f) = tr(R_c(f)^{-1} R_hat_c(n, f)) / M, tiny negatives clamped to 0.
std::vector<double> unconstrained_psd(const std::vector<CMat>& scm, const MatrixField& r_hat,
                                      double eps = kDefaultEpsilon);

struct EmStepResult {
  /// Unconstrained PSDs from the posterior moments and the updated SCMs;
  /// empty unless requested.
  std::array<std::vector<double>, kNumSources> v_unc;
};

/// One spatial EM iteration (E-step, M-step) updating the SCMs in place.
/// Streams over bins, so no per-source W_c or R_hat_c tensors are kept.
EmStepResult em_step(SourceStats& stats, const MixtureCovariance& mix, const Spectrogram& r,
                     ScmWeighting weighting, bool want_unconstrained = false, double eps = kDefaultEpsilon);

/// Hermitian part (A + A^H) / 2.
CMat hermitian_part(const CMat& a);

}  // namespace jse
