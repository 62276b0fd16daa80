#include <algorithm>
#include <cmath>

#include "jse/gaussian.hpp"

namespace jse {

std::string_view source_name(Source c) {
  switch (c) {
    case Source::s_e: return "s_e";
    case Source::s_r: return "s_r";
    case Source::z_r: return "z_r";
    case Source::b_r: return "b_r";
  }
  return "?";
}

SourceStats::SourceStats(std::size_t frames, std::size_t bins, std::size_t channels)
    : frames_(frames), bins_(bins), channels_(channels) {
  if (channels == 0 || channels > static_cast<std::size_t>(kMaxMics)) {
    throw InvalidInput("unsupported channel count " + std::to_string(channels));
  }
  for (auto& p : psd_) p.assign(frames * bins, 0.0);
  for (auto& s : scm_) s.assign(bins * channels * channels, Complex{});
  reset_scms();
}

CMat SourceStats::scm(Source c, std::size_t f) const {
  const auto M = static_cast<Eigen::Index>(channels_);
  return Eigen::Map<const Eigen::MatrixXcd>(&scm_[idx(c)][f * channels_ * channels_], M, M);
}

void SourceStats::set_scm(Source c, std::size_t f, const CMat& r) {
  const auto M = static_cast<Eigen::Index>(channels_);
  Eigen::Map<Eigen::MatrixXcd>(&scm_[idx(c)][f * channels_ * channels_], M, M) = r;
}

void SourceStats::reset_scms() {
  const auto M = static_cast<Eigen::Index>(channels_);
  const CMat eye = CMat::Identity(M, M);
  for (Source c : kSources) {
    for (std::size_t f = 0; f < bins_; ++f) set_scm(c, f, eye);
  }
}

CMat hermitian_part(const CMat& a) { return 0.5 * (a + a.adjoint()); }

MixtureCovariance mixture_covariance(const SourceStats& stats, double eps) {
  const std::size_t N = stats.frames(), F = stats.bins(), M = stats.channels();
  const auto Mi = static_cast<Eigen::Index>(M);
  MixtureCovariance mix{MatrixField(N, F, M), MatrixField(N, F, M), std::vector<double>(N * F, 0.0), 0};
  const CMat eye = CMat::Identity(Mi, Mi);

  for (std::size_t f = 0; f < F; ++f) {
    std::array<CMat, kNumSources> scm;
    for (Source c : kSources) scm[static_cast<std::size_t>(c)] = stats.scm(c, f);
    for (std::size_t n = 0; n < N; ++n) {
      CMat r = CMat::Zero(Mi, Mi);
      for (Source c : kSources) {
        const double v = stats.psd(c, n, f);
        if (v != 0.0) r += v * scm[static_cast<std::size_t>(c)];
      }
      r = hermitian_part(r);
      // min eigenvalue >= eps  <=>  r - eps I is positive semidefinite
      Eigen::LLT<CMat> shifted(r - eps * eye);
      if (shifted.info() != Eigen::Success) {
        r += eps * eye;
        ++mix.regularized_bins;
      }
      Eigen::LLT<CMat> llt(r);
      if (llt.info() != Eigen::Success) {
        r += eps * eye;
        llt.compute(r);
      }
      mix.r_dd.set(n, f, r);
      mix.inverse.set(n, f, llt.solve(eye));
      double ld = 0.0;
      const CMat L = llt.matrixL();
      for (Eigen::Index i = 0; i < Mi; ++i) ld += 2.0 * std::log(L(i, i).real());
      mix.log_det[n * F + f] = ld;
    }
  }
  return mix;
}

MatrixField wiener_filter(const SourceStats& stats, const MixtureCovariance& mix, Source c) {
  const std::size_t N = stats.frames(), F = stats.bins(), M = stats.channels();
  MatrixField w(N, F, M);
  for (std::size_t f = 0; f < F; ++f) {
    const CMat rc = stats.scm(c, f);
    for (std::size_t n = 0; n < N; ++n) {
      const double v = stats.psd(c, n, f);
      w.set(n, f, v * rc * mix.inverse.at(n, f));
    }
  }
  return w;
}

Spectrogram estimate_source(const MatrixField& w, const Spectrogram& r) {
  if (w.frames() != r.frames() || w.bins() != r.bins() || w.channels() != r.channels()) {
    throw InvalidInput("estimate_source: filter and signal shapes differ");
  }
  Spectrogram out = r.zeros_like();
  for (std::size_t n = 0; n < r.frames(); ++n) {
    for (std::size_t f = 0; f < r.bins(); ++f) {
      out.set(n, f, w.at(n, f) * r.at(static_cast<long>(n), f));
    }
  }
  return out;
}

MatrixField posterior_moment(const Spectrogram& c_hat, const MatrixField& w, const SourceStats& stats, Source c) {
  const std::size_t N = stats.frames(), F = stats.bins(), M = stats.channels();
  const auto Mi = static_cast<Eigen::Index>(M);
  const CMat eye = CMat::Identity(Mi, Mi);
  MatrixField out(N, F, M);
  for (std::size_t f = 0; f < F; ++f) {
    const CMat rc = stats.scm(c, f);
    for (std::size_t n = 0; n < N; ++n) {
      const CVec ch = c_hat.at(static_cast<long>(n), f);
      const double v = stats.psd(c, n, f);
      out.set(n, f, ch * ch.adjoint() + (eye - w.at(n, f)) * (v * rc));
    }
  }
  return out;
}

namespace {

double source_weight(ScmWeighting weighting, double v) { return weighting == ScmWeighting::unweighted ? 1.0 : v; }

/// Divides by the weight sum, symmetrizes and rescales to trace M.
/// Returns false when the accumulated matrix carries no energy.
bool finish_scm(CMat& acc, double weight_sum, double eps) {
  const auto M = static_cast<double>(acc.rows());
  acc = hermitian_part(acc / (weight_sum + eps));
  const double tr = acc.trace().real();
  if (!(tr > 1e-300) || !std::isfinite(tr)) return false;
  acc *= M / tr;
  return true;
}

}  // namespace

std::vector<CMat> update_scm(const MatrixField& r_hat, const std::vector<double>& psd, ScmWeighting weighting,
                             double eps) {
  const std::size_t N = r_hat.frames(), F = r_hat.bins();
  const auto Mi = static_cast<Eigen::Index>(r_hat.channels());
  if (psd.size() != N * F) throw InvalidInput("update_scm: PSD shape mismatch");
  std::vector<CMat> out(F);
  for (std::size_t f = 0; f < F; ++f) {
    CMat acc = CMat::Zero(Mi, Mi);
    double wsum = 0.0;
    for (std::size_t n = 0; n < N; ++n) {
      const double v = psd[n * F + f];
      const double w = source_weight(weighting, v);
      acc += (w / std::max(v, kPsdFloor)) * r_hat.at(n, f);
      wsum += w;
    }
    if (!finish_scm(acc, wsum, eps)) acc = CMat::Identity(Mi, Mi);
    out[f] = acc;
  }
  return out;
}

namespace {

CMat regularized_inverse(const CMat& r, double eps) {
  const auto Mi = r.rows();
  const CMat eye = CMat::Identity(Mi, Mi);
  Eigen::LLT<CMat> llt(r);
  if (llt.info() != Eigen::Success) llt.compute(r + eps * eye);
  if (llt.info() != Eigen::Success) throw SingularSystem("SCM not invertible after regularization", 0);
  return llt.solve(eye);
}

}  // namespace

std::vector<double> unconstrained_psd(const std::vector<CMat>& scm, const MatrixField& r_hat, double eps) {
  const std::size_t N = r_hat.frames(), F = r_hat.bins();
  const double M = static_cast<double>(r_hat.channels());
  if (scm.size() != F) throw InvalidInput("unconstrained_psd: SCM count mismatch");
  std::vector<double> out(N * F);
  for (std::size_t f = 0; f < F; ++f) {
    CMat inv;
    try {
      inv = regularized_inverse(scm[f], eps);
    } catch (const SingularSystem&) {
      throw SingularSystem("SCM not invertible after regularization", f);
    }
    for (std::size_t n = 0; n < N; ++n) {
      out[n * F + f] = std::max(0.0, (inv * r_hat.at(n, f)).trace().real() / M);
    }
  }
  return out;
}

EmStepResult em_step(SourceStats& stats, const MixtureCovariance& mix, const Spectrogram& r,
                     ScmWeighting weighting, bool want_unconstrained, double eps) {
  const std::size_t N = stats.frames(), F = stats.bins(), M = stats.channels();
  if (r.frames() != N || r.bins() != F || r.channels() != M) throw InvalidInput("em_step: residual shape mismatch");
  const auto Mi = static_cast<Eigen::Index>(M);
  const CMat eye = CMat::Identity(Mi, Mi);
  EmStepResult result;
  if (want_unconstrained) {
    for (auto& v : result.v_unc) v.assign(N * F, 0.0);
  }

  for (std::size_t f = 0; f < F; ++f) {
    std::array<CMat, kNumSources> scm;
    std::array<CMat, kNumSources> acc;
    std::array<double, kNumSources> wsum{};
    for (std::size_t c = 0; c < kNumSources; ++c) {
      scm[c] = stats.scm(kSources[c], f);
      acc[c] = CMat::Zero(Mi, Mi);
    }
    // E-step and accumulation of the weighted posterior moments.
    for (std::size_t n = 0; n < N; ++n) {
      const CMat inv = mix.inverse.at(n, f);
      const CVec rv = r.at(static_cast<long>(n), f);
      for (std::size_t c = 0; c < kNumSources; ++c) {
        const double v = stats.psd(kSources[c], n, f);
        const double w = source_weight(weighting, v);
        wsum[c] += w;
        if (v == 0.0) continue;
        const CMat prior = v * scm[c];
        const CMat wc = prior * inv;
        const CVec ch = wc * rv;
        const CMat rh = ch * ch.adjoint() + (eye - wc) * prior;
        acc[c] += (w / std::max(v, kPsdFloor)) * rh;
      }
    }
    std::array<CMat, kNumSources> updated;
    for (std::size_t c = 0; c < kNumSources; ++c) {
      updated[c] = acc[c];
      if (!finish_scm(updated[c], wsum[c], eps)) updated[c] = scm[c];
      stats.set_scm(kSources[c], f, updated[c]);
    }
    if (!want_unconstrained) continue;
    std::array<CMat, kNumSources> updated_inv;
    for (std::size_t c = 0; c < kNumSources; ++c) updated_inv[c] = regularized_inverse(updated[c], eps);
    for (std::size_t n = 0; n < N; ++n) {
      const CMat inv = mix.inverse.at(n, f);
      const CVec rv = r.at(static_cast<long>(n), f);
      for (std::size_t c = 0; c < kNumSources; ++c) {
        const double v = stats.psd(kSources[c], n, f);
        if (v == 0.0) continue;
        const CMat prior = v * scm[c];
        const CMat wc = prior * inv;
        const CVec ch = wc * rv;
        const CMat rh = ch * ch.adjoint() + (eye - wc) * prior;
        result.v_unc[c][n * F + f] = std::max(0.0, (updated_inv[c] * rh).trace().real() / static_cast<double>(M));
      }
    }
  }
  return result;
}

}  // namespace jse
