#include "jse/linear.hpp"

namespace jse {

CVecX EchoFilter::stacked(std::size_t f) const {
  CVecX v(static_cast<Eigen::Index>(taps_ * channels_));
  for (std::size_t k = 0; k < taps_; ++k) {
    for (std::size_t m = 0; m < channels_; ++m) v(static_cast<Eigen::Index>(k * channels_ + m)) = (*this)(f, k, m);
  }
  return v;
}

void EchoFilter::set_stacked(std::size_t f, const CVecX& v) {
  for (std::size_t k = 0; k < taps_; ++k) {
    for (std::size_t m = 0; m < channels_; ++m) (*this)(f, k, m) = v(static_cast<Eigen::Index>(k * channels_ + m));
  }
}

CMat DereverbFilter::tap(std::size_t f, std::size_t j) const {
  const auto M = static_cast<Eigen::Index>(channels_);
  CMat g(M, M);
  for (std::size_t m = 0; m < channels_; ++m) {
    for (std::size_t mp = 0; mp < channels_; ++mp) g(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(mp)) = (*this)(f, j, m, mp);
  }
  return g;
}

void DereverbFilter::set_tap(std::size_t f, std::size_t j, const CMat& g) {
  for (std::size_t m = 0; m < channels_; ++m) {
    for (std::size_t mp = 0; mp < channels_; ++mp) (*this)(f, j, m, mp) = g(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(mp));
  }
}

CVecX DereverbFilter::stacked(std::size_t f) const {
  const std::size_t M = channels_;
  CVecX v(static_cast<Eigen::Index>(taps_ * M * M));
  for (std::size_t j = 0; j < taps_; ++j) {
    for (std::size_t m = 0; m < M; ++m) {
      for (std::size_t mp = 0; mp < M; ++mp) v(static_cast<Eigen::Index>((j * M + m) * M + mp)) = (*this)(f, j, m, mp);
    }
  }
  return v;
}

void DereverbFilter::set_stacked(std::size_t f, const CVecX& v) {
  const std::size_t M = channels_;
  for (std::size_t j = 0; j < taps_; ++j) {
    for (std::size_t m = 0; m < M; ++m) {
      for (std::size_t mp = 0; mp < M; ++mp) (*this)(f, j, m, mp) = v(static_cast<Eigen::Index>((j * M + m) * M + mp));
    }
  }
}

EchoCancelled apply_echo_canceller(const Spectrogram& d, const Spectrogram& x, const EchoFilter& h) {
  if (x.channels() != 1 || x.frames() != d.frames() || x.bins() != d.bins() || h.bins() != d.bins() ||
      h.channels() != d.channels()) {
    throw InvalidInput("apply_echo_canceller: shape mismatch");
  }
  const std::size_t N = d.frames(), F = d.bins(), M = d.channels(), K = h.taps();
  EchoCancelled out{d, d.zeros_like()};
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t f = 0; f < F; ++f) {
      for (std::size_t k = 0; k < K && k <= n; ++k) {
        const Complex xv = x(n - k, f, 0);
        if (xv == Complex{}) continue;
        for (std::size_t m = 0; m < M; ++m) out.y_hat(n, f, m) += h(f, k, m) * xv;
      }
      for (std::size_t m = 0; m < M; ++m) out.e(n, f, m) -= out.y_hat(n, f, m);
    }
  }
  return out;
}

namespace {

/// sum_j G(delay + j, f) s(n - delay - j, f) for every (n, f).
Spectrogram predict_late(const Spectrogram& s, const DereverbFilter& g) {
  const std::size_t N = s.frames(), F = s.bins(), M = s.channels();
  Spectrogram out = s.zeros_like();
  for (std::size_t f = 0; f < F; ++f) {
    for (std::size_t j = 0; j < g.taps(); ++j) {
      const std::size_t lag = g.delay() + j;
      const CMat G = g.tap(f, j);
      if (G.isZero(0.0)) continue;
      for (std::size_t n = lag; n < N; ++n) {
        const CVec past = s.at(static_cast<long>(n - lag), f);
        const CVec pred = G * past;
        for (std::size_t m = 0; m < M; ++m) out(n, f, m) += pred(static_cast<Eigen::Index>(m));
      }
    }
  }
  return out;
}

void check_dereverb_shapes(const Spectrogram& s, const DereverbFilter& g) {
  if (g.bins() != s.bins() || g.channels() != s.channels()) throw InvalidInput("dereverberation filter shape mismatch");
  if (g.delay() < 1) throw InvalidInput("dereverberation delay must be >= 1");
}

}  // namespace

Dereverberated apply_dereverb(const Spectrogram& e, const DereverbFilter& g) {
  check_dereverb_shapes(e, g);
  Dereverberated out{e, predict_late(e, g)};
  out.r -= out.e_hat;
  return out;
}

Spectrogram dereverberated_mixture(const Spectrogram& d, const DereverbFilter& g) {
  check_dereverb_shapes(d, g);
  return d - predict_late(d, g);
}

CMat FarendTaps::tap(long n, std::size_t f, std::size_t k) const {
  const long j = n - static_cast<long>(k);
  const auto M = static_cast<Eigen::Index>(channels());
  if (j < 0 || j >= static_cast<long>(frames())) return CMat::Zero(M, M);
  return field_.at(static_cast<std::size_t>(j), f);
}

CMatX FarendTaps::stacked(long n, std::size_t f) const {
  const auto M = static_cast<Eigen::Index>(channels());
  CMatX out(M, M * static_cast<Eigen::Index>(taps_));
  for (std::size_t k = 0; k < taps_; ++k) out.middleCols(static_cast<Eigen::Index>(k) * M, M) = tap(n, f, k);
  return out;
}

FarendTaps dereverberated_farend_taps(const Spectrogram& x, const DereverbFilter& g, std::size_t taps,
                                      std::size_t channels) {
  if (x.channels() != 1) throw InvalidInput("far-end spectrogram must be single-channel");
  if (g.bins() != x.bins() || g.channels() != channels) throw InvalidInput("dereverberation filter shape mismatch");
  const std::size_t N = x.frames(), F = x.bins();
  const auto M = static_cast<Eigen::Index>(channels);
  FarendTaps out(N, F, channels, taps);
  const CMat eye = CMat::Identity(M, M);
  for (std::size_t f = 0; f < F; ++f) {
    std::vector<CMat> G(g.taps());
    for (std::size_t j = 0; j < g.taps(); ++j) G[j] = g.tap(f, j);
    for (std::size_t n = 0; n < N; ++n) {
      CMat xr = x(n, f, 0) * eye;
      for (std::size_t j = 0; j < g.taps(); ++j) {
        const std::size_t lag = g.delay() + j;
        if (lag > n) break;
        const Complex past = x(n - lag, f, 0);
        if (past != Complex{}) xr -= past * G[j];
      }
      out.field().set(n, f, xr);
    }
  }
  return out;
}

}  // namespace jse
