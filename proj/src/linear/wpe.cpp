#include <cmath>

#include "jse/linear.hpp"

namespace jse {

namespace {

/// R_dd = lambda I per bin, with the same eps floor as mixture_covariance.
MixtureCovariance isotropic_mixture(const Spectrogram& r, double eps) {
  const std::size_t N = r.frames(), F = r.bins(), M = r.channels();
  const auto Mi = static_cast<Eigen::Index>(M);
  const CMat eye = CMat::Identity(Mi, Mi);
  MixtureCovariance mix{MatrixField(N, F, M), MatrixField(N, F, M), std::vector<double>(N * F, 0.0), 0};
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t f = 0; f < F; ++f) {
      double lambda = r.at(static_cast<long>(n), f).squaredNorm() / static_cast<double>(M);
      if (lambda < eps) {
        lambda += eps;
        ++mix.regularized_bins;
      }
      mix.r_dd.set(n, f, lambda * eye);
      mix.inverse.set(n, f, eye / lambda);
      mix.log_det[n * F + f] = static_cast<double>(M) * std::log(lambda);
    }
  }
  return mix;
}

}  // namespace

DereverbFilter wpe(const Spectrogram& e, std::size_t taps, std::size_t delay, int iterations, double eps) {
  if (iterations < 1) throw InvalidInput("wpe needs at least one iteration");
  DereverbFilter g(e.bins(), taps, e.channels(), delay);
  Spectrogram r = e;
  for (int it = 0; it < iterations; ++it) {
    g = update_G(e, isotropic_mixture(r, eps), taps, delay, eps);
    r = apply_dereverb(e, g).r;
  }
  return g;
}

}  // namespace jse
