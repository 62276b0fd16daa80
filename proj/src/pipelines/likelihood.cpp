#include <cmath>
#include <numbers>

#include "jse/pipelines.hpp"

namespace jse {

double log_likelihood(const Spectrogram& r, const MixtureCovariance& mix) {
  const std::size_t N = r.frames(), F = r.bins(), M = r.channels();
  if (mix.inverse.frames() != N || mix.inverse.bins() != F || mix.inverse.channels() != M) {
    throw InvalidInput("log_likelihood: shape mismatch");
  }
  const double constant = static_cast<double>(M) * std::log(std::numbers::pi);
  double total = 0.0;
  for (std::size_t n = 0; n < N; ++n) {
    // Per-frame partial sums keep the accumulation short.
    double frame = 0.0;
    for (std::size_t f = 0; f < F; ++f) {
      const CVec v = r.at(static_cast<long>(n), f);
      const double quad = (v.adjoint() * mix.inverse.at(n, f) * v)(0, 0).real();
      frame += -constant - mix.log_det[n * F + f] - quad;
    }
    total += frame;
  }
  return total;
}

}  // namespace jse
