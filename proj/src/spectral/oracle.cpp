#include "jse/spectral.hpp"

namespace jse {

SceneSpectra SceneSpectra::analyze(const Scene& scene, const WindowSpec& window) {
  const double fs = scene.config.sample_rate;
  return {stft(scene.x, window, fs),   stft(scene.d, window, fs), stft(scene.s_e, window, fs),
          stft(scene.s_l, window, fs), stft(scene.y, window, fs), stft(scene.b, window, fs)};
}

const Spectrogram& LatentComponents::operator[](Source c) const {
  switch (c) {
    case Source::s_e: return s_e;
    case Source::s_r: return s_r;
    case Source::z_r: return z_r;
    case Source::b_r: return b_r;
  }
  throw InvalidInput("unknown source");
}

namespace {

Spectrogram late_estimate(const Spectrogram& s, const DereverbFilter& g) { return apply_dereverb(s, g).e_hat; }

}  // namespace

LatentComponents latent_components(const SceneSpectra& truth, const EchoFilter& h, const DereverbFilter& g,
                                   SignalPath path) {
  const Spectrogram y_hat = apply_echo_canceller(truth.d, truth.x, h).y_hat;
  const Spectrogram z = truth.y - y_hat;
  const Spectrogram s = truth.s_e + truth.s_l;
  switch (path) {
    case SignalPath::echo_only:
      return {s, s.zeros_like(), z, truth.b};
    case SignalPath::cascaded:
      return {truth.s_e, truth.s_l - late_estimate(s, g), z - late_estimate(z, g), truth.b - late_estimate(truth.b, g)};
    case SignalPath::parallel:
      // The dereverberation filter sees the mixture, so the echo estimate is not filtered.
      return {truth.s_e, truth.s_l - late_estimate(s, g), z - late_estimate(truth.y, g),
              truth.b - late_estimate(truth.b, g)};
  }
  throw InvalidInput("unknown signal path");
}

std::vector<double> oracle_psd(const Spectrogram& c) {
  const std::size_t N = c.frames(), F = c.bins(), M = c.channels();
  std::vector<double> v(N * F, 0.0);
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t f = 0; f < F; ++f) {
      double acc = 0.0;
      for (std::size_t m = 0; m < M; ++m) acc += std::norm(c(n, f, m));
      v[n * F + f] = acc / static_cast<double>(M);
    }
  }
  return v;
}

PsdSet oracle_psds(const LatentComponents& latents) {
  PsdSet v;
  for (Source c : kSources) v[static_cast<std::size_t>(c)] = oracle_psd(latents[c]);
  return v;
}

}  // namespace jse
