#include "jse/spectral.hpp"

namespace jse {

namespace {

void set_psds(SourceStats& stats, const PsdSet& v) {
  for (Source c : kSources) stats.psd(c) = v[static_cast<std::size_t>(c)];
}

}  // namespace

TargetResult ground_truth_target_pipeline(const SceneSpectra& truth, const TargetConfig& cfg) {
  if (cfg.iterations < 1) throw InvalidInput("target pipeline needs at least one iteration");
  const std::size_t N = truth.d.frames(), F = truth.d.bins(), M = truth.d.channels();

  TargetResult out{{}, {}, EchoFilter(F, cfg.echo_taps, M), DereverbFilter(F, cfg.dereverb_taps, M, cfg.delay), {}};
  out.latents = latent_components(truth, out.h, out.g, SignalPath::cascaded);
  out.z_r_energy.push_back(out.latents.z_r.energy());

  SourceStats stats(N, F, M);
  set_psds(stats, oracle_psds(out.latents));
  for (int it = 0; it < cfg.iterations; ++it) {
    const MixtureCovariance mix = mixture_covariance(stats, cfg.eps);
    const FarendTaps xr = dereverberated_farend_taps(truth.x, out.g, cfg.echo_taps, M);
    out.h = update_H(xr, dereverberated_mixture(truth.d, out.g), mix, cfg.eps);
    const Spectrogram e = apply_echo_canceller(truth.d, truth.x, out.h).e;
    out.g = update_G(e, mix, cfg.dereverb_taps, cfg.delay, cfg.eps);

    out.latents = latent_components(truth, out.h, out.g, SignalPath::cascaded);
    out.z_r_energy.push_back(out.latents.z_r.energy());
    set_psds(stats, oracle_psds(out.latents));
    em_step(stats, mixture_covariance(stats, cfg.eps), apply_dereverb(e, out.g).r, ScmWeighting::unweighted, false,
            cfg.eps);
  }
  out.v = oracle_psds(out.latents);
  return out;
}

}  // namespace jse
