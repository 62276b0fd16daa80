#include <chrono>
#include <cmath>

#include "jse/pipelines.hpp"

namespace jse {

std::string to_string(Topology t) {
  switch (t) {
    case Topology::joint: return "joint";
    case Topology::parallel: return "parallel";
    case Topology::cascade: return "cascade";
    case Topology::nn_cascade: return "nn-cascade";
  }
  return "?";
}

Topology topology_from_string(const std::string& s) {
  if (s == "joint") return Topology::joint;
  if (s == "parallel") return Topology::parallel;
  if (s == "cascade") return Topology::cascade;
  if (s == "nn-cascade" || s == "nn_cascade") return Topology::nn_cascade;
  throw InvalidInput("unknown topology '" + s + "'");
}

ProviderSpec ProviderSpec::parse(const std::string& s) {
  if (s == "oracle") return {ProviderKind::oracle, {}};
  if (s == "unconstrained") return {ProviderKind::unconstrained, {}};
  if (s.rfind("lstm:", 0) == 0 && s.size() > 5) return {ProviderKind::lstm, s.substr(5)};
  throw InvalidInput("unknown PSD provider '" + s + "' (expected oracle, unconstrained or lstm:PATH)");
}

std::string ProviderSpec::to_string() const {
  switch (kind) {
    case ProviderKind::oracle: return "oracle";
    case ProviderKind::unconstrained: return "unconstrained";
    case ProviderKind::lstm: return "lstm:" + weights;
  }
  return "?";
}

void PipelineConfig::validate() const {
  window.validate();
  aec.validate();
  if (echo_taps < 1 || dereverb_taps < 1) throw InvalidInput("filter lengths must be >= 1");
  if (delay < 1) throw InvalidInput("prediction delay must be >= 1");
  if (iterations < 1) throw InvalidInput("iterations must be >= 1");
  if (wpe_iterations < 1) throw InvalidInput("wpe_iterations must be >= 1");
  if (!(eps > 0.0)) throw InvalidInput("eps must be positive");
}

std::unique_ptr<PsdProvider> make_provider(const ProviderSpec& spec, std::shared_ptr<const SceneSpectra> truth) {
  switch (spec.kind) {
    case ProviderKind::oracle:
      if (!truth) throw InvalidInput("the oracle PSD provider needs a scene with ground-truth components");
      return std::make_unique<OraclePsdProvider>(std::move(truth));
    case ProviderKind::unconstrained: return std::make_unique<UnconstrainedPsdProvider>();
    case ProviderKind::lstm: return std::make_unique<LstmPsdProvider>(spec.weights);
  }
  throw InvalidInput("unknown PSD provider");
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

void require_finite(const Spectrogram& s, const std::string& stage) {
  for (const Complex& v : s.raw()) {
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) throw NumericalFailure(stage, "non-finite spectrum");
  }
}

void require_finite(const std::vector<Complex>& taps, const std::string& stage) {
  for (const Complex& v : taps) {
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) throw NumericalFailure(stage, "non-finite filter");
  }
}

void require_finite(const SourceStats& stats, const std::string& stage) {
  for (Source c : kSources) {
    for (double v : stats.psd(c)) {
      if (!std::isfinite(v) || v < 0.0) throw NumericalFailure(stage, "invalid PSD");
    }
  }
}

/// Filtered signals for the current filters.
struct State {
  Spectrogram y_hat, e, e_hat, r;
};

SignalPath path_of(Topology t) {
  return t == Topology::parallel ? SignalPath::parallel : SignalPath::cascaded;
}

State compute_state(const Spectrogram& D, const Spectrogram& X, const EchoFilter& h, const DereverbFilter& g,
                    SignalPath path) {
  EchoCancelled ec = apply_echo_canceller(D, X, h);
  State s{std::move(ec.y_hat), std::move(ec.e), {}, {}};
  switch (path) {
    case SignalPath::cascaded: {
      Dereverberated dr = apply_dereverb(s.e, g);
      s.e_hat = std::move(dr.e_hat);
      s.r = std::move(dr.r);
      break;
    }
    case SignalPath::parallel:
      s.e_hat = apply_dereverb(D, g).e_hat;
      s.r = s.e - s.e_hat;
      break;
    case SignalPath::echo_only:
      s.e_hat = D.zeros_like();
      s.r = s.e;
      break;
  }
  return s;
}

ProviderContext context(const Spectrogram& D, const Spectrogram& X, const State& s, const EchoFilter& h,
                        const DereverbFilter& g, SignalPath path, int iteration, const PsdSet* v_unc) {
  ProviderContext ctx;
  ctx.x = &X;
  ctx.d = &D;
  ctx.y_hat = &s.y_hat;
  ctx.e = &s.e;
  ctx.e_hat = &s.e_hat;
  ctx.r = &s.r;
  ctx.h = &h;
  ctx.g = &g;
  ctx.v_unc = v_unc;
  ctx.iteration = iteration;
  ctx.path = path;
  return ctx;
}

struct Inputs {
  Spectrogram D, X;
  std::shared_ptr<const SceneSpectra> truth;
  double sample_rate = 16000.0;
  std::size_t samples = 0;
};

Inputs prepare(const Signal& d, const Signal& x, const PipelineConfig& cfg, const Scene* scene, double fs) {
  cfg.validate();
  if (x.channels() != 1) throw InvalidInput("far-end signal must be single-channel");
  if (d.samples() != x.samples()) throw InvalidInput("microphone and far-end lengths differ");
  if (d.empty()) throw InvalidInput("empty microphone signal");
  if (d.channels() > static_cast<std::size_t>(kMaxMics)) throw InvalidInput("too many microphones");
  Inputs in{stft(d, cfg.window, fs), stft(x, cfg.window, fs), nullptr, fs, d.samples()};
  if (scene) {
    if (scene->d.samples() != d.samples() || scene->d.channels() != d.channels()) {
      throw InvalidInput("scene does not match the microphone signal");
    }
    in.truth = std::make_shared<SceneSpectra>(SceneSpectra::analyze(*scene, cfg.window));
  }
  return in;
}

void check_filter_shapes(const PipelineConfig& cfg, std::size_t F, std::size_t M) {
  if (cfg.initial_h && (cfg.initial_h->bins() != F || cfg.initial_h->channels() != M ||
                        cfg.initial_h->taps() != cfg.echo_taps)) {
    throw InvalidInput("initial echo filter has the wrong shape");
  }
  if (cfg.initial_g && (cfg.initial_g->bins() != F || cfg.initial_g->channels() != M ||
                        cfg.initial_g->taps() != cfg.dereverb_taps || cfg.initial_g->delay() != cfg.delay)) {
    throw InvalidInput("initial dereverberation filter has the wrong shape");
  }
}

EchoFilter initial_echo_filter(const Signal& d, const Signal& x, const PipelineConfig& cfg, double fs,
                               PipelineOutput& out) {
  if (cfg.initial_h) {
    require_finite(cfg.initial_h->raw(), "init");
    return *cfg.initial_h;
  }
  const auto t0 = Clock::now();
  EchoFilter h = aec_init(d, x, cfg.aec, cfg.window, cfg.echo_taps, fs);
  require_finite(h.raw(), "aec_init");
  out.timings["aec_init"] = seconds_since(t0);
  return h;
}

DereverbFilter initial_dereverb_filter(const Spectrogram& regressor, const PipelineConfig& cfg, PipelineOutput& out) {
  if (cfg.initial_g) {
    require_finite(cfg.initial_g->raw(), "init");
    return *cfg.initial_g;
  }
  const auto t0 = Clock::now();
  DereverbFilter g = wpe(regressor, cfg.dereverb_taps, cfg.delay, cfg.wpe_iterations, cfg.eps);
  require_finite(g.raw(), "wpe_init");
  out.timings["wpe_init"] = seconds_since(t0);
  return g;
}

void finish(PipelineOutput& out, const State& s, const PipelineConfig& cfg, std::size_t samples) {
  const MixtureCovariance mix = mixture_covariance(out.stats, cfg.eps);
  out.w_se = wiener_filter(out.stats, mix, Source::s_e);
  out.s_hat = estimate_source(out.w_se, s.r);
  require_finite(out.s_hat, "postfilter");
  out.s_hat_wave = istft(out.s_hat, samples);
  out.e = s.e;
  out.r = s.r;
}

/// Alternating maximization over H, G and the spatial parameters, with a
/// spectral refresh after each of the first `cfg.iterations` rounds and one
/// more round for the final filters. Returns the final state.
State block_coordinate_ascent(const Inputs& in, const PipelineConfig& cfg, PsdProvider& provider, SignalPath path,
                              PipelineOutput& out, const std::string& tag) {
  const std::size_t N = in.D.frames(), F = in.D.bins(), M = in.D.channels();
  const DereverbFilter no_dereverb(F, 0, M, 1);
  State s = compute_state(in.D, in.X, out.h, out.g, path);
  require_finite(s.r, tag + "init");

  auto t0 = Clock::now();
  out.stats = SourceStats(N, F, M);
  provider.update(out.stats, context(in.D, in.X, s, out.h, out.g, path, 0, nullptr));
  require_finite(out.stats, tag + "psd_init");
  out.timings[tag + "spectral"] += seconds_since(t0);

  for (int it = 1; it <= cfg.iterations + 1; ++it) {
    const MixtureCovariance mix = mixture_covariance(out.stats, cfg.eps);
    out.substeps.push_back({it, tag + "spectral", log_likelihood(s.r, mix)});

    t0 = Clock::now();
    if (path == SignalPath::cascaded) {
      const FarendTaps xr = dereverberated_farend_taps(in.X, out.g, cfg.echo_taps, M);
      out.h = update_H(xr, dereverberated_mixture(in.D, out.g), mix, cfg.eps);
    } else {
      // The echo path sees the raw far-end signal; the target already has the
      // mixture's late reverberation removed (parallel) or is the mixture itself.
      const FarendTaps xr = dereverberated_farend_taps(in.X, no_dereverb, cfg.echo_taps, M);
      const Spectrogram target = path == SignalPath::parallel ? dereverberated_mixture(in.D, out.g) : in.D;
      out.h = update_H(xr, target, mix, cfg.eps);
    }
    s = compute_state(in.D, in.X, out.h, out.g, path);
    require_finite(s.r, tag + "update_H");
    out.timings[tag + "update_H"] += seconds_since(t0);
    out.substeps.push_back({it, tag + "H", log_likelihood(s.r, mix)});

    if (path != SignalPath::echo_only) {
      t0 = Clock::now();
      const Spectrogram& regressor = path == SignalPath::parallel ? in.D : s.e;
      out.g = update_G(regressor, s.e, mix, cfg.dereverb_taps, cfg.delay, cfg.eps);
      s = compute_state(in.D, in.X, out.h, out.g, path);
      require_finite(s.r, tag + "update_G");
      out.timings[tag + "update_G"] += seconds_since(t0);
      out.substeps.push_back({it, tag + "G", log_likelihood(s.r, mix)});
    }
    out.loglik.push_back(out.substeps.back().value);

    t0 = Clock::now();
    const bool refresh = it <= cfg.iterations;
    EmStepResult em = em_step(out.stats, mix, s.r, ScmWeighting::psd, refresh, cfg.eps);
    out.timings[tag + "em"] += seconds_since(t0);
    if (refresh) {
      t0 = Clock::now();
      provider.update(out.stats, context(in.D, in.X, s, out.h, out.g, path, it, &em.v_unc));
      require_finite(out.stats, tag + "psd_update");
      out.timings[tag + "spectral"] += seconds_since(t0);
    }
  }
  return s;
}

/// Wiener postfilter EM with the linear filters held fixed.
State postfilter_em(const Inputs& in, const PipelineConfig& cfg, PsdProvider& provider, PipelineOutput& out,
                    const std::string& tag) {
  const std::size_t N = in.D.frames(), F = in.D.bins(), M = in.D.channels();
  const State s = compute_state(in.D, in.X, out.h, out.g, SignalPath::cascaded);
  require_finite(s.r, tag + "init");
  out.stats = SourceStats(N, F, M);
  provider.update(out.stats, context(in.D, in.X, s, out.h, out.g, SignalPath::cascaded, 0, nullptr));
  require_finite(out.stats, tag + "psd_init");
  for (int it = 1; it <= cfg.iterations; ++it) {
    const auto t0 = Clock::now();
    const MixtureCovariance mix = mixture_covariance(out.stats, cfg.eps);
    out.loglik.push_back(log_likelihood(s.r, mix));
    out.substeps.push_back({it, tag + "spectral", out.loglik.back()});
    EmStepResult em = em_step(out.stats, mix, s.r, ScmWeighting::psd, true, cfg.eps);
    provider.update(out.stats, context(in.D, in.X, s, out.h, out.g, SignalPath::cascaded, it, &em.v_unc));
    require_finite(out.stats, tag + "psd_update");
    out.timings[tag + "em"] += std::chrono::duration<double>(Clock::now() - t0).count();
  }
  return s;
}

}  // namespace

PipelineOutput run_pipeline(const Signal& d, const Signal& x, const PipelineConfig& cfg, const Scene* scene,
                            double sample_rate) {
  const auto start = Clock::now();
  const Inputs in = prepare(d, x, cfg, scene, sample_rate);
  const std::size_t F = in.D.bins(), M = in.D.channels();
  check_filter_shapes(cfg, F, M);
  const auto provider = make_provider(cfg.provider, in.truth);

  PipelineOutput out;
  out.provider = provider->name();
  out.h = initial_echo_filter(d, x, cfg, sample_rate, out);

  State s;
  switch (cfg.topology) {
    case Topology::joint: {
      out.g = initial_dereverb_filter(apply_echo_canceller(in.D, in.X, out.h).e, cfg, out);
      s = block_coordinate_ascent(in, cfg, *provider, SignalPath::cascaded, out, "");
      break;
    }
    case Topology::parallel: {
      out.g = initial_dereverb_filter(in.D, cfg, out);
      s = block_coordinate_ascent(in, cfg, *provider, SignalPath::parallel, out, "");
      break;
    }
    case Topology::cascade: {
      out.g = initial_dereverb_filter(apply_echo_canceller(in.D, in.X, out.h).e, cfg, out);
      s = postfilter_em(in, cfg, *provider, out, "");
      break;
    }
    case Topology::nn_cascade: {
      // Stage 1 estimates H alone, with s_e + s_l modelled as one near-end source.
      out.g = DereverbFilter(F, 0, M, 1);
      block_coordinate_ascent(in, cfg, *provider, SignalPath::echo_only, out, "stage1:");
      out.loglik.clear();
      out.g = initial_dereverb_filter(apply_echo_canceller(in.D, in.X, out.h).e, cfg, out);
      s = postfilter_em(in, cfg, *provider, out, "");
      break;
    }
  }
  finish(out, s, cfg, in.samples);
  out.timings["total"] = seconds_since(start);
  return out;
}

PipelineOutput run_nn_joint(const Signal& d, const Signal& x, PipelineConfig cfg, const Scene* scene) {
  cfg.topology = Topology::joint;
  return run_pipeline(d, x, cfg, scene, scene ? scene->config.sample_rate : 16000.0);
}

PipelineOutput run_cascade(const Signal& d, const Signal& x, PipelineConfig cfg, const Scene* scene) {
  cfg.topology = Topology::cascade;
  return run_pipeline(d, x, cfg, scene, scene ? scene->config.sample_rate : 16000.0);
}

PipelineOutput run_nn_parallel(const Signal& d, const Signal& x, PipelineConfig cfg, const Scene* scene) {
  cfg.topology = Topology::parallel;
  return run_pipeline(d, x, cfg, scene, scene ? scene->config.sample_rate : 16000.0);
}

PipelineOutput run_nn_cascade(const Signal& d, const Signal& x, PipelineConfig cfg, const Scene* scene) {
  cfg.topology = Topology::nn_cascade;
  return run_pipeline(d, x, cfg, scene, scene ? scene->config.sample_rate : 16000.0);
}

TrainingFeatures training_features(const Scene& scene, const PipelineConfig& cfg) {
  const double fs = scene.config.sample_rate;
  const Inputs in = prepare(scene.d, scene.x, cfg, &scene, fs);
  const std::size_t N = in.D.frames(), F = in.D.bins(), M = in.D.channels();
  check_filter_shapes(cfg, F, M);
  OraclePsdProvider provider(in.truth);
  PipelineOutput out;
  out.h = initial_echo_filter(scene.d, scene.x, cfg, fs, out);
  out.g = initial_dereverb_filter(apply_echo_canceller(in.D, in.X, out.h).e, cfg, out);

  State s = compute_state(in.D, in.X, out.h, out.g, SignalPath::cascaded);
  TrainingFeatures tf;
  tf.nn0 = type_i_features(in.X, in.D, s.y_hat, s.e, s.e_hat, s.r);

  SourceStats stats(N, F, M);
  provider.update(stats, context(in.D, in.X, s, out.h, out.g, SignalPath::cascaded, 0, nullptr));
  const MixtureCovariance mix = mixture_covariance(stats, cfg.eps);
  out.h = update_H(dereverberated_farend_taps(in.X, out.g, cfg.echo_taps, M), dereverberated_mixture(in.D, out.g), mix,
                   cfg.eps);
  s = compute_state(in.D, in.X, out.h, out.g, SignalPath::cascaded);
  out.g = update_G(s.e, mix, cfg.dereverb_taps, cfg.delay, cfg.eps);
  s = compute_state(in.D, in.X, out.h, out.g, SignalPath::cascaded);
  const EmStepResult em = em_step(stats, mix, s.r, ScmWeighting::psd, true, cfg.eps);
  tf.nn1 = concat_features(type_i_features(in.X, in.D, s.y_hat, s.e, s.e_hat, s.r), type_ii_features(em.v_unc, N, F));
  return tf;
}

Spectrogram apply_final_filters(const PipelineOutput& out, const Spectrogram& d, const Spectrogram& x,
                                Topology topology) {
  const State s = compute_state(d, x, out.h, out.g, path_of(topology));
  return estimate_source(out.w_se, s.r);
}

}  // namespace jse
