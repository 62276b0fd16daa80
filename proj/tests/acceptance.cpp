// Acceptance suite. Prints one PASS/FAIL line per criterion. With arguments,
// runs only the listed criterion numbers.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "jse/config.hpp"
#include "jse/metrics.hpp"
#include "jse/pipelines.hpp"

using namespace jse;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Signal random_signal(std::size_t channels, std::size_t samples, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Signal s(channels, samples);
  for (double& v : s.raw()) v = g(rng);
  return s;
}

CMat random_hpd(std::size_t M, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  const auto Mi = static_cast<Eigen::Index>(M);
  CMat a(Mi, Mi);
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = {g(rng), g(rng)};
  return a * a.adjoint() + 0.05 * CMat::Identity(Mi, Mi);
}

SourceStats random_stats(std::size_t N, std::size_t F, std::size_t M, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> decades(-4.0, 3.0);
  SourceStats s(N, F, M);
  for (Source c : kSources) {
    for (double& v : s.psd(c)) v = std::pow(10.0, decades(rng));
    for (std::size_t f = 0; f < F; ++f) s.set_scm(c, f, random_hpd(M, rng));
  }
  return s;
}

/// Scenes for the property criteria: 4 x 0.5 s, run seed 1000.
SceneConfig property_scene(std::size_t i) {
  RunConfig rc;
  rc.seed = 1000;
  rc.scene.period_len = 0.5;
  return rc.scene_config(i);
}

// ---------------------------------------------------------------------------

Outcome stft_round_trip() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<std::size_t> len(8000, 64000);
  const WindowSpec w = WindowSpec::hann(1024, 256);
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    const Signal s = random_signal(3, len(rng), rng);
    const Signal back = istft(stft(s, w), s.samples());
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < s.raw().size(); ++k) {
      num += (back.raw()[k] - s.raw()[k]) * (back.raw()[k] - s.raw()[k]);
      den += s.raw()[k] * s.raw()[k];
    }
    worst = std::max(worst, std::sqrt(num / den));
  }
  const double secs = seconds_since(t0);
  return {worst < 1e-6 && secs < 5.0, fmt("worst relative error %.2e, %.2f s", worst, secs)};
}

double solver_residual(const CMatX& a, const CVecX& b, const CVecX& z, double eps) {
  const CVecX r = (a + eps * CMatX::Identity(a.rows(), a.cols())) * z - b;
  return r.norm() / (b.norm() + 1e-12);
}

Outcome normal_equation_residuals() {
  const PipelineConfig cfg;
  double worst_h = 0.0, worst_g = 0.0;
  for (std::size_t i = 0; i < 10; ++i) {
    const Scene scene = synth_scene(property_scene(i));
    const SceneSpectra truth = SceneSpectra::analyze(scene, cfg.window);
    const std::size_t N = truth.d.frames(), F = truth.d.bins(), M = truth.d.channels();
    const EchoFilter h0(F, cfg.echo_taps, M);
    const DereverbFilter g0(F, cfg.dereverb_taps, M, cfg.delay);
    SourceStats stats(N, F, M);
    const PsdSet v = oracle_psds(latent_components(truth, h0, g0, SignalPath::cascaded));
    for (Source c : kSources) stats.psd(c) = v[static_cast<std::size_t>(c)];
    std::mt19937_64 rng(i);
    for (Source c : kSources) {
      for (std::size_t f = 0; f < F; ++f) stats.set_scm(c, f, random_hpd(M, rng));
    }
    const MixtureCovariance mix = mixture_covariance(stats, cfg.eps);

    const FarendTaps xr = dereverberated_farend_taps(truth.x, g0, cfg.echo_taps, M);
    const Spectrogram r_d = dereverberated_mixture(truth.d, g0);
    const NormalEquations ne_h = echo_normal_equations(xr, r_d, mix);
    const EchoFilter h = update_H(xr, r_d, mix, cfg.eps);
    for (std::size_t f = 0; f < F; ++f) {
      worst_h = std::max(worst_h, solver_residual(ne_h.lhs[f], ne_h.rhs[f], h.stacked(f), cfg.eps));
    }

    const Spectrogram e = apply_echo_canceller(truth.d, truth.x, h).e;
    const NormalEquations ne_g = dereverb_normal_equations(e, e, mix, cfg.dereverb_taps, cfg.delay);
    const DereverbFilter g = update_G(e, e, mix, cfg.dereverb_taps, cfg.delay, cfg.eps);
    for (std::size_t f = 0; f < F; ++f) {
      worst_g = std::max(worst_g, solver_residual(ne_g.lhs[f], ne_g.rhs[f], g.stacked(f), cfg.eps));
    }
  }
  return {worst_h < 1e-8 && worst_g < 1e-8, fmt("worst residual H %.2e, G %.2e", worst_h, worst_g)};
}

Outcome wiener_partition() {
  std::mt19937_64 rng(3);
  double worst = 0.0;
  for (int draw = 0; draw < 1000; ++draw) {
    const std::size_t M = 1 + draw % 4;
    const SourceStats s = random_stats(2, 3, M, rng);
    const MixtureCovariance mix = mixture_covariance(s);
    std::array<MatrixField, kNumSources> w;
    for (Source c : kSources) w[static_cast<std::size_t>(c)] = wiener_filter(s, mix, c);
    for (std::size_t n = 0; n < 2; ++n) {
      for (std::size_t f = 0; f < 3; ++f) {
        CMat sum = -CMat::Identity(static_cast<Eigen::Index>(M), static_cast<Eigen::Index>(M));
        for (const auto& wc : w) sum += wc.at(n, f);
        worst = std::max(worst, sum.cwiseAbs().maxCoeff());
      }
    }
  }
  return {worst < 1e-10, fmt("worst |sum W_c - I| %.2e over 1000 draws", worst)};
}

Outcome scm_contract() {
  std::mt19937_64 rng(4);
  double herm = 0.0, min_eig = 1e300, trace_err = 0.0;
  auto check = [&](const CMat& R, std::size_t M) {
    herm = std::max(herm, (R - R.adjoint()).cwiseAbs().maxCoeff());
    const Eigen::SelfAdjointEigenSolver<CMat> es(hermitian_part(R));
    min_eig = std::min(min_eig, es.eigenvalues().minCoeff());
    trace_err = std::max(trace_err, std::abs(R.trace().real() - static_cast<double>(M)));
  };
  for (ScmWeighting weighting : {ScmWeighting::unweighted, ScmWeighting::psd}) {
    for (std::size_t M : {2, 3, 4}) {
      const std::size_t N = 40, F = 8;
      SourceStats s = random_stats(N, F, M, rng);
      Spectrogram r(N, F, M);
      std::normal_distribution<double> g;
      for (Complex& v : r.raw()) v = {g(rng), g(rng)};
      for (int it = 0; it < 10; ++it) {
        const MixtureCovariance mix = mixture_covariance(s);
        std::array<std::vector<CMat>, kNumSources> next;
        for (Source c : kSources) {
          const MatrixField w = wiener_filter(s, mix, c);
          next[static_cast<std::size_t>(c)] =
              update_scm(posterior_moment(estimate_source(w, r), w, s, c), s.psd(c), weighting);
        }
        for (Source c : kSources) {
          for (std::size_t f = 0; f < F; ++f) s.set_scm(c, f, next[static_cast<std::size_t>(c)][f]);
        }
      }
      for (Source c : kSources) {
        for (std::size_t f = 0; f < F; ++f) check(s.scm(c, f), M);
      }
    }
  }
  return {herm <= 1e-12 && min_eig >= -1e-10 && trace_err <= 1e-9,
          fmt("hermitian error %.2e, min eigenvalue %.2e, trace error %.2e", herm, min_eig, trace_err)};
}

Outcome likelihood_monotonicity() {
  double worst = 0.0;  // largest drop relative to |prior|
  std::size_t checked = 0;
  for (std::size_t i = 0; i < 10; ++i) {
    const Scene scene = synth_scene(property_scene(i));
    const PipelineOutput out = run_nn_joint(scene.d, scene.x, PipelineConfig{}, &scene);
    for (std::size_t k = 1; k < out.substeps.size(); ++k) {
      if (out.substeps[k].step == "spectral") continue;
      const double prior = out.substeps[k - 1].value, now = out.substeps[k].value;
      worst = std::max(worst, (prior - now) / std::abs(prior));
      ++checked;
    }
  }
  return {worst <= 1e-6, fmt("%zu H/G sub-steps, largest relative drop %.2e", checked, worst)};
}

Outcome linear_echo_sanity() {
  SceneConfig sc;
  sc.clip_level = 1.0;
  sc.echo_rir_length = 2048;  // shorter than K = 10 frames of 256 samples
  sc.snr_db = std::numeric_limits<double>::infinity();
  sc.room.rt60 = 0.3;
  sc.seed = sc.room.seed = 6;
  const Scene scene = synth_scene(sc);
  const auto t0 = Clock::now();
  const PipelineOutput out = run_nn_joint(scene.d, scene.x, PipelineConfig{}, &scene);
  const double secs = seconds_since(t0);
  const MetricsReport rep = evaluate(out.s_hat_wave, scene);
  double erle = kNotEvaluated;
  for (const auto& p : rep.periods) {
    if (p.period.label == PeriodLabel::far_end_talk) erle = p.mean.erle;
  }
  return {erle >= 40.0 && secs < 60.0, fmt("far-end ERLE %.2f dB, %.1f s", erle, secs)};
}

Outcome desk_scale_ranking() {
  const auto t0 = Clock::now();
  RunConfig rc;  // SER in [-20, 0], SNR in [0, 10], RT60 0.5 s, oracle PSDs
  rc.seed = 2024;
  const std::size_t count = 20;
  double joint = 0.0, nn_cascade = 0.0, cascade = 0.0, mixture = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    const Scene scene = synth_scene(rc.scene_config(i));
    joint += evaluate(run_nn_joint(scene.d, scene.x, rc.pipeline, &scene).s_hat_wave, scene).average.si_sdr;
    nn_cascade += evaluate(run_nn_cascade(scene.d, scene.x, rc.pipeline, &scene).s_hat_wave, scene).average.si_sdr;
    cascade += evaluate(run_cascade(scene.d, scene.x, rc.pipeline, &scene).s_hat_wave, scene).average.si_sdr;
    mixture += evaluate(scene.d, scene).average.si_sdr;
  }
  joint /= count;
  nn_cascade /= count;
  cascade /= count;
  mixture /= count;
  const double secs = seconds_since(t0);
  const bool pass = joint >= nn_cascade && nn_cascade >= cascade && cascade > mixture && joint - cascade >= 0.3 &&
                    secs < 1800.0;
  return {pass, fmt("mean SI-SDR over %zu scenes: joint %.2f, nn-cascade %.2f, cascade %.2f, mixture %.2f dB; %.0f s",
                    count, joint, nn_cascade, cascade, mixture, secs)};
}

Outcome target_pipeline_energy() {
  const WindowSpec w = WindowSpec::hann(1024, 256);
  bool ok = true;
  double worst_ratio = 0.0;  // largest E_i / E_{i-1}
  for (std::size_t i = 0; i < 10; ++i) {
    const Scene scene = synth_scene(property_scene(i));
    const TargetResult res = ground_truth_target_pipeline(SceneSpectra::analyze(scene, w));
    for (std::size_t k = 1; k < res.z_r_energy.size(); ++k) {
      const double ratio = res.z_r_energy[k] / res.z_r_energy[k - 1];
      worst_ratio = std::max(worst_ratio, ratio);
      if (res.z_r_energy[k] > res.z_r_energy[k - 1]) ok = false;
    }
  }
  return {ok, fmt("largest energy ratio between iterations %.4f", worst_ratio)};
}

double db(double num, double den) { return 10.0 * std::log10(num / den); }

Outcome metrics_oracle() {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double worst = 0.0, worst_scale = 0.0, worst_erle_shift = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t T = 200 + static_cast<std::size_t>(trial);
    std::array<std::vector<double>, 4> c;
    for (auto& v : c) {
      v.resize(T);
      for (double& x : v) x = u(rng);
    }
    std::vector<double> s_hat(T);
    const double ge = 0.5 + u(rng), gl = u(rng), gy = 0.5 * u(rng), gb = u(rng);
    for (std::size_t t = 0; t < T; ++t) s_hat[t] = ge * c[0][t] + gl * c[1][t] + gy * c[2][t] + gb * c[3][t] + 0.3 * u(rng);

    // Direct evaluation: Gram-matrix normal equations and the ratio formulas.
    Eigen::Matrix4d G;
    Eigen::Vector4d rhs;
    for (int a = 0; a < 4; ++a) {
      rhs(a) = 0.0;
      for (std::size_t t = 0; t < T; ++t) rhs(a) += c[a][t] * s_hat[t];
      for (int b = 0; b < 4; ++b) {
        G(a, b) = 0.0;
        for (std::size_t t = 0; t < T; ++t) G(a, b) += c[a][t] * c[b][t];
      }
    }
    const Eigen::Vector4d gamma = G.ldlt().solve(rhs);
    double e_se = 0, e_sl = 0, e_y = 0, e_b = 0, e_art = 0, e_dist = 0, e_raw = 0;
    for (std::size_t t = 0; t < T; ++t) {
      const double se = gamma(0) * c[0][t], sl = gamma(1) * c[1][t], y = gamma(2) * c[2][t], b = gamma(3) * c[3][t];
      const double art = s_hat[t] - se - sl - y - b;
      e_se += se * se;
      e_sl += sl * sl;
      e_y += y * y;
      e_b += b * b;
      e_art += art * art;
      e_dist += (sl + y + b + art) * (sl + y + b + art);
      e_raw += c[2][t] * c[2][t];
    }
    const double ref[6] = {db(e_se, e_dist), db(e_raw, e_y), db(e_se, e_y), db(e_se, e_sl), db(e_se, e_b), db(e_se, e_art)};

    Scene s;
    s.s_e = Signal::mono(c[0]);
    s.s_l = Signal::mono(c[1]);
    s.y = Signal::mono(c[2]);
    s.b = Signal::mono(c[3]);
    s.d = s.s_e + s.s_l + s.y + s.b;
    s.periods = {{0, T, PeriodLabel::double_talk}};
    const MetricValues got = evaluate(Signal::mono(s_hat), s).periods[0].per_channel[0];
    for (std::size_t i = 0; i < 6; ++i) worst = std::max(worst, std::abs(got[i] - ref[i]));

    for (double alpha : {2.0, -0.25, 1.7}) {
      const MetricValues scaled = evaluate(alpha * Signal::mono(s_hat), s).periods[0].per_channel[0];
      for (std::size_t i : {0, 2, 3, 4, 5}) worst_scale = std::max(worst_scale, std::abs(scaled[i] - got[i]));
      // ERLE divides the raw echo by the processed one, so it moves with the gain.
      worst_erle_shift = std::max(worst_erle_shift, std::abs(scaled.erle - (got.erle - 20.0 * std::log10(std::abs(alpha)))));
    }
  }
  return {worst < 1e-9 && worst_scale < 1e-9 && worst_erle_shift < 1e-9,
          fmt("worst deviation %.2e dB; scale change of gamma-normalized metrics %.2e dB; ERLE gain shift error %.2e dB",
              worst, worst_scale, worst_erle_shift)};
}

Outcome kl_values() {
  const double zero = kl_divergence({0.0, 0.5, 3.0}, {0.0, 0.5, 3.0});
  const double hand = kl_divergence({1.0}, {2.0});
  const double err = std::abs(hand - (1.0 - std::log(2.0)));
  return {zero == 0.0 && err < 1e-12, fmt("KL at equality %.1e, (1, 2) case error %.2e", zero, err)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"STFT round trip", stft_round_trip},
      {"normal-equation residuals", normal_equation_residuals},
      {"Wiener partition of identity", wiener_partition},
      {"SCM contract", scm_contract},
      {"likelihood monotonicity", likelihood_monotonicity},
      {"linear-echo sanity", linear_echo_sanity},
      {"desk-scale ranking", desk_scale_ranking},
      {"ground-truth target pipeline", target_pipeline_energy},
      {"metrics oracle", metrics_oracle},
      {"kl_divergence", kl_values},
  };
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::stoi(argv[i]));

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!wanted.empty() && !wanted.count(id)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s %d %s: %s\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
    if (!o.pass) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
