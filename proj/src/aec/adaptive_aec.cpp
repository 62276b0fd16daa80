#include <algorithm>
#include <cmath>
#include <random>

#include <unsupported/Eigen/FFT>

#include "jse/aec.hpp"
#include "seed.hpp"

namespace jse {

void AecConfig::validate() const {
  window.validate();
  if (window.length != 2 * window.hop) throw InvalidInput("AEC window must be half-overlapping");
  if (taps < 1) throw InvalidInput("AEC needs at least one partition");
  if (passes < 1) throw InvalidInput("AEC needs at least one pass");
  if (!(step_base >= 0.0 && step_base <= 1.0)) throw InvalidInput("AEC step_base must lie in [0, 1]");
  if (!(coherence_smoothing >= 0.0 && coherence_smoothing < 1.0)) {
    throw InvalidInput("AEC coherence smoothing must lie in [0, 1)");
  }
}

namespace {

constexpr double kPowerFloor = 1e-10;

using Bins = std::vector<Complex>;

/// Overlap-save block filter for one microphone. Partition k holds the
/// half-spectrum of a length-2B impulse response whose second half is zero.
struct PartitionedFilter {
  std::vector<Bins> w;
};

}  // namespace

FirFilter adapt_echo_path(const Signal& d, const Signal& x, const AecConfig& cfg) {
  cfg.validate();
  if (x.channels() != 1) throw InvalidInput("far-end signal must be single-channel");
  if (d.samples() != x.samples()) throw InvalidInput("microphone and far-end lengths differ");
  if (d.channels() == 0) throw InvalidInput("microphone signal has no channels");

  const std::size_t B = cfg.window.hop, L = cfg.window.length, F = L / 2 + 1, K = cfg.taps;
  const std::size_t M = d.channels(), T = d.samples();
  const std::size_t blocks = (T + B - 1) / B;
  const double beta = cfg.coherence_smoothing;

  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);

  std::vector<PartitionedFilter> filt(M);
  for (auto& pf : filt) pf.w.assign(K, Bins(F, Complex{}));

  std::vector<double> frame(L), time(L);
  Bins spec(F), Y(F), E(F);

  for (int pass = 0; pass < cfg.passes; ++pass) {
    // Filter carries over between passes, the statistics restart.
    std::vector<Bins> xhist(K, Bins(F, Complex{}));
    std::vector<double> xbuf(L, 0.0);
    std::vector<std::vector<double>> dbuf(M, std::vector<double>(L, 0.0));
    std::vector<double> sxx(F, 0.0);
    std::vector<std::vector<double>> sdd(M, std::vector<double>(F, 0.0));
    std::vector<Bins> sdx(M, Bins(F, Complex{}));

    for (std::size_t j = 0; j < blocks; ++j) {
      const std::size_t t0 = j * B;
      std::copy(xbuf.begin() + static_cast<long>(B), xbuf.end(), xbuf.begin());
      bool x_active = false;
      for (std::size_t i = 0; i < B; ++i) {
        const double v = t0 + i < T ? x(0, t0 + i) : 0.0;
        xbuf[B + i] = v;
        x_active = x_active || v != 0.0;
      }
      std::rotate(xhist.rbegin(), xhist.rbegin() + 1, xhist.rend());
      fft.fwd(xhist[0], xbuf);

      std::vector<double> power(F, 0.0);
      for (std::size_t k = 0; k < K; ++k) {
        for (std::size_t f = 0; f < F; ++f) power[f] += std::norm(xhist[k][f]);
      }
      for (std::size_t f = 0; f < F; ++f) {
        power[f] = std::max(power[f], kPowerFloor);
        sxx[f] = beta * sxx[f] + (1.0 - beta) * std::norm(xhist[0][f]);
      }

      for (std::size_t m = 0; m < M; ++m) {
        auto& db = dbuf[m];
        std::copy(db.begin() + static_cast<long>(B), db.end(), db.begin());
        for (std::size_t i = 0; i < B; ++i) db[B + i] = t0 + i < T ? d(m, t0 + i) : 0.0;

        auto& W = filt[m].w;
        std::fill(Y.begin(), Y.end(), Complex{});
        for (std::size_t k = 0; k < K; ++k) {
          for (std::size_t f = 0; f < F; ++f) Y[f] += W[k][f] * xhist[k][f];
        }
        fft.inv(time, Y, static_cast<Eigen::Index>(L));
        std::fill(frame.begin(), frame.begin() + static_cast<long>(B), 0.0);
        for (std::size_t i = 0; i < B; ++i) frame[B + i] = db[B + i] - time[B + i];
        fft.fwd(E, frame);

        fft.fwd(spec, db);
        for (std::size_t f = 0; f < F; ++f) {
          sdd[m][f] = beta * sdd[m][f] + (1.0 - beta) * std::norm(spec[f]);
          sdx[m][f] = beta * sdx[m][f] + (1.0 - beta) * spec[f] * std::conj(xhist[0][f]);
        }
        if (!x_active || cfg.step_base == 0.0) continue;

        std::vector<double> mu(F);
        for (std::size_t f = 0; f < F; ++f) {
          const double den = sdd[m][f] * sxx[f];
          const double coh = den > 0.0 ? std::min(1.0, std::norm(sdx[m][f]) / den) : 0.0;
          mu[f] = cfg.step_base * coh / power[f];
        }
        for (std::size_t k = 0; k < K; ++k) {
          for (std::size_t f = 0; f < F; ++f) W[k][f] += mu[f] * std::conj(xhist[k][f]) * E[f];
          // Gradient constraint: keep the impulse response causal and B long.
          fft.inv(time, W[k], static_cast<Eigen::Index>(L));
          std::fill(time.begin() + static_cast<long>(B), time.end(), 0.0);
          fft.fwd(W[k], time);
        }
      }
    }
  }

  FirFilter out{Signal(M, K * B)};
  for (std::size_t m = 0; m < M; ++m) {
    for (std::size_t k = 0; k < K; ++k) {
      fft.inv(time, filt[m].w[k], static_cast<Eigen::Index>(L));
      for (std::size_t i = 0; i < B; ++i) out.taps(m, k * B + i) = time[i];
    }
  }
  return out;
}

EchoFilter fir_to_echo_filter(const FirFilter& fir, const WindowSpec& window, std::size_t taps, double sample_rate,
                              std::uint64_t probe_seed) {
  window.validate();
  if (taps < 1) throw InvalidInput("echo filter needs at least one tap");
  const std::size_t M = fir.taps.channels(), len = fir.taps.samples();
  const auto probe_len = static_cast<std::size_t>(4.0 * sample_rate);

  // White probe followed by enough silence for the full response to fit.
  std::mt19937_64 rng(mix_seed(probe_seed, 0));
  std::normal_distribution<double> normal;
  std::vector<double> probe(probe_len + len, 0.0);
  for (std::size_t t = 0; t < probe_len; ++t) probe[t] = normal(rng);

  Signal response(M, probe.size());
  for (std::size_t m = 0; m < M; ++m) {
    const auto full = convolve(probe, fir.taps.channel(m));
    std::copy_n(full.begin(), probe.size(), response.channel(m).begin());
  }
  const Spectrogram P = stft(Signal::mono(probe), window, sample_rate);
  const Spectrogram Q = stft(response, window, sample_rate);

  const std::size_t N = P.frames(), F = P.bins();
  const auto Ki = static_cast<Eigen::Index>(taps), Mi = static_cast<Eigen::Index>(M);
  EchoFilter h(F, taps, M);
  CMatX A(static_cast<Eigen::Index>(N), Ki);
  CMatX rhs(static_cast<Eigen::Index>(N), Mi);
  for (std::size_t f = 0; f < F; ++f) {
    for (std::size_t n = 0; n < N; ++n) {
      for (std::size_t k = 0; k < taps; ++k) A(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k)) = k <= n ? P(n - k, f, 0) : Complex{};
      for (std::size_t m = 0; m < M; ++m) rhs(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m)) = Q(n, f, m);
    }
    const CMatX sol = A.colPivHouseholderQr().solve(rhs);
    for (std::size_t k = 0; k < taps; ++k) {
      for (std::size_t m = 0; m < M; ++m) h(f, k, m) = sol(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(m));
    }
  }
  return h;
}

EchoFilter aec_init(const Signal& d, const Signal& x, const AecConfig& cfg, const WindowSpec& target_window,
                    std::size_t target_taps, double sample_rate) {
  return fir_to_echo_filter(adapt_echo_path(d, x, cfg), target_window, target_taps, sample_rate);
}

}  // namespace jse
