#include <algorithm>
#include <cmath>
#include <numbers>

#include <unsupported/Eigen/FFT>

#include "jse/dsp.hpp"

namespace jse {

Signal& Signal::operator+=(const Signal& o) {
  if (o.channels_ != channels_ || o.samples_ != samples_) {
    throw InvalidInput("signal shape mismatch in addition");
  }
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
  return *this;
}

Signal& Signal::operator*=(double g) {
  for (double& v : data_) v *= g;
  return *this;
}

Signal operator-(Signal a, const Signal& b) {
  if (a.channels_ != b.channels_ || a.samples_ != b.samples_) {
    throw InvalidInput("signal shape mismatch in subtraction");
  }
  for (std::size_t i = 0; i < a.data_.size(); ++i) a.data_[i] -= b.data_[i];
  return a;
}

double Signal::energy() const { return energy(0, samples_); }

double Signal::energy(std::size_t begin, std::size_t end) const {
  end = std::min(end, samples_);
  double e = 0.0;
  for (std::size_t m = 0; m < channels_; ++m) {
    for (std::size_t t = begin; t < end; ++t) e += data_[m * samples_ + t] * data_[m * samples_ + t];
  }
  return e;
}

std::vector<double> WindowSpec::coefficients() const {
  std::vector<double> w(length, 1.0);
  if (kind == WindowKind::hann) {
    // Periodic Hann; overlap-adds exactly for hops that divide length / 2.
    for (std::size_t j = 0; j < length; ++j) {
      w[j] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(j) /
                                  static_cast<double>(length));
    }
  }
  return w;
}

void WindowSpec::validate() const {
  if (length == 0 || hop == 0) throw InvalidInput("window length and hop must be positive");
  if (hop > length) throw InvalidInput("window hop exceeds window length");
  if (length % 2 != 0) throw InvalidInput("window length must be even");
  const auto w = coefficients();
  std::vector<double> sum(hop, 0.0);
  for (std::size_t j = 0; j < length; ++j) sum[j % hop] += w[j] * w[j];
  const auto [lo, hi] = std::minmax_element(sum.begin(), sum.end());
  if (*lo <= 0.0 || (*hi - *lo) > 1e-9 * *hi) {
    throw InvalidInput("window does not satisfy constant overlap-add of its square");
  }
}

CVec Spectrogram::at(long n, std::size_t f) const {
  CVec v = CVec::Zero(static_cast<Eigen::Index>(channels_));
  if (n < 0 || n >= static_cast<long>(frames_)) return v;
  const Complex* p = &data_[(static_cast<std::size_t>(n) * bins_ + f) * channels_];
  for (std::size_t m = 0; m < channels_; ++m) v(static_cast<Eigen::Index>(m)) = p[m];
  return v;
}

void Spectrogram::set(std::size_t n, std::size_t f, const CVec& v) {
  Complex* p = &data_[(n * bins_ + f) * channels_];
  for (std::size_t m = 0; m < channels_; ++m) p[m] = v(static_cast<Eigen::Index>(m));
}

Spectrogram Spectrogram::zeros_like() const {
  Spectrogram z(frames_, bins_, channels_);
  z.window = window;
  z.sample_rate = sample_rate;
  z.signal_length = signal_length;
  return z;
}

double Spectrogram::energy() const {
  double e = 0.0;
  for (const auto& v : data_) e += std::norm(v);
  return e;
}

Spectrogram& Spectrogram::operator+=(const Spectrogram& o) {
  if (!same_shape(o)) throw InvalidInput("spectrogram shape mismatch in addition");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
  return *this;
}

Spectrogram& Spectrogram::operator-=(const Spectrogram& o) {
  if (!same_shape(o)) throw InvalidInput("spectrogram shape mismatch in subtraction");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
  return *this;
}

std::size_t frame_count(std::size_t samples, const WindowSpec& window) {
  const std::size_t span = samples + window.length - window.hop;
  return (span + window.hop - 1) / window.hop;
}

Spectrogram stft(const Signal& signal, const WindowSpec& window, double sample_rate) {
  if (signal.empty()) throw InvalidInput("stft of an empty signal");
  window.validate();
  const std::size_t T = signal.samples();
  const std::size_t L = window.length;
  const std::size_t hop = window.hop;
  const std::size_t F = window.bins();
  const std::size_t N = frame_count(T, window);
  const std::size_t M = signal.channels();
  const long lead = static_cast<long>(L - hop);  // zeros before the first sample
  const auto w = window.coefficients();

  Spectrogram spec(N, F, M);
  spec.window = window;
  spec.sample_rate = sample_rate;
  spec.signal_length = T;

  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  std::vector<double> frame(L);
  std::vector<Complex> bins;
  for (std::size_t m = 0; m < M; ++m) {
    const auto x = signal.channel(m);
    for (std::size_t n = 0; n < N; ++n) {
      const long start = static_cast<long>(n * hop) - lead;
      for (std::size_t j = 0; j < L; ++j) {
        const long t = start + static_cast<long>(j);
        frame[j] = (t >= 0 && t < static_cast<long>(T)) ? w[j] * x[static_cast<std::size_t>(t)] : 0.0;
      }
      fft.fwd(bins, frame);
      for (std::size_t f = 0; f < F; ++f) spec(n, f, m) = bins[f];
    }
  }
  return spec;
}

Signal istft(const Spectrogram& spec, std::optional<std::size_t> length) {
  const WindowSpec& window = spec.window;
  window.validate();
  const std::size_t L = window.length;
  const std::size_t hop = window.hop;
  const std::size_t F = window.bins();
  if (spec.bins() != F) throw InvalidInput("spectrogram bin count does not match its window");
  const std::size_t N = spec.frames();
  const std::size_t M = spec.channels();
  const std::size_t lead = L - hop;
  const std::size_t padded = (N - 1) * hop + L;
  std::size_t out_len = N * hop;
  if (length) {
    out_len = *length;
  } else if (spec.signal_length > 0) {
    out_len = spec.signal_length;
  }
  if (out_len > N * hop) throw InvalidInput("requested istft length exceeds spectrogram span");

  const auto w = window.coefficients();
  std::vector<double> norm(padded, 0.0);
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t j = 0; j < L; ++j) norm[n * hop + j] += w[j] * w[j];
  }

  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  Signal out(M, out_len);
  std::vector<double> acc(padded);
  std::vector<Complex> bins(F);
  std::vector<double> frame;
  for (std::size_t m = 0; m < M; ++m) {
    std::fill(acc.begin(), acc.end(), 0.0);
    for (std::size_t n = 0; n < N; ++n) {
      for (std::size_t f = 0; f < F; ++f) bins[f] = spec(n, f, m);
      fft.inv(frame, bins, static_cast<int>(L));
      for (std::size_t j = 0; j < L; ++j) acc[n * hop + j] += w[j] * frame[j];
    }
    for (std::size_t t = 0; t < out_len; ++t) {
      const double d = norm[t + lead];
      out(m, t) = d > 0.0 ? acc[t + lead] / d : 0.0;
    }
  }
  return out;
}

}  // namespace jse
