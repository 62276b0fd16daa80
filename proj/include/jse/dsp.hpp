#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "jse/types.hpp"

namespace jse {

enum class WindowKind { hann, rectangular };

struct WindowSpec {
  WindowKind kind = WindowKind::hann;
  std::size_t length = 1024;
  std::size_t hop = 256;

  std::size_t bins() const { return length / 2 + 1; }

  /// Throws InvalidInput unless the squared window overlap-adds to a constant.
  void validate() const;
  std::vector<double> coefficients() const;

  static WindowSpec hann(std::size_t length, std::size_t hop) {
    return {WindowKind::hann, length, hop};
  }
  static WindowSpec rectangular(std::size_t length, std::size_t hop) {
    return {WindowKind::rectangular, length, hop};
  }

  bool operator==(const WindowSpec&) const = default;
};

/// Complex STFT tensor indexed [frame n][bin f][channel m].
class Spectrogram {
 public:
  Spectrogram() = default;
  Spectrogram(std::size_t frames, std::size_t bins, std::size_t channels)
      : frames_(frames), bins_(bins), channels_(channels), data_(frames * bins * channels) {}

  std::size_t frames() const { return frames_; }
  std::size_t bins() const { return bins_; }
  std::size_t channels() const { return channels_; }
  std::size_t size() const { return data_.size(); }

  Complex& operator()(std::size_t n, std::size_t f, std::size_t m) {
    return data_[(n * bins_ + f) * channels_ + m];
  }
  Complex operator()(std::size_t n, std::size_t f, std::size_t m) const {
    return data_[(n * bins_ + f) * channels_ + m];
  }
  /// The M-vector at (n, f); zero for n < 0 or n >= N.
  CVec at(long n, std::size_t f) const;
  void set(std::size_t n, std::size_t f, const CVec& v);

  std::vector<Complex>& raw() { return data_; }
  const std::vector<Complex>& raw() const { return data_; }

  bool same_shape(const Spectrogram& o) const {
    return frames_ == o.frames_ && bins_ == o.bins_ && channels_ == o.channels_;
  }
  Spectrogram zeros_like() const;
  double energy() const;

  Spectrogram& operator+=(const Spectrogram& o);
  Spectrogram& operator-=(const Spectrogram& o);
  friend Spectrogram operator+(Spectrogram a, const Spectrogram& b) { return a += b; }
  friend Spectrogram operator-(Spectrogram a, const Spectrogram& b) { return a -= b; }

  WindowSpec window{};
  double sample_rate = 16000.0;
  /// Length of the analyzed waveform; istft trims to it.
  std::size_t signal_length = 0;

 private:
  std::size_t frames_ = 0;
  std::size_t bins_ = 0;
  std::size_t channels_ = 0;
  std::vector<Complex> data_;
};

/// Number of frames emitted for a signal of `samples` samples.
std::size_t frame_count(std::size_t samples, const WindowSpec& window);

Spectrogram stft(const Signal& signal, const WindowSpec& window, double sample_rate = 16000.0);

/// Least-squares overlap-add inverse. Output length is `length` when given,
/// otherwise spec.signal_length, otherwise frames * hop.
Signal istft(const Spectrogram& spec, std::optional<std::size_t> length = std::nullopt);

/// Full linear convolution via FFT.
std::vector<double> convolve(std::span<const double> a, std::span<const double> b);

struct WavData {
  Signal signal;
  double sample_rate = 0.0;
};

WavData read_wav(const std::filesystem::path& path);
/// Reads a WAV and requires its sample rate to equal `expected_rate`.
Signal read_wav(const std::filesystem::path& path, double expected_rate);
void write_wav(const std::filesystem::path& path, const Signal& signal, double sample_rate);

}  // namespace jse
