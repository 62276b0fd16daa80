#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "jse/scene.hpp"
#include "seed.hpp"

namespace jse {
namespace {

void normalize_peak(std::vector<double>& x) {
  double peak = 0.0;
  for (double v : x) peak = std::max(peak, std::abs(v));
  if (peak > 0.0) {
    for (double& v : x) v /= peak;
  }
}

double formant_gain(double freq, const double (&centers)[3], const double (&widths)[3]) {
  double g = 0.0;
  for (int k = 0; k < 3; ++k) {
    const double z = (freq - centers[k]) / widths[k];
    g += 1.0 / (1.0 + z * z);
  }
  return g;
}

}  // namespace

constexpr double kBreath = 0.3;

std::vector<double> synth_speech_like(std::size_t samples, std::uint64_t seed, double sample_rate) {
  std::mt19937_64 rng(mix_seed(seed, 0x5eec4));
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto range = [&](double lo, double hi) { return lo + (hi - lo) * uni(rng); };

  std::vector<double> out(samples, 0.0);
  const double two_pi = 2.0 * std::numbers::pi;
  std::size_t t = static_cast<std::size_t>(range(0.0, 0.05) * sample_rate);
  while (t < samples) {
    const auto dur = static_cast<std::size_t>(range(0.12, 0.35) * sample_rate);
    const std::size_t end = std::min(samples, t + dur);
    const double level = range(0.4, 1.0);
    const auto ramp = static_cast<double>(std::max<std::size_t>(1, dur / 6));
    auto envelope = [&](std::size_t i) {
      const double a = static_cast<double>(i - t);
      const double b = static_cast<double>(end - i);
      const double rise = std::min(1.0, a / ramp);
      const double fall = std::min(1.0, b / ramp);
      return level * std::sin(0.5 * std::numbers::pi * rise) * std::sin(0.5 * std::numbers::pi * fall);
    };

    if (uni(rng) < 0.8) {
      const double f0_start = range(90.0, 220.0);
      const double f0_end = f0_start * range(0.8, 1.2);
      const double centers[3] = {range(300.0, 800.0), range(900.0, 2200.0), range(2400.0, 3200.0)};
      const double widths[3] = {range(60.0, 120.0), range(80.0, 160.0), range(120.0, 220.0)};
      const int harmonics = static_cast<int>(4000.0 / f0_start);
      std::vector<double> amp(static_cast<std::size_t>(harmonics));
      std::vector<double> phase(static_cast<std::size_t>(harmonics));
      for (int h = 0; h < harmonics; ++h) {
        amp[h] = formant_gain(f0_start * (h + 1), centers, widths) / std::sqrt(h + 1.0);
        phase[h] = range(0.0, two_pi);
      }
      // Slow random pitch and amplitude wander plus breath noise keep voiced
      // segments from being predictable far into the future.
      double phi = 0.0, jitter = 0.0, shimmer = 0.0, prev = 0.0;
      for (std::size_t i = t; i < end; ++i) {
        const double frac = static_cast<double>(i - t) / static_cast<double>(std::max<std::size_t>(1, end - t));
        jitter = 0.999 * jitter + 0.002 * gauss(rng);
        shimmer = 0.999 * shimmer + 0.004 * gauss(rng);
        const double f0 = (f0_start + (f0_end - f0_start) * frac) * std::exp(jitter);
        phi += two_pi * f0 / sample_rate;
        double v = 0.0;
        for (int h = 0; h < harmonics; ++h) v += amp[h] * std::sin((h + 1) * phi + phase[h]);
        const double w = gauss(rng);
        out[i] += envelope(i) * (v * (1.0 + shimmer) + kBreath * (w - 0.7 * prev));
        prev = w;
      }
    } else {
      double prev = 0.0;
      for (std::size_t i = t; i < end; ++i) {
        const double w = gauss(rng);
        out[i] += 0.5 * envelope(i) * (w - 0.7 * prev);
        prev = w;
      }
    }
    const double gap = uni(rng) < 0.15 ? range(0.25, 0.45) : range(0.03, 0.15);
    t = end + static_cast<std::size_t>(gap * sample_rate);
  }
  normalize_peak(out);
  return out;
}

std::vector<double> synth_colored_noise(std::size_t samples, std::uint64_t seed) {
  std::mt19937_64 rng(mix_seed(seed, 0x7015e));
  std::normal_distribution<double> gauss(0.0, 1.0);
  // Paul Kellet's economy pink filter.
  double b0 = 0, b1 = 0, b2 = 0;
  std::vector<double> out(samples);
  for (auto& v : out) {
    const double w = gauss(rng);
    b0 = 0.99765 * b0 + w * 0.0990460;
    b1 = 0.96300 * b1 + w * 0.2965164;
    b2 = 0.57000 * b2 + w * 1.0526913;
    v = b0 + b1 + b2 + w * 0.1848;
  }
  normalize_peak(out);
  return out;
}

}  // namespace jse
