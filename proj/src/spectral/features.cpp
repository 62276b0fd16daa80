#include <algorithm>
#include <cmath>

#include "jse/spectral.hpp"

namespace jse {

Tensor FeatureTensor::to_tensor() const {
  Tensor t;
  t.dims = {static_cast<std::uint32_t>(frames), static_cast<std::uint32_t>(width)};
  t.data.assign(values.begin(), values.end());
  return t;
}

std::vector<double> channel_magnitude(const Spectrogram& s) {
  std::vector<double> v = oracle_psd(s);
  for (double& x : v) x = std::sqrt(x);
  return v;
}

namespace {

void put_block(FeatureTensor& out, std::size_t block, const std::vector<double>& v) {
  for (std::size_t n = 0; n < out.frames; ++n) {
    for (std::size_t f = 0; f < out.bins; ++f) out.values[n * out.width + block * out.bins + f] = v[n * out.bins + f];
  }
}

}  // namespace

FeatureTensor type_i_features(const Spectrogram& x, const Spectrogram& d, const Spectrogram& y_hat,
                              const Spectrogram& e, const Spectrogram& e_hat, const Spectrogram& r) {
  const std::size_t N = d.frames(), F = d.bins();
  for (const Spectrogram* s : {&x, &y_hat, &e, &e_hat, &r}) {
    if (s->frames() != N || s->bins() != F) throw InvalidInput("type_i_features: misaligned inputs");
  }
  FeatureTensor out{N, F, 6 * F, std::vector<double>(N * 6 * F, 0.0)};
  std::size_t block = 0;
  for (const Spectrogram* s : {&x, &d, &y_hat, &e, &e_hat, &r}) put_block(out, block++, channel_magnitude(*s));
  return out;
}

FeatureTensor type_ii_features(const PsdSet& v_unc, std::size_t frames, std::size_t bins) {
  FeatureTensor out{frames, bins, 4 * bins, std::vector<double>(frames * 4 * bins, 0.0)};
  for (std::size_t c = 0; c < kNumSources; ++c) {
    if (v_unc[c].size() != frames * bins) throw InvalidInput("type_ii_features: PSD shape mismatch");
    std::vector<double> mag(v_unc[c].size());
    for (std::size_t i = 0; i < mag.size(); ++i) mag[i] = std::sqrt(std::max(0.0, v_unc[c][i]));
    put_block(out, c, mag);
  }
  return out;
}

FeatureTensor concat_features(const FeatureTensor& a, const FeatureTensor& b) {
  if (a.frames != b.frames || a.bins != b.bins) throw InvalidInput("concat_features: shape mismatch");
  FeatureTensor out{a.frames, a.bins, a.width + b.width, {}};
  out.values.reserve(out.frames * out.width);
  for (std::size_t n = 0; n < a.frames; ++n) {
    out.values.insert(out.values.end(), a.values.begin() + static_cast<long>(n * a.width),
                      a.values.begin() + static_cast<long>((n + 1) * a.width));
    out.values.insert(out.values.end(), b.values.begin() + static_cast<long>(n * b.width),
                      b.values.begin() + static_cast<long>((n + 1) * b.width));
  }
  return out;
}

FeatureTensor target_tensor(const PsdSet& v, std::size_t frames, std::size_t bins) { return type_ii_features(v, frames, bins); }

}  // namespace jse
