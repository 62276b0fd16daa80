#include <algorithm>
#include <numeric>

#include "jse/spectral.hpp"

namespace jse {

namespace {

void require_signals(const ProviderContext& ctx) {
  if (!ctx.x || !ctx.d || !ctx.y_hat || !ctx.e || !ctx.e_hat || !ctx.r) {
    throw InvalidInput("PSD provider context is missing signals");
  }
}

void check_shape(const SourceStats& stats, const std::vector<double>& v) {
  if (v.size() != stats.frames() * stats.bins()) throw InvalidInput("PSD provider produced the wrong shape");
}

}  // namespace

void OraclePsdProvider::update(SourceStats& stats, const ProviderContext& ctx) {
  if (!truth_) throw InvalidInput("oracle PSD provider needs the ground-truth scene");
  if (!ctx.h) throw InvalidInput("oracle PSD provider needs the current echo filter");
  DereverbFilter none(stats.bins(), 0, stats.channels(), 1);
  const DereverbFilter& g = ctx.g ? *ctx.g : none;
  const PsdSet v = oracle_psds(latent_components(*truth_, *ctx.h, g, ctx.path));
  for (Source c : kSources) {
    check_shape(stats, v[static_cast<std::size_t>(c)]);
    stats.psd(c) = v[static_cast<std::size_t>(c)];
  }
}

void UnconstrainedPsdProvider::update(SourceStats& stats, const ProviderContext& ctx) {
  if (ctx.v_unc) {
    for (Source c : kSources) {
      check_shape(stats, (*ctx.v_unc)[static_cast<std::size_t>(c)]);
      stats.psd(c) = (*ctx.v_unc)[static_cast<std::size_t>(c)];
    }
    if (ctx.path == SignalPath::echo_only) std::fill(stats.psd(Source::s_r).begin(), stats.psd(Source::s_r).end(), 0.0);
    return;
  }
  require_signals(ctx);
  const std::size_t N = stats.frames(), F = stats.bins();
  const std::vector<double> r = oracle_psd(*ctx.r);
  const std::vector<double> el = oracle_psd(*ctx.e_hat);
  const std::vector<double> yh = oracle_psd(*ctx.y_hat);

  // Stationary noise floor: per bin, the mean residual power over the 10% quietest frames.
  std::vector<double> frame_energy(N, 0.0);
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t f = 0; f < F; ++f) frame_energy[n] += r[n * F + f];
  }
  std::vector<std::size_t> order(N);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return frame_energy[a] < frame_energy[b]; });
  const std::size_t quiet = std::max<std::size_t>(1, N / 10);
  std::vector<double> floor(F, 0.0);
  for (std::size_t i = 0; i < quiet && i < N; ++i) {
    for (std::size_t f = 0; f < F; ++f) floor[f] += r[order[i] * F + f] / static_cast<double>(quiet);
  }

  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t f = 0; f < F; ++f) {
      const std::size_t i = n * F + f;
      stats.psd(Source::s_e, n, f) = r[i];
      stats.psd(Source::s_r, n, f) = ctx.path == SignalPath::echo_only ? 0.0 : el[i];
      stats.psd(Source::z_r, n, f) = 0.1 * yh[i];
      stats.psd(Source::b_r, n, f) = floor[f];
    }
  }
}

LstmPsdProvider::LstmPsdProvider(const std::filesystem::path& path) : path_(path) {
  namespace fs = std::filesystem;
  if (fs::is_directory(path)) {
    for (int i = 0;; ++i) {
      const fs::path p = path / ("nn" + std::to_string(i) + ".nnjt");
      if (!fs::exists(p)) break;
      nets_.push_back(LstmWeights::from_archive(read_archive(p)));
    }
    if (nets_.empty()) throw InvalidInput("no nn0.nnjt in weight directory " + path.string());
  } else {
    if (!fs::exists(path)) throw IoError("weight file not found: " + path.string());
    nets_.push_back(LstmWeights::from_archive(read_archive(path)));
  }
}

const LstmWeights& LstmPsdProvider::weights_for(int iteration) const {
  const auto i = static_cast<std::size_t>(std::max(iteration, 0));
  return nets_[std::min(i, nets_.size() - 1)];
}

void LstmPsdProvider::update(SourceStats& stats, const ProviderContext& ctx) {
  require_signals(ctx);
  const std::size_t N = stats.frames(), F = stats.bins();
  FeatureTensor features = type_i_features(*ctx.x, *ctx.d, *ctx.y_hat, *ctx.e, *ctx.e_hat, *ctx.r);
  const LstmWeights& w = weights_for(ctx.iteration);
  if (ctx.iteration > 0 && ctx.v_unc && w.input_size() == 10 * F) {
    features = concat_features(features, type_ii_features(*ctx.v_unc, N, F));
  }
  if (w.output_size() != 4 * F) throw InvalidInput("LSTM output size must be 4F = " + std::to_string(4 * F));
  const FeatureTensor out = lstm_forward(w, features);
  for (std::size_t c = 0; c < kNumSources; ++c) {
    for (std::size_t n = 0; n < N; ++n) {
      for (std::size_t f = 0; f < F; ++f) {
        const double a = out(n, c * F + f);
        stats.psd(kSources[c], n, f) = a * a;
      }
    }
  }
  if (ctx.path == SignalPath::echo_only) std::fill(stats.psd(Source::s_r).begin(), stats.psd(Source::s_r).end(), 0.0);
}

}  // namespace jse
