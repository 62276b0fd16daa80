#include <algorithm>
#include <cmath>
#include <random>

#include "jse/scene.hpp"
#include "seed.hpp"

namespace jse {

void RoomConfig::validate() const {
  if (!(rt60 > 0.0)) throw InvalidInput("rt60 must be positive");
  if (num_mics == 0 || num_mics > static_cast<std::size_t>(kMaxMics)) {
    throw InvalidInput("num_mics must be in [1, " + std::to_string(kMaxMics) + "]");
  }
  if (rir_length < direct_delay + 1) throw InvalidInput("rir_length must exceed direct_delay");
}

Rir synth_rir(const RoomConfig& room, std::uint64_t source_id, double sample_rate) {
  room.validate();
  std::mt19937_64 rng(mix_seed(room.seed, source_id));
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double decay = -3.0 / (room.rt60 * sample_rate);  // log10 amplitude per sample

  Rir rir;
  rir.taps.assign(room.num_mics, std::vector<double>(room.rir_length, 0.0));
  for (auto& ch : rir.taps) {
    ch[room.direct_delay] = 1.0;
    for (std::size_t tau = room.direct_delay + 1; tau < room.rir_length; ++tau) {
      const double age = static_cast<double>(tau - room.direct_delay);
      ch[tau] = room.tail_gain * std::pow(10.0, decay * age) * gauss(rng);
    }
  }
  return rir;
}

std::size_t early_split_index(double t_e, double sample_rate) {
  return static_cast<std::size_t>(std::llround(t_e * sample_rate));
}

std::pair<Rir, Rir> split_rir(const Rir& rir, double t_e, double sample_rate) {
  const std::size_t split = early_split_index(t_e, sample_rate);
  Rir early = rir;
  Rir late = rir;
  for (std::size_t m = 0; m < rir.channels(); ++m) {
    for (std::size_t tau = 0; tau < rir.length(); ++tau) {
      if (tau <= split) {
        late.taps[m][tau] = 0.0;
      } else {
        early.taps[m][tau] = 0.0;
      }
    }
  }
  return {std::move(early), std::move(late)};
}

std::vector<double> apply_loudspeaker_nonlinearity(std::span<const double> x, double clip_level) {
  if (!(clip_level > 0.0)) throw InvalidInput("clip_level must be positive");
  std::vector<double> out(x.size());
  std::transform(x.begin(), x.end(), out.begin(),
                 [clip_level](double v) { return std::clamp(v, -clip_level, clip_level); });
  return out;
}

Signal render_source(std::span<const double> source, const Rir& rir, std::size_t length) {
  Signal out(rir.channels(), length);
  for (std::size_t m = 0; m < rir.channels(); ++m) {
    const auto full = convolve(source, rir.taps[m]);
    const std::size_t n = std::min(length, full.size());
    std::copy_n(full.begin(), n, out.channel(m).begin());
  }
  return out;
}

Signal synth_diffuse_noise(const RoomConfig& room, std::span<const double> noise_src, double t_e,
                           double sample_rate) {
  const Rir a = split_rir(synth_rir(room, kNoiseSourceIdA, sample_rate), t_e, sample_rate).second;
  const Rir b = split_rir(synth_rir(room, kNoiseSourceIdB, sample_rate), t_e, sample_rate).second;
  Rir avg = a;
  for (std::size_t m = 0; m < avg.channels(); ++m) {
    for (std::size_t tau = 0; tau < avg.length(); ++tau) {
      avg.taps[m][tau] = 0.5 * (a.taps[m][tau] + b.taps[m][tau]);
    }
  }
  return render_source(noise_src, avg, noise_src.size());
}

}  // namespace jse
