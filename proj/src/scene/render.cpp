#include <algorithm>
#include <cmath>

#include "jse/scene.hpp"
#include "seed.hpp"

namespace jse {

std::string to_string(PeriodLabel label) {
  switch (label) {
    case PeriodLabel::noise_only: return "noise_only";
    case PeriodLabel::near_end_talk: return "near_end_talk";
    case PeriodLabel::double_talk: return "double_talk";
    case PeriodLabel::far_end_talk: return "far_end_talk";
  }
  return "unknown";
}

PeriodLabel period_label_from_string(const std::string& s) {
  if (s == "noise_only") return PeriodLabel::noise_only;
  if (s == "near_end_talk") return PeriodLabel::near_end_talk;
  if (s == "double_talk") return PeriodLabel::double_talk;
  if (s == "far_end_talk") return PeriodLabel::far_end_talk;
  throw InvalidInput("unknown period label '" + s + "'");
}

void SceneConfig::validate() const {
  room.validate();
  if (ser_db < -45.0 || ser_db > 6.0) throw InvalidInput("ser_db outside [-45, 6]");
  const bool noiseless = std::isinf(snr_db) && snr_db > 0.0;
  if (!noiseless && !(snr_db >= -21.0 && snr_db <= 24.0)) throw InvalidInput("snr_db outside [-21, 24] and not +inf");
  if (!(t_e > 0.0)) throw InvalidInput("t_e must be positive");
  if (!(period_len > 0.0)) throw InvalidInput("period_len must be positive");
  if (!(sample_rate > 0.0)) throw InvalidInput("sample_rate must be positive");
  if (!(clip_level > 0.0)) throw InvalidInput("clip_level must be positive");
}

namespace {

double energy_over(const Signal& s, const std::vector<Period>& periods, PeriodLabel label) {
  double e = 0.0;
  for (const auto& p : periods) {
    if (p.label == label) e += s.energy(p.start, p.end);
  }
  return e;
}

std::vector<double> place(std::span<const double> src, std::size_t offset, std::size_t count,
                          std::size_t total) {
  std::vector<double> out(total, 0.0);
  std::copy_n(src.begin(), std::min(count, src.size()), out.begin() + static_cast<long>(offset));
  double peak = 0.0;
  for (double v : out) peak = std::max(peak, std::abs(v));
  if (peak > 0.0) {
    for (double& v : out) v /= peak;
  }
  return out;
}

}  // namespace

Scene render_scene(const SceneConfig& cfg, std::span<const double> u_src, std::span<const double> x_src,
                   std::span<const double> noise_src) {
  cfg.validate();
  const double fs = cfg.sample_rate;
  const auto P = static_cast<std::size_t>(std::llround(cfg.period_len * fs));
  const std::size_t T = 4 * P;
  if (u_src.size() < 2 * P || x_src.size() < 2 * P || noise_src.size() < T) {
    throw InvalidInput("sources too short for the four-period layout");
  }

  Scene scene;
  scene.config = cfg;
  scene.periods = {{0, P, PeriodLabel::noise_only},
                   {P, 2 * P, PeriodLabel::near_end_talk},
                   {2 * P, 3 * P, PeriodLabel::double_talk},
                   {3 * P, T, PeriodLabel::far_end_talk}};

  // Near-end talks during periods 2-3, far-end during periods 3-4.
  scene.u = Signal::mono(place(u_src, P, 2 * P, T));
  scene.x = Signal::mono(place(x_src, 2 * P, 2 * P, T));

  const Rir a_s = synth_rir(cfg.room, kNearEndSourceId, fs);
  const auto [early, late] = split_rir(a_s, cfg.t_e, fs);
  scene.s_e = render_source(scene.u.channel(0), early, T);
  scene.s_l = render_source(scene.u.channel(0), late, T);

  RoomConfig echo_room = cfg.room;
  if (cfg.echo_rir_length > 0) echo_room.rir_length = cfg.echo_rir_length;
  const Rir a_y = synth_rir(echo_room, kEchoSourceId, fs);
  const auto clipped = apply_loudspeaker_nonlinearity(scene.x.channel(0), cfg.clip_level);
  scene.y = render_source(clipped, a_y, T);

  std::vector<double> noise(noise_src.begin(), noise_src.begin() + static_cast<long>(T));
  scene.b = synth_diffuse_noise(cfg.room, noise, cfg.t_e, fs);

  const double se_dt = energy_over(scene.s_e, scene.periods, PeriodLabel::double_talk);
  const double y_dt = energy_over(scene.y, scene.periods, PeriodLabel::double_talk);
  if (y_dt > 0.0 && se_dt > 0.0) {
    scene.y *= std::sqrt(se_dt / (y_dt * std::pow(10.0, cfg.ser_db / 10.0)));
  }
  const double se_all = scene.s_e.energy();
  const double b_all = scene.b.energy();
  if (std::isinf(cfg.snr_db)) {
    scene.b *= 0.0;
  } else if (b_all > 0.0 && se_all > 0.0) {
    scene.b *= std::sqrt(se_all / (b_all * std::pow(10.0, cfg.snr_db / 10.0)));
  }

  scene.d = scene.s_e + scene.s_l + scene.y + scene.b;
  return scene;
}

Scene synth_scene(const SceneConfig& cfg) {
  const double fs = cfg.sample_rate;
  const auto P = static_cast<std::size_t>(std::llround(cfg.period_len * fs));
  const auto u = synth_speech_like(2 * P, mix_seed(cfg.seed, 11), fs);
  const auto x = synth_speech_like(2 * P, mix_seed(cfg.seed, 12), fs);
  const auto b = synth_colored_noise(4 * P, mix_seed(cfg.seed, 13));
  return render_scene(cfg, u, x, b);
}

double measured_ser_db(const Scene& scene) {
  const double se = energy_over(scene.s_e, scene.periods, PeriodLabel::double_talk);
  const double y = energy_over(scene.y, scene.periods, PeriodLabel::double_talk);
  return 10.0 * std::log10(se / y);
}

double measured_snr_db(const Scene& scene) {
  return 10.0 * std::log10(scene.s_e.energy() / scene.b.energy());
}

}  // namespace jse
