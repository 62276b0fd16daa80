#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include "jse/dsp.hpp"

namespace jse {

struct RoomConfig {
  double rt60 = 0.5;              // seconds
  std::size_t rir_length = 8000;  // samples
  std::size_t num_mics = 3;
  std::size_t direct_delay = 40;  // samples, same for every mic
  double tail_gain = 0.05;        // amplitude of the reverberant tail right after the direct path
  std::uint64_t seed = 1;

  void validate() const;
};

/// Room impulse responses, one row per microphone.
struct Rir {
  std::vector<std::vector<double>> taps;

  std::size_t channels() const { return taps.size(); }
  std::size_t length() const { return taps.empty() ? 0 : taps.front().size(); }
};

enum class PeriodLabel { noise_only, near_end_talk, double_talk, far_end_talk };

std::string to_string(PeriodLabel label);
PeriodLabel period_label_from_string(const std::string& s);

struct Period {
  std::size_t start = 0;  // samples, inclusive
  std::size_t end = 0;    // samples, exclusive
  PeriodLabel label = PeriodLabel::noise_only;
};

struct SceneConfig {
  double ser_db = -10.0;
  double snr_db = 5.0;  // +inf disables the noise
  double clip_level = 0.9;  // relative to the peak-normalized far-end signal
  double t_e = 0.064;       // mixing time, seconds
  double period_len = 2.0;  // seconds
  double sample_rate = 16000.0;
  /// Echo-path length in samples; 0 means room.rir_length.
  std::size_t echo_rir_length = 0;
  RoomConfig room{};
  std::uint64_t seed = 1;

  void validate() const;
};

struct Scene {
  Signal x;  // far-end reference (1 ch)
  Signal u;  // anechoic near-end (1 ch)
  Signal s_e, s_l, y, b, d;
  std::vector<Period> periods;
  SceneConfig config;
};

/// Source ids used by render_scene when drawing RIRs.
inline constexpr std::uint64_t kEchoSourceId = 0;
inline constexpr std::uint64_t kNearEndSourceId = 1;
inline constexpr std::uint64_t kNoiseSourceIdA = 2;
inline constexpr std::uint64_t kNoiseSourceIdB = 3;

/// Direct impulse followed by an exponentially decaying Gaussian tail whose
/// amplitude envelope is 10^(-3 tau / (rt60 fs)).
Rir synth_rir(const RoomConfig& room, std::uint64_t source_id, double sample_rate = 16000.0);

/// Index of the last early tap: round(t_e * fs).
std::size_t early_split_index(double t_e, double sample_rate);

/// Early taps are tau <= round(t_e fs); late taps are the rest. early + late == rir.
std::pair<Rir, Rir> split_rir(const Rir& rir, double t_e, double sample_rate = 16000.0);

std::vector<double> apply_loudspeaker_nonlinearity(std::span<const double> x, double clip_level);

/// Noise convolved with the per-channel average of the late tails of two RIRs.
Signal synth_diffuse_noise(const RoomConfig& room, std::span<const double> noise_src, double t_e,
                           double sample_rate = 16000.0);

/// Convolves a mono source with every channel of a RIR, truncated to `length` samples.
Signal render_source(std::span<const double> source, const Rir& rir, std::size_t length);

/// Renders the four-period layout: noise only, near-end talk, double talk,
/// far-end talk. u_src and x_src need 2 periods of samples, noise_src 4.
Scene render_scene(const SceneConfig& cfg, std::span<const double> u_src, std::span<const double> x_src,
                   std::span<const double> noise_src);

/// Synthetic voiced/unvoiced speech-like signal with syllabic pauses.
std::vector<double> synth_speech_like(std::size_t samples, std::uint64_t seed, double sample_rate = 16000.0);
/// Stationary colored (roughly pink) noise.
std::vector<double> synth_colored_noise(std::size_t samples, std::uint64_t seed);

/// Renders a scene from internally synthesized sources.
Scene synth_scene(const SceneConfig& cfg);

double measured_ser_db(const Scene& scene);
double measured_snr_db(const Scene& scene);

/// Scene directory: d/x/u/s_e/s_l/y/b .wav (float32) and manifest.json.
void write_scene(const Scene& scene, const std::filesystem::path& dir);
Scene read_scene(const std::filesystem::path& dir);

}  // namespace jse
