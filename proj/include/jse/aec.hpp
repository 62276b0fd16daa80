#pragma once

#include <cstdint>

#include "jse/dsp.hpp"
#include "jse/linear.hpp"

namespace jse {

struct AecConfig {
  /// Rectangular half-overlapping analysis for the block adaptive filter.
  WindowSpec window = WindowSpec::rectangular(512, 256);
  std::size_t taps = 13;
  double step_base = 0.5;
  int passes = 2;
  /// Recursive smoothing factor for the double-talk coherence statistics.
  double coherence_smoothing = 0.9;

  void validate() const;
};

/// Multichannel time-domain FIR, one row per microphone.
struct FirFilter {
  Signal taps;  // M x (K * hop)
};

/// Runs the partitioned-block frequency-domain NLMS over the utterance
/// `cfg.passes` times and returns the converged echo path estimate.
FirFilter adapt_echo_path(const Signal& d, const Signal& x, const AecConfig& cfg);

/// Least-squares multiframe representation of a time-domain FIR in the STFT
/// domain of `window`, identified from a seeded white-noise probe.
EchoFilter fir_to_echo_filter(const FirFilter& fir, const WindowSpec& window, std::size_t taps,
                              double sample_rate = 16000.0, std::uint64_t probe_seed = 0x5eed);

/// H0 in the domain of `target_window` with `target_taps` frames.
EchoFilter aec_init(const Signal& d, const Signal& x, const AecConfig& cfg,
                    const WindowSpec& target_window = WindowSpec::hann(1024, 256), std::size_t target_taps = 10,
                    double sample_rate = 16000.0);

}  // namespace jse
