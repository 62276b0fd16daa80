#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "jse/aec.hpp"
#include "jse/gaussian.hpp"
#include "jse/linear.hpp"
#include "jse/spectral.hpp"

namespace jse {

enum class Topology { joint, parallel, cascade, nn_cascade };

std::string to_string(Topology t);
Topology topology_from_string(const std::string& s);

enum class ProviderKind { oracle, unconstrained, lstm };

struct ProviderSpec {
  ProviderKind kind = ProviderKind::oracle;
  std::string weights;  // lstm only

  /// "oracle", "unconstrained" or "lstm:PATH".
  static ProviderSpec parse(const std::string& s);
  std::string to_string() const;
};

struct PipelineConfig {
  std::size_t echo_taps = 10;      // K
  std::size_t dereverb_taps = 10;  // L
  std::size_t delay = 3;           // Delta
  int iterations = 3;              // I
  int wpe_iterations = 3;
  WindowSpec window = WindowSpec::hann(1024, 256);
  double eps = kDefaultEpsilon;
  AecConfig aec{};
  Topology topology = Topology::joint;
  ProviderSpec provider{};
  /// Skip the adaptive AEC / WPE initialization when set.
  std::optional<EchoFilter> initial_h;
  std::optional<DereverbFilter> initial_g;

  void validate() const;
};

/// Log-likelihood after one sub-step of a BCA iteration.
struct LikelihoodRecord {
  int iteration = 0;  // 1-based
  std::string step;   // "spectral", "H", "G"
  double value = 0.0;
};

struct PipelineOutput {
  Spectrogram s_hat;
  Signal s_hat_wave;
  EchoFilter h;
  DereverbFilter g;
  MatrixField w_se;
  SourceStats stats;
  Spectrogram e, r;
  /// One entry per BCA iteration including the final one: I + 1 values for
  /// the joint and parallel topologies, the postfilter EM trace otherwise.
  std::vector<double> loglik;
  std::vector<LikelihoodRecord> substeps;
  std::map<std::string, double> timings;
  std::string provider;
};

/// sum_{n,f} -M log(pi) - log det R_dd - r^H R_dd^{-1} r.
double log_likelihood(const Spectrogram& r, const MixtureCovariance& mix);

std::unique_ptr<PsdProvider> make_provider(const ProviderSpec& spec, std::shared_ptr<const SceneSpectra> truth);

/// `scene` is required by the oracle provider only.
PipelineOutput run_pipeline(const Signal& d, const Signal& x, const PipelineConfig& cfg, const Scene* scene = nullptr,
                            double sample_rate = 16000.0);

PipelineOutput run_nn_joint(const Signal& d, const Signal& x, PipelineConfig cfg, const Scene* scene = nullptr);
PipelineOutput run_cascade(const Signal& d, const Signal& x, PipelineConfig cfg, const Scene* scene = nullptr);
PipelineOutput run_nn_parallel(const Signal& d, const Signal& x, PipelineConfig cfg, const Scene* scene = nullptr);
PipelineOutput run_nn_cascade(const Signal& d, const Signal& x, PipelineConfig cfg, const Scene* scene = nullptr);

/// Network inputs for one utterance: type-I features at the initial filters
/// (NN_0 input, 6F wide) and type-I + type-II features after one BCA iteration
/// with oracle PSDs (NN_i input, 10F wide).
struct TrainingFeatures {
  FeatureTensor nn0;
  FeatureTensor nn1;
};
TrainingFeatures training_features(const Scene& scene, const PipelineConfig& cfg);

/// Applies the final filters and Wiener filter of `out` to another input pair,
/// which is how the output is a linear function of d.
Spectrogram apply_final_filters(const PipelineOutput& out, const Spectrogram& d, const Spectrogram& x,
                                Topology topology);

}  // namespace jse
