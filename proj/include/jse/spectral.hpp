#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "jse/gaussian.hpp"
#include "jse/linear.hpp"
#include "jse/scene.hpp"

namespace jse {

// ---------------------------------------------------------------- NNJT files

/// float32 tensor with row-major payload.
struct Tensor {
  std::vector<std::uint32_t> dims;
  std::vector<float> data;

  std::size_t numel() const;
  bool operator==(const Tensor&) const = default;
};

using NamedTensor = std::pair<std::string, Tensor>;
/// Ordered list of named tensors, written in order.
using TensorArchive = std::vector<NamedTensor>;

void write_tensor(std::ostream& os, const Tensor& t);
Tensor read_tensor(std::istream& is);
void write_archive(const std::filesystem::path& path, const TensorArchive& archive);
TensorArchive read_archive(const std::filesystem::path& path);
/// Throws InvalidInput when the name is missing.
const Tensor& find_tensor(const TensorArchive& archive, const std::string& name);

/// [frames, bins, channels, 2] real/imag tensor.
Tensor spectrogram_tensor(const Spectrogram& s);
/// [F, K, M, 2] and [F, L, M, M, 2].
Tensor echo_filter_tensor(const EchoFilter& h);
Tensor dereverb_filter_tensor(const DereverbFilter& g);

// ------------------------------------------------------- ground-truth spectra

struct SceneSpectra {
  Spectrogram x, d, s_e, s_l, y, b;

  static SceneSpectra analyze(const Scene& scene, const WindowSpec& window);
};

/// How the linear filters act on the mixture.
enum class SignalPath {
  /// r = (d - H x) - G * (d - H x).
  cascaded,
  /// r = d - H x - G * d.
  parallel,
  /// No dereverberation; the s_e slot carries s_e + s_l and s_r is empty.
  echo_only,
};

struct LatentComponents {
  Spectrogram s_e, s_r, z_r, b_r;

  const Spectrogram& operator[](Source c) const;
};

/// Splits the current residual r into the four latent sources for the given
/// filters. Their sum equals r.
LatentComponents latent_components(const SceneSpectra& truth, const EchoFilter& h, const DereverbFilter& g,
                                   SignalPath path);

using PsdSet = std::array<std::vector<double>, kNumSources>;

/// v_c(n, f) = ||c(n, f)||^2 / M.
std::vector<double> oracle_psd(const Spectrogram& c);
PsdSet oracle_psds(const LatentComponents& latents);

// ----------------------------------------------------------------- features

/// Nonnegative [frames x width] row-major matrix.
struct FeatureTensor {
  std::size_t frames = 0;
  std::size_t bins = 0;
  std::size_t width = 0;
  std::vector<double> values;

  double operator()(std::size_t n, std::size_t j) const { return values[n * width + j]; }
  Tensor to_tensor() const;
};

/// sqrt(||s(n, f)||^2 / M) per bin.
std::vector<double> channel_magnitude(const Spectrogram& s);

/// |x|, |d~|, |y~|, |e~|, |e_l~|, |r~| in that order, 6F wide.
FeatureTensor type_i_features(const Spectrogram& x, const Spectrogram& d, const Spectrogram& y_hat,
                              const Spectrogram& e, const Spectrogram& e_hat, const Spectrogram& r);
/// sqrt(v_unc) for s_e, s_r, z_r, b_r; 4F wide.
FeatureTensor type_ii_features(const PsdSet& v_unc, std::size_t frames, std::size_t bins);
/// Row-wise concatenation [a | b].
FeatureTensor concat_features(const FeatureTensor& a, const FeatureTensor& b);

// --------------------------------------------------------------------- LSTM

struct LstmLayer {
  // W_* [in x hidden], U_* [hidden x hidden], b_* [hidden]; gates i, f, c, o.
  std::array<Eigen::MatrixXd, 4> W, U;
  std::array<Eigen::VectorXd, 4> b;
};

struct LstmWeights {
  std::array<LstmLayer, 2> layers;
  Eigen::MatrixXd head_W;  // [hidden x out]
  Eigen::VectorXd head_b;  // [out]

  std::size_t input_size() const { return static_cast<std::size_t>(layers[0].W[0].rows()); }
  std::size_t hidden_size() const { return static_cast<std::size_t>(layers[0].W[0].cols()); }
  std::size_t output_size() const { return static_cast<std::size_t>(head_b.size()); }

  /// Validates names and shapes.
  static LstmWeights from_archive(const TensorArchive& archive);
  TensorArchive to_archive() const;
  /// Zero weights with the given sizes.
  static LstmWeights zeros(std::size_t input, std::size_t hidden, std::size_t output);
};

/// Stateful 2-layer LSTM over all frames followed by a ReLU head. Returns
/// nonnegative sqrt-PSD estimates [frames x output].
FeatureTensor lstm_forward(const LstmWeights& weights, const FeatureTensor& features);

/// Generalized KL divergence between target and predicted sqrt-PSDs, averaged
/// over all entries. Natural log; predictions floored at 1e-12.
double kl_divergence(const std::vector<double>& target, const std::vector<double>& predicted);

// ---------------------------------------------------------------- providers

/// Everything a PSD provider may look at during one BCA step.
struct ProviderContext {
  const Spectrogram* x = nullptr;
  const Spectrogram* d = nullptr;
  const Spectrogram* y_hat = nullptr;
  const Spectrogram* e = nullptr;
  const Spectrogram* e_hat = nullptr;
  const Spectrogram* r = nullptr;
  const EchoFilter* h = nullptr;
  const DereverbFilter* g = nullptr;
  /// Null at initialization.
  const PsdSet* v_unc = nullptr;
  /// 0 for the initial estimate, i >= 1 for the refresh after BCA iteration i.
  int iteration = 0;
  SignalPath path = SignalPath::cascaded;
};

class PsdProvider {
 public:
  virtual ~PsdProvider() = default;
  virtual std::string name() const = 0;
  /// Writes v_c(n, f) for every source into `stats`.
  virtual void update(SourceStats& stats, const ProviderContext& ctx) = 0;
};

/// Ground-truth PSDs from the latent components under the current filters.
class OraclePsdProvider : public PsdProvider {
 public:
  explicit OraclePsdProvider(std::shared_ptr<const SceneSpectra> truth) : truth_(std::move(truth)) {}
  std::string name() const override { return "oracle"; }
  void update(SourceStats& stats, const ProviderContext& ctx) override;

 private:
  std::shared_ptr<const SceneSpectra> truth_;
};

/// Signal-based initialization followed by the unconstrained ML estimates.
class UnconstrainedPsdProvider : public PsdProvider {
 public:
  std::string name() const override { return "unconstrained"; }
  void update(SourceStats& stats, const ProviderContext& ctx) override;
};

/// NN_0 on type-I features, NN_i on type-I + type-II features.
class LstmPsdProvider : public PsdProvider {
 public:
  /// `path` is a single .nnjt archive used for every iteration, or a
  /// directory holding nn0.nnjt, nn1.nnjt, ... where missing indices >= 1
  /// reuse the highest available one.
  explicit LstmPsdProvider(const std::filesystem::path& path);
  std::string name() const override { return "lstm:" + path_.string(); }
  void update(SourceStats& stats, const ProviderContext& ctx) override;

  const LstmWeights& weights_for(int iteration) const;

 private:
  std::filesystem::path path_;
  std::vector<LstmWeights> nets_;
};

// ------------------------------------------------------------------ targets

struct TargetConfig {
  std::size_t echo_taps = 10;
  std::size_t dereverb_taps = 10;
  std::size_t delay = 3;
  int iterations = 3;
  double eps = kDefaultEpsilon;
};

struct TargetResult {
  PsdSet v;
  LatentComponents latents;
  EchoFilter h;
  DereverbFilter g;
  /// Energy of z_r at iteration 0 (zero filters) and after each iteration.
  std::vector<double> z_r_energy;
};

/// Oracle BCA from zero filters with ground-truth PSDs and unweighted SCM EM.
TargetResult ground_truth_target_pipeline(const SceneSpectra& truth, const TargetConfig& cfg = {});

/// [frames x 4F] sqrt-PSD training targets.
FeatureTensor target_tensor(const PsdSet& v, std::size_t frames, std::size_t bins);

}  // namespace jse
