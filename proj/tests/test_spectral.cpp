#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "jse/spectral.hpp"
#include "test_util.hpp"

using namespace jse;

namespace {

std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("jse_spectral_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

LstmWeights random_weights(std::size_t in, std::size_t hidden, std::size_t out, std::uint64_t seed, double scale = 0.4) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, scale);
  LstmWeights w = LstmWeights::zeros(in, hidden, out);
  auto fill = [&](auto& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<float>(g(rng));
  };
  for (auto& layer : w.layers) {
    for (std::size_t k = 0; k < 4; ++k) {
      fill(layer.W[k]);
      fill(layer.U[k]);
      fill(layer.b[k]);
    }
  }
  fill(w.head_W);
  fill(w.head_b);
  return w;
}

FeatureTensor random_features(std::size_t frames, std::size_t width, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 2.0);
  FeatureTensor t{frames, 1, width, std::vector<double>(frames * width)};
  for (double& v : t.values) v = u(rng);
  return t;
}

// Scalar LSTM written from the cell equations, independent of the Eigen path.
std::vector<double> reference_lstm(const LstmWeights& w, const FeatureTensor& x) {
  const std::size_t H = w.hidden_size(), O = w.output_size();
  auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  std::vector<std::vector<double>> h(2, std::vector<double>(H, 0.0)), c = h;
  std::vector<double> out;
  for (std::size_t n = 0; n < x.frames; ++n) {
    std::vector<double> in(x.width);
    for (std::size_t j = 0; j < x.width; ++j) in[j] = x(n, j);
    for (std::size_t l = 0; l < 2; ++l) {
      const LstmLayer& L = w.layers[l];
      std::vector<double> hn(H), cn(H);
      for (std::size_t k = 0; k < H; ++k) {
        double pre[4];
        for (std::size_t g = 0; g < 4; ++g) {
          double a = L.b[g](static_cast<Eigen::Index>(k));
          for (std::size_t i = 0; i < in.size(); ++i) a += in[i] * L.W[g](static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
          for (std::size_t i = 0; i < H; ++i) a += h[l][i] * L.U[g](static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
          pre[g] = a;
        }
        cn[k] = sig(pre[1]) * c[l][k] + sig(pre[0]) * std::tanh(pre[2]);
        hn[k] = sig(pre[3]) * std::tanh(cn[k]);
      }
      h[l] = hn;
      c[l] = cn;
      in = hn;
    }
    for (std::size_t o = 0; o < O; ++o) {
      double a = w.head_b(static_cast<Eigen::Index>(o));
      for (std::size_t k = 0; k < H; ++k) a += in[k] * w.head_W(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(o));
      out.push_back(std::max(0.0, a));
    }
  }
  return out;
}

}  // namespace

TEST_CASE("nnjt tensor byte layout") {
  Tensor t{{2, 3}, {1.f, -2.f, 0.5f, 0.f, 3.25f, -1e-3f}};
  std::ostringstream os(std::ios::binary);
  write_tensor(os, t);
  const std::string b = os.str();
  REQUIRE(b.size() == 7 + 2 * 4 + 6 * 4);
  CHECK(b.substr(0, 4) == "NNJT");
  CHECK(b[4] == 1);
  CHECK(b[5] == 0);
  CHECK(b[6] == 2);
  auto u32 = [&](std::size_t off) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(b[off + i])) << (8 * i);
    return v;
  };
  CHECK(u32(7) == 2);
  CHECK(u32(11) == 3);
  // 1.0f is 0x3f800000 little-endian.
  CHECK(u32(15) == 0x3f800000u);
  CHECK(u32(19) == 0xc0000000u);

  std::istringstream is(b, std::ios::binary);
  CHECK(read_tensor(is) == t);

  std::istringstream bad("NNJX\x01\x00\x00", std::ios::binary);
  CHECK_THROWS_AS(read_tensor(bad), InvalidInput);
  std::istringstream trunc(b.substr(0, b.size() - 2), std::ios::binary);
  CHECK_THROWS_AS(read_tensor(trunc), InvalidInput);
  CHECK_THROWS_AS(write_tensor(os, Tensor{{2, 2}, {1.f}}), InvalidInput);
}

TEST_CASE("nnjt archive round trip and layout") {
  const auto dir = temp_dir("archive");
  TensorArchive a = {{"alpha", Tensor{{3}, {1.f, 2.f, 3.f}}}, {"b", Tensor{{}, {7.f}}}, {"empty", Tensor{{0, 4}, {}}}};
  const auto path = dir / "a.nnjt";
  write_archive(path, a);
  CHECK(read_archive(path) == a);

  std::ifstream is(path, std::ios::binary);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)), {});
  REQUIRE(bytes.size() > 11);
  CHECK(bytes[0] == 3);
  CHECK(bytes[1] == 0);
  CHECK(bytes[4] == 5);  // name length
  CHECK(bytes[5] == 0);
  CHECK(std::string(bytes.begin() + 6, bytes.begin() + 11) == "alpha");
  CHECK(std::string(bytes.begin() + 11, bytes.begin() + 15) == "NNJT");

  CHECK(find_tensor(a, "b").data[0] == 7.f);
  CHECK_THROWS_AS(find_tensor(a, "missing"), InvalidInput);
  CHECK_THROWS_AS(read_archive(dir / "nope.nnjt"), IoError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("spectrogram and filter tensors") {
  const Spectrogram s = test::random_spectrogram(4, 3, 2, 5);
  const Tensor t = spectrogram_tensor(s);
  CHECK(t.dims == std::vector<std::uint32_t>{4, 3, 2, 2});
  CHECK(t.data[2 * (((1 * 3) + 2) * 2 + 1)] == static_cast<float>(s(1, 2, 1).real()));
  CHECK(t.data[2 * (((1 * 3) + 2) * 2 + 1) + 1] == static_cast<float>(s(1, 2, 1).imag()));

  EchoFilter h(5, 3, 2);
  CHECK(echo_filter_tensor(h).dims == std::vector<std::uint32_t>{5, 3, 2, 2});
  DereverbFilter g(5, 4, 2, 3);
  CHECK(dereverb_filter_tensor(g).dims == std::vector<std::uint32_t>{5, 4, 2, 2, 2});
}

TEST_CASE("lstm weights archive names and validation") {
  const LstmWeights w = random_weights(6, 4, 5, 1);
  const TensorArchive a = w.to_archive();
  REQUIRE(a.size() == 26);
  for (const char* n : {"lstm1.W_i", "lstm1.W_f", "lstm1.W_c", "lstm1.W_o", "lstm1.U_i", "lstm1.b_o", "lstm2.W_i",
                        "lstm2.U_c", "lstm2.b_f", "head.W", "head.b"}) {
    CHECK_NOTHROW(find_tensor(a, n));
  }
  CHECK(find_tensor(a, "lstm1.W_i").dims == std::vector<std::uint32_t>{6, 4});
  CHECK(find_tensor(a, "lstm2.W_i").dims == std::vector<std::uint32_t>{4, 4});
  CHECK(find_tensor(a, "head.W").dims == std::vector<std::uint32_t>{4, 5});

  const LstmWeights back = LstmWeights::from_archive(a);
  CHECK(back.input_size() == 6);
  CHECK(back.hidden_size() == 4);
  CHECK(back.output_size() == 5);
  CHECK(back.to_archive() == a);

  TensorArchive bad = a;
  for (auto& [n, t] : bad) {
    if (n == "lstm2.U_o") t.dims = {3, 4};
  }
  CHECK_THROWS_AS(LstmWeights::from_archive(bad), InvalidInput);
  TensorArchive missing(a.begin(), a.end() - 1);
  CHECK_THROWS_AS(LstmWeights::from_archive(missing), InvalidInput);
}

TEST_CASE("lstm with zero weights outputs relu of the head bias") {
  LstmWeights w = LstmWeights::zeros(3, 2, 4);
  w.head_b << 0.5, -1.0, 0.0, 2.0;
  const FeatureTensor x = random_features(7, 3, 2);
  const FeatureTensor y = lstm_forward(w, x);
  REQUIRE(y.frames == 7);
  REQUIRE(y.width == 4);
  for (std::size_t n = 0; n < 7; ++n) {
    CHECK(y(n, 0) == 0.5);
    CHECK(y(n, 1) == 0.0);
    CHECK(y(n, 2) == 0.0);
    CHECK(y(n, 3) == 2.0);
  }
  CHECK_THROWS_AS(lstm_forward(w, random_features(2, 4, 1)), InvalidInput);
}

TEST_CASE("lstm hand-computed single unit") {
  // Input 1, hidden 1, output 1. Only the candidate and output paths carry weight.
  LstmWeights w = LstmWeights::zeros(1, 1, 1);
  for (auto& layer : w.layers) {
    layer.W[2](0, 0) = 1.0;
    layer.b[0](0) = 100.0;  // input gate open
    layer.b[1](0) = -100.0; // forget gate closed
    layer.b[3](0) = 100.0;  // output gate open
  }
  w.head_W(0, 0) = 1.0;
  FeatureTensor x{2, 1, 1, {0.5, 1.0}};
  const FeatureTensor y = lstm_forward(w, x);
  for (std::size_t n = 0; n < 2; ++n) {
    const double h1 = std::tanh(std::tanh(x.values[n]));
    const double h2 = std::tanh(std::tanh(h1));
    CHECK(y(n, 0) == doctest::Approx(h2).epsilon(1e-12));
  }
}

TEST_CASE("lstm matches a scalar reference and is causal") {
  const LstmWeights w = random_weights(5, 6, 3, 11);
  const FeatureTensor x = random_features(20, 5, 12);
  const FeatureTensor y = lstm_forward(w, x);
  const std::vector<double> ref = reference_lstm(w, x);
  REQUIRE(ref.size() == y.values.size());
  for (std::size_t i = 0; i < ref.size(); ++i) {
    CHECK(std::abs(y.values[i] - ref[i]) < 1e-12);
    CHECK(y.values[i] >= 0.0);
  }

  FeatureTensor head{8, 1, 5, std::vector<double>(x.values.begin(), x.values.begin() + 8 * 5)};
  const FeatureTensor yh = lstm_forward(w, head);
  for (std::size_t i = 0; i < yh.values.size(); ++i) CHECK(yh.values[i] == y.values[i]);
}

TEST_CASE("kl divergence") {
  CHECK(kl_divergence({1.0}, {2.0}) == doctest::Approx(1.0 - std::log(2.0)).epsilon(1e-14));
  CHECK(std::abs(kl_divergence({1.0}, {2.0}) - (1.0 - std::log(2.0))) < 1e-12);
  const std::vector<double> v = {0.0, 0.3, 2.0, 5.5};
  CHECK(kl_divergence(v, v) == 0.0);
  // Zero target contributes the prediction itself.
  CHECK(kl_divergence({0.0, 1.0}, {0.7, 1.0}) == doctest::Approx(0.35));
  CHECK(kl_divergence({}, {}) == 0.0);
  CHECK_THROWS_AS(kl_divergence({1.0}, {1.0, 2.0}), InvalidInput);
  CHECK_THROWS_AS(kl_divergence({-1.0}, {1.0}), InvalidInput);

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  for (int i = 0; i < 200; ++i) {
    std::vector<double> a(5), b(5);
    for (auto& x : a) x = u(rng);
    for (auto& x : b) x = u(rng);
    CHECK(kl_divergence(a, b) >= 0.0);
  }
}

TEST_CASE("feature tensors") {
  const std::size_t N = 5, F = 3, M = 2;
  std::vector<Spectrogram> s;
  for (std::uint64_t k = 0; k < 6; ++k) s.push_back(test::random_spectrogram(N, F, M, 20 + k));
  Spectrogram x = test::random_spectrogram(N, F, 1, 40);
  const FeatureTensor t = type_i_features(x, s[1], s[2], s[3], s[4], s[5]);
  REQUIRE(t.width == 6 * F);
  REQUIRE(t.frames == N);
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t f = 0; f < F; ++f) {
      CHECK(t(n, f) == doctest::Approx(std::abs(x(n, f, 0))));
      double acc = 0.0;
      for (std::size_t m = 0; m < M; ++m) acc += std::norm(s[5](n, f, m));
      CHECK(t(n, 5 * F + f) == doctest::Approx(std::sqrt(acc / M)));
    }
  }

  // Identical channels reduce to the single-channel magnitude.
  Spectrogram same(N, F, 3);
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t f = 0; f < F; ++f) {
      for (std::size_t m = 0; m < 3; ++m) same(n, f, m) = x(n, f, 0);
    }
  }
  const auto mag = channel_magnitude(same);
  for (std::size_t i = 0; i < N * F; ++i) CHECK(mag[i] == doctest::Approx(std::abs(x.raw()[i])));

  PsdSet v;
  for (std::size_t c = 0; c < kNumSources; ++c) v[c].assign(N * F, c == 1 ? 4.0 : 0.0);
  const FeatureTensor t2 = type_ii_features(v, N, F);
  REQUIRE(t2.width == 4 * F);
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t j = 0; j < 4 * F; ++j) CHECK(t2(n, j) == (j >= F && j < 2 * F ? 2.0 : 0.0));
  }
  const FeatureTensor cat = concat_features(t, t2);
  REQUIRE(cat.width == 10 * F);
  CHECK(cat(2, 6 * F + F) == 2.0);
  CHECK(cat(2, 4) == t(2, 4));
  CHECK(cat.to_tensor().dims == std::vector<std::uint32_t>{static_cast<std::uint32_t>(N), static_cast<std::uint32_t>(10 * F)});

  CHECK_THROWS_AS(type_i_features(x, s[1], s[2], s[3], s[4], test::random_spectrogram(N + 1, F, M, 1)), InvalidInput);
  const FeatureTensor z = type_i_features(x.zeros_like(), s[1].zeros_like(), s[1].zeros_like(), s[1].zeros_like(),
                                          s[1].zeros_like(), s[1].zeros_like());
  for (double val : z.values) CHECK(val == 0.0);
}

TEST_CASE("latent components sum to the residual") {
  const Scene scene = synth_scene(test::short_scene_config(8));
  const SceneSpectra truth = SceneSpectra::analyze(scene, WindowSpec::hann(512, 128));
  const std::size_t F = truth.d.bins(), M = truth.d.channels();
  std::mt19937_64 rng(9);
  std::normal_distribution<double> g(0.0, 0.1);
  EchoFilter h(F, 3, M);
  DereverbFilter G(F, 2, M, 2);
  for (std::size_t f = 0; f < F; ++f) {
    CVecX a(static_cast<Eigen::Index>(3 * M)), b(static_cast<Eigen::Index>(2 * M * M));
    for (auto& v : a) v = {g(rng), g(rng)};
    for (auto& v : b) v = {g(rng), g(rng)};
    h.set_stacked(f, a);
    G.set_stacked(f, b);
  }
  for (SignalPath path : {SignalPath::cascaded, SignalPath::parallel, SignalPath::echo_only}) {
    const LatentComponents lat = latent_components(truth, h, G, path);
    const Spectrogram e = apply_echo_canceller(truth.d, truth.x, h).e;
    Spectrogram r = path == SignalPath::cascaded   ? apply_dereverb(e, G).r
                    : path == SignalPath::parallel ? e - apply_dereverb(truth.d, G).e_hat
                                                   : e;
    const Spectrogram sum = lat.s_e + lat.s_r + lat.z_r + lat.b_r;
    CHECK(test::max_abs_diff(sum, r) < 1e-9 * test::max_abs(r));
  }

  const PsdSet v = oracle_psds(latent_components(truth, h, G, SignalPath::cascaded));
  for (const auto& c : v) {
    CHECK(c.size() == truth.d.frames() * F);
    for (double x : c) CHECK(x >= 0.0);
  }
}

TEST_CASE("ground-truth target pipeline") {
  const Scene scene = synth_scene(test::short_scene_config(4));
  const SceneSpectra truth = SceneSpectra::analyze(scene, WindowSpec::hann(512, 128));
  const std::size_t N = truth.d.frames(), F = truth.d.bins();

  // Zero filters reproduce s_l, y, b.
  const LatentComponents lat0 =
      latent_components(truth, EchoFilter(F, 4, 3), DereverbFilter(F, 3, 3, 2), SignalPath::cascaded);
  CHECK(test::max_abs_diff(lat0.s_r, truth.s_l) == 0.0);
  CHECK(test::max_abs_diff(lat0.z_r, truth.y) == 0.0);
  CHECK(test::max_abs_diff(lat0.b_r, truth.b) == 0.0);

  TargetConfig cfg;
  cfg.echo_taps = 4;
  cfg.dereverb_taps = 3;
  cfg.delay = 2;
  const TargetResult res = ground_truth_target_pipeline(truth, cfg);
  REQUIRE(res.z_r_energy.size() == 4);
  CHECK(res.z_r_energy[0] == doctest::Approx(truth.y.energy()));
  for (std::size_t i = 1; i < res.z_r_energy.size(); ++i) CHECK(res.z_r_energy[i] <= res.z_r_energy[i - 1]);

  const FeatureTensor t = target_tensor(res.v, N, F);
  REQUIRE(t.width == 4 * F);
  for (std::size_t c = 0; c < 4; ++c) {
    for (std::size_t n = 0; n < N; n += 7) {
      for (std::size_t f = 0; f < F; f += 13) CHECK(t(n, c * F + f) == doctest::Approx(std::sqrt(res.v[c][n * F + f])));
    }
  }
  cfg.iterations = 0;
  CHECK_THROWS_AS(ground_truth_target_pipeline(truth, cfg), InvalidInput);
}

TEST_CASE("psd providers") {
  const Scene scene = synth_scene(test::short_scene_config(6));
  auto truth = std::make_shared<const SceneSpectra>(SceneSpectra::analyze(scene, WindowSpec::hann(512, 128)));
  const std::size_t N = truth->d.frames(), F = truth->d.bins(), M = truth->d.channels();
  const EchoFilter h(F, 2, M);
  const DereverbFilter g(F, 2, M, 2);
  const Spectrogram y_hat = truth->d.zeros_like(), e = truth->d, e_hat = truth->d.zeros_like(), r = truth->d;
  ProviderContext ctx{&truth->x, &truth->d, &y_hat, &e, &e_hat, &r, &h, &g, nullptr, 0, SignalPath::cascaded};

  SourceStats stats(N, F, M);
  OraclePsdProvider oracle(truth);
  oracle.update(stats, ctx);
  CHECK(stats.psd(Source::z_r) == oracle_psd(truth->y));
  CHECK(stats.psd(Source::s_e) == oracle_psd(truth->s_e));

  UnconstrainedPsdProvider unc;
  unc.update(stats, ctx);
  CHECK(stats.psd(Source::s_e) == oracle_psd(r));
  PsdSet v;
  for (std::size_t c = 0; c < kNumSources; ++c) v[c].assign(N * F, static_cast<double>(c) + 1.0);
  ctx.v_unc = &v;
  unc.update(stats, ctx);
  CHECK(stats.psd(Source::b_r)[3] == 4.0);
  ctx.path = SignalPath::echo_only;
  unc.update(stats, ctx);
  CHECK(stats.psd(Source::s_r)[3] == 0.0);
  ctx.path = SignalPath::cascaded;

  // Weight directory: nn0 on type-I, nn1 on type-I + type-II; later iterations reuse nn1.
  const auto dir = temp_dir("providers");
  LstmWeights w0 = LstmWeights::zeros(6 * F, 2, 4 * F);
  LstmWeights w1 = LstmWeights::zeros(10 * F, 2, 4 * F);
  w0.head_b.setConstant(1.0);
  w1.head_b.setConstant(3.0);
  write_archive(dir / "nn0.nnjt", w0.to_archive());
  write_archive(dir / "nn1.nnjt", w1.to_archive());
  LstmPsdProvider nn(dir);
  CHECK(&nn.weights_for(5) == &nn.weights_for(1));
  ctx.iteration = 0;
  nn.update(stats, ctx);
  CHECK(stats.psd(Source::s_e)[0] == 1.0);
  ctx.iteration = 2;
  nn.update(stats, ctx);
  CHECK(stats.psd(Source::b_r)[5] == 9.0);

  LstmWeights wrong = LstmWeights::zeros(6 * F, 2, 3);
  write_archive(dir / "wrong.nnjt", wrong.to_archive());
  LstmPsdProvider bad(dir / "wrong.nnjt");
  ctx.iteration = 0;
  CHECK_THROWS_AS(bad.update(stats, ctx), InvalidInput);
  CHECK_THROWS_AS(LstmPsdProvider(dir / "absent.nnjt"), IoError);
  std::filesystem::remove_all(dir);

  ProviderContext empty;
  CHECK_THROWS_AS(unc.update(stats, empty), InvalidInput);
}
