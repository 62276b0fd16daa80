#include <algorithm>
#include <cmath>

#include "jse/spectral.hpp"

namespace jse {

namespace {

constexpr std::array<const char*, 4> kGates = {"i", "f", "c", "o"};

std::string layer_name(std::size_t layer, const char* kind, const char* gate) {
  return "lstm" + std::to_string(layer + 1) + "." + kind + "_" + gate;
}

Eigen::MatrixXd matrix_from(const Tensor& t, std::size_t rows, std::size_t cols, const std::string& name) {
  if (t.dims.size() != 2 || t.dims[0] != rows || t.dims[1] != cols) {
    throw InvalidInput("LSTM weight '" + name + "' has shape mismatch, expected [" + std::to_string(rows) + ", " +
                       std::to_string(cols) + "]");
  }
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = t.data[r * cols + c];
  }
  if (!m.allFinite()) throw InvalidInput("LSTM weight '" + name + "' is not finite");
  return m;
}

Eigen::VectorXd vector_from(const Tensor& t, std::size_t size, const std::string& name) {
  if (t.dims.size() != 1 || t.dims[0] != size) {
    throw InvalidInput("LSTM weight '" + name + "' has shape mismatch, expected [" + std::to_string(size) + "]");
  }
  Eigen::VectorXd v(static_cast<Eigen::Index>(size));
  for (std::size_t i = 0; i < size; ++i) v(static_cast<Eigen::Index>(i)) = t.data[i];
  if (!v.allFinite()) throw InvalidInput("LSTM weight '" + name + "' is not finite");
  return v;
}

Tensor tensor_from(const Eigen::MatrixXd& m) {
  Tensor t;
  t.dims = {static_cast<std::uint32_t>(m.rows()), static_cast<std::uint32_t>(m.cols())};
  t.data.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) t.data.push_back(static_cast<float>(m(r, c)));
  }
  return t;
}

Tensor tensor_from(const Eigen::VectorXd& v) {
  Tensor t;
  t.dims = {static_cast<std::uint32_t>(v.size())};
  for (Eigen::Index i = 0; i < v.size(); ++i) t.data.push_back(static_cast<float>(v(i)));
  return t;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

LstmWeights LstmWeights::from_archive(const TensorArchive& archive) {
  const Tensor& w0 = find_tensor(archive, "lstm1.W_i");
  if (w0.dims.size() != 2) throw InvalidInput("LSTM weight 'lstm1.W_i' must be 2-D");
  const std::size_t input = w0.dims[0], hidden = w0.dims[1];
  const Tensor& hb = find_tensor(archive, "head.b");
  if (hb.dims.size() != 1) throw InvalidInput("LSTM weight 'head.b' must be 1-D");
  const std::size_t output = hb.dims[0];

  LstmWeights w;
  for (std::size_t l = 0; l < 2; ++l) {
    const std::size_t in = l == 0 ? input : hidden;
    for (std::size_t g = 0; g < 4; ++g) {
      const auto wn = layer_name(l, "W", kGates[g]), un = layer_name(l, "U", kGates[g]),
                 bn = layer_name(l, "b", kGates[g]);
      w.layers[l].W[g] = matrix_from(find_tensor(archive, wn), in, hidden, wn);
      w.layers[l].U[g] = matrix_from(find_tensor(archive, un), hidden, hidden, un);
      w.layers[l].b[g] = vector_from(find_tensor(archive, bn), hidden, bn);
    }
  }
  w.head_W = matrix_from(find_tensor(archive, "head.W"), hidden, output, "head.W");
  w.head_b = vector_from(hb, output, "head.b");
  return w;
}

TensorArchive LstmWeights::to_archive() const {
  TensorArchive out;
  for (std::size_t l = 0; l < 2; ++l) {
    for (std::size_t g = 0; g < 4; ++g) out.emplace_back(layer_name(l, "W", kGates[g]), tensor_from(layers[l].W[g]));
    for (std::size_t g = 0; g < 4; ++g) out.emplace_back(layer_name(l, "U", kGates[g]), tensor_from(layers[l].U[g]));
    for (std::size_t g = 0; g < 4; ++g) out.emplace_back(layer_name(l, "b", kGates[g]), tensor_from(layers[l].b[g]));
  }
  out.emplace_back("head.W", tensor_from(head_W));
  out.emplace_back("head.b", tensor_from(head_b));
  return out;
}

LstmWeights LstmWeights::zeros(std::size_t input, std::size_t hidden, std::size_t output) {
  const auto I = static_cast<Eigen::Index>(input), H = static_cast<Eigen::Index>(hidden),
             O = static_cast<Eigen::Index>(output);
  LstmWeights w;
  for (std::size_t l = 0; l < 2; ++l) {
    for (std::size_t g = 0; g < 4; ++g) {
      w.layers[l].W[g] = Eigen::MatrixXd::Zero(l == 0 ? I : H, H);
      w.layers[l].U[g] = Eigen::MatrixXd::Zero(H, H);
      w.layers[l].b[g] = Eigen::VectorXd::Zero(H);
    }
  }
  w.head_W = Eigen::MatrixXd::Zero(H, O);
  w.head_b = Eigen::VectorXd::Zero(O);
  return w;
}

FeatureTensor lstm_forward(const LstmWeights& weights, const FeatureTensor& features) {
  if (features.width != weights.input_size()) {
    throw InvalidInput("lstm_forward: feature width " + std::to_string(features.width) + " does not match input size " +
                       std::to_string(weights.input_size()));
  }
  const std::size_t N = features.frames, O = weights.output_size();
  const auto H = static_cast<Eigen::Index>(weights.hidden_size());
  FeatureTensor out{N, features.bins, O, std::vector<double>(N * O, 0.0)};

  std::array<Eigen::VectorXd, 2> h, c;
  for (std::size_t l = 0; l < 2; ++l) {
    h[l] = Eigen::VectorXd::Zero(H);
    c[l] = Eigen::VectorXd::Zero(H);
  }
  Eigen::VectorXd in(static_cast<Eigen::Index>(features.width));
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t j = 0; j < features.width; ++j) in(static_cast<Eigen::Index>(j)) = features(n, j);
    Eigen::VectorXd layer_in = in;
    for (std::size_t l = 0; l < 2; ++l) {
      const LstmLayer& L = weights.layers[l];
      std::array<Eigen::VectorXd, 4> pre;
      for (std::size_t g = 0; g < 4; ++g) {
        pre[g] = L.W[g].transpose() * layer_in + L.U[g].transpose() * h[l] + L.b[g];
      }
      for (Eigen::Index k = 0; k < H; ++k) {
        const double ig = sigmoid(pre[0](k)), fg = sigmoid(pre[1](k)), cand = std::tanh(pre[2](k)),
                     og = sigmoid(pre[3](k));
        c[l](k) = fg * c[l](k) + ig * cand;
        h[l](k) = og * std::tanh(c[l](k));
      }
      layer_in = h[l];
    }
    const Eigen::VectorXd y = weights.head_W.transpose() * layer_in + weights.head_b;
    for (std::size_t o = 0; o < O; ++o) out.values[n * O + o] = std::max(0.0, y(static_cast<Eigen::Index>(o)));
  }
  return out;
}

double kl_divergence(const std::vector<double>& target, const std::vector<double>& predicted) {
  if (target.size() != predicted.size()) throw InvalidInput("kl_divergence: size mismatch");
  if (target.empty()) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    const double t = target[i];
    const double p = predicted[i];
    if (t < 0.0 || p < 0.0) throw InvalidInput("kl_divergence: negative input");
    acc += (t > 0.0 ? t * std::log(t / std::max(p, 1e-12)) : 0.0) - t + p;
  }
  return acc / static_cast<double>(target.size());
}

}  // namespace jse
