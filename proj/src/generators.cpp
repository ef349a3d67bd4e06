#include "deblur/generators.hpp"

#include "deblur/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace deblur {

void GeneratorNet::validate() const {
  if (layers.size() != 4)
    throw std::invalid_argument("GeneratorNet: exactly 4 conv layers required");
  const int want_ndim = (kind == NetKind::Spatial2D) ? 4 : 3;
  for (size_t l = 0; l < layers.size(); ++l) {
    const auto& w = layers[l].weights;
    if (w.ndim() != want_ndim)
      throw std::invalid_argument("GeneratorNet: layer weight rank mismatch");
    if (layers[l].bias.ndim() != 1 || layers[l].bias.shape[0] != w.shape[0])
      throw std::invalid_argument("GeneratorNet: bias shape mismatch");
    if (l > 0 && w.shape[1] != layers[l - 1].weights.shape[0])
      throw std::invalid_argument("GeneratorNet: channel chain broken");
  }
  if (kind == NetKind::Spatial2D && in_channels() != out_channels())
    throw std::invalid_argument(
        "GeneratorNet: spatial net must map 2r -> 2r channels");
}

GeneratorNet make_spatial_net(int r, int kernel) {
  GeneratorNet net;
  net.kind = NetKind::Spatial2D;
  const int c = 2 * r;
  for (int l = 0; l < 4; ++l)
    net.layers.push_back(
        {ad::Tensor({c, c, kernel, kernel}), ad::Tensor({c})});
  return net;
}

GeneratorNet make_temporal_net(int d, int r, int hidden, int kernel) {
  GeneratorNet net;
  net.kind = NetKind::Temporal1D;
  const int widths[5] = {d, hidden, hidden, hidden, r};
  for (int l = 0; l < 4; ++l)
    net.layers.push_back(
        {ad::Tensor({widths[l + 1], widths[l], kernel}), ad::Tensor({widths[l + 1]})});
  return net;
}

void randomize_net(GeneratorNet& net, uint64_t seed) {
  Rng rng(Rng::derive(seed, 0x9e7));
  for (auto& layer : net.layers) {
    const auto& s = layer.weights.shape;
    Eigen::Index fan_in = 1;
    for (size_t i = 1; i < s.size(); ++i) fan_in *= s[i];
    const double a = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (Eigen::Index i = 0; i < layer.weights.size(); ++i)
      layer.weights[i] = rng.uniform(-a, a);
    layer.bias.data.setZero();
  }
}

SpatialSeed seed_from_factors(const MatrixXcd& U0, int H, int W) {
  if (U0.rows() != static_cast<Eigen::Index>(H) * W)
    throw std::invalid_argument("seed_from_factors: U0 rows != H*W");
  return SpatialSeed{complex_to_channels(U0, H, W)};
}

ad::Tensor complex_to_channels(const MatrixXcd& U, int H, int W) {
  const int r = static_cast<int>(U.cols());
  ad::Tensor t({2 * r, H, W});
  for (int j = 0; j < r; ++j)
    for (int x = 0; x < W; ++x)
      for (int y = 0; y < H; ++y) {
        const auto u = U(static_cast<Eigen::Index>(x) * H + y, j);
        t.at3(2 * j, y, x) = u.real();
        t.at3(2 * j + 1, y, x) = u.imag();
      }
  return t;
}

MatrixXcd channels_to_complex(const ad::Tensor& t) {
  if (t.ndim() != 3 || t.shape[0] % 2 != 0)
    throw std::invalid_argument("channels_to_complex: need [2r,H,W] tensor");
  const int r = t.shape[0] / 2, H = t.shape[1], W = t.shape[2];
  MatrixXcd U(static_cast<Eigen::Index>(H) * W, r);
  for (int j = 0; j < r; ++j)
    for (int x = 0; x < W; ++x)
      for (int y = 0; y < H; ++y)
        U(static_cast<Eigen::Index>(x) * H + y, j) = {t.at3(2 * j, y, x),
                                                      t.at3(2 * j + 1, y, x)};
  return U;
}

NetEval forward_eval(const GeneratorNet& net, const ad::Tensor& input) {
  net.validate();
  NetEval ev;
  ev.input = ev.graph.input(input);
  ad::NodeId cur = ev.input;
  for (size_t l = 0; l < net.layers.size(); ++l) {
    const ad::NodeId w = ev.graph.input(net.layers[l].weights);
    const ad::NodeId b = ev.graph.input(net.layers[l].bias);
    ev.params.emplace_back(w, b);
    cur = (net.kind == NetKind::Spatial2D) ? ev.graph.conv2d(cur, w, b)
                                           : ev.graph.conv1d(cur, w, b);
    if (l + 1 < net.layers.size()) cur = ev.graph.relu(cur);
  }
  ev.output = cur;
  return ev;
}

std::vector<ConvLayer> NetEval::parameter_gradients() const {
  std::vector<ConvLayer> grads;
  grads.reserve(params.size());
  for (auto [w, b] : params)
    grads.push_back({graph.adjoint(w), graph.adjoint(b)});
  return grads;
}

MatrixXcd spatial_forward(const GeneratorNet& net, const SpatialSeed& seed) {
  if (net.kind != NetKind::Spatial2D)
    throw std::invalid_argument("spatial_forward: net is not spatial-tagged");
  if (net.in_channels() != seed.data.shape[0])
    throw std::invalid_argument("spatial_forward: seed channel mismatch");
  return channels_to_complex(forward_eval(net, seed.data).out());
}

ad::Tensor tensor_from_latents(const MatrixXd& Z) {
  ad::Tensor t({static_cast<int>(Z.rows()), static_cast<int>(Z.cols())});
  for (int c = 0; c < Z.rows(); ++c)
    for (int i = 0; i < Z.cols(); ++i) t.at2(c, i) = Z(c, i);
  return t;
}

MatrixXd latents_from_tensor(const ad::Tensor& t) {
  MatrixXd Z(t.shape[0], t.shape[1]);
  for (int c = 0; c < t.shape[0]; ++c)
    for (int i = 0; i < t.shape[1]; ++i) Z(c, i) = t.at2(c, i);
  return Z;
}

MatrixXd temporal_out_to_V(const ad::Tensor& out) {
  MatrixXd V(out.shape[1], out.shape[0]);  // n_f x r
  for (int j = 0; j < out.shape[0]; ++j)
    for (int i = 0; i < out.shape[1]; ++i) V(i, j) = out.at2(j, i);
  return V;
}

MatrixXd temporal_forward(const GeneratorNet& net, const MatrixXd& Z) {
  if (net.kind != NetKind::Temporal1D)
    throw std::invalid_argument("temporal_forward: net is not temporal-tagged");
  if (net.in_channels() != Z.rows())
    throw std::invalid_argument("temporal_forward: latent dimension mismatch");
  return temporal_out_to_V(forward_eval(net, tensor_from_latents(Z)).out());
}

double l1_weight_norm(const GeneratorNet& net, bool include_bias) {
  double acc = 0.0;
  for (const auto& layer : net.layers) {
    acc += layer.weights.data.cwiseAbs().sum();
    if (include_bias) acc += layer.bias.data.cwiseAbs().sum();
  }
  return acc;
}

double soft_threshold(double w, double tau) {
  if (w > tau) return w - tau;
  if (w < -tau) return w + tau;
  return 0.0;
}

void soft_threshold_net(GeneratorNet& net, double tau, bool include_bias) {
  if (tau <= 0.0) return;
  for (auto& layer : net.layers) {
    for (Eigen::Index i = 0; i < layer.weights.size(); ++i)
      layer.weights[i] = soft_threshold(layer.weights[i], tau);
    if (include_bias)
      for (Eigen::Index i = 0; i < layer.bias.size(); ++i)
        layer.bias[i] = soft_threshold(layer.bias[i], tau);
  }
}

double zero_weight_fraction(const GeneratorNet& net) {
  Eigen::Index zero = 0, total = 0;
  for (const auto& layer : net.layers) {
    total += layer.weights.size();
    for (Eigen::Index i = 0; i < layer.weights.size(); ++i)
      if (layer.weights[i] == 0.0) ++zero;
  }
  return static_cast<double>(zero) / static_cast<double>(total);
}

}  // namespace deblur
