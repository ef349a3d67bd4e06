#pragma once

#include "deblur/graph.hpp"
#include "deblur/fourier.hpp"

#include <cstdint>
#include <vector>

namespace deblur {

enum class NetKind { Spatial2D, Temporal1D };

struct ConvLayer {
  ad::Tensor weights;  // [Cout,Cin,k,k] or [Cout,Cin,k]
  ad::Tensor bias;     // [Cout]
};

// Four conv layers, ReLU after layers 1-3 and none after layer 4 so factors
// can take negative values.
struct GeneratorNet {
  NetKind kind = NetKind::Spatial2D;
  std::vector<ConvLayer> layers;

  int in_channels() const { return layers.front().weights.shape[1]; }
  int out_channels() const { return layers.back().weights.shape[0]; }
  void validate() const;
};

// Spatial net: 2r channels at every layer (real/imag pairs of the r basis
// images). Temporal net: d -> hidden -> hidden -> hidden -> r.
GeneratorNet make_spatial_net(int r, int kernel = 3);
GeneratorNet make_temporal_net(int d, int r, int hidden = 16, int kernel = 3);

// zero-mean uniform weights scaled by 1/sqrt(fan-in), zero biases
void randomize_net(GeneratorNet& net, uint64_t seed);

// The generator input U0: real/imag channel pairs of the initializer's
// spatial factors, arranged as [2r, H, W].
struct SpatialSeed {
  ad::Tensor data;
  int r() const { return data.shape[0] / 2; }
  int H() const { return data.shape[1]; }
  int W() const { return data.shape[2]; }
};

SpatialSeed seed_from_factors(const MatrixXcd& U0, int H, int W);

// channel pair (2j, 2j+1) of a [2r,H,W] tensor -> column u_j, p = x*H + y
MatrixXcd channels_to_complex(const ad::Tensor& t);
ad::Tensor complex_to_channels(const MatrixXcd& U, int H, int W);

// Forward evaluation that keeps the graph alive so gradients can be pulled
// back through it.
struct NetEval {
  ad::Graph graph;
  ad::NodeId input = -1;
  ad::NodeId output = -1;
  std::vector<std::pair<ad::NodeId, ad::NodeId>> params;  // (weights, bias)

  const ad::Tensor& out() const { return graph.value(output); }
  // call after graph.backward(); gradients in layer order
  std::vector<ConvLayer> parameter_gradients() const;
  ad::Tensor input_gradient() const { return graph.adjoint(input); }
};

NetEval forward_eval(const GeneratorNet& net, const ad::Tensor& input);

// U = G_theta(U0): [2r,H,W] -> complex N_pix x r
MatrixXcd spatial_forward(const GeneratorNet& net, const SpatialSeed& seed);
// V = G_phi(Z): Z is d x n_f -> V is n_f x r
MatrixXd temporal_forward(const GeneratorNet& net, const MatrixXd& Z);

ad::Tensor tensor_from_latents(const MatrixXd& Z);      // [d, n_f]
MatrixXd latents_from_tensor(const ad::Tensor& t);
MatrixXd temporal_out_to_V(const ad::Tensor& out);      // [r, n_f] -> n_f x r

// sum of absolute values of all conv weights (and biases unless excluded)
double l1_weight_norm(const GeneratorNet& net, bool include_bias = true);

// elementwise soft threshold: w <- sign(w) * max(|w| - tau, 0)
void soft_threshold_net(GeneratorNet& net, double tau, bool include_bias = true);
double soft_threshold(double w, double tau);

double zero_weight_fraction(const GeneratorNet& net);

}  // namespace deblur
