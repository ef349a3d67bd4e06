#include "deblur/generators.hpp"
#include "deblur/rng.hpp"

#include <doctest.h>

#include <cmath>

using namespace deblur;

namespace {

MatrixXcd random_factors(int np, int r, uint64_t seed) {
  Rng rng(seed);
  MatrixXcd U(np, r);
  for (int j = 0; j < r; ++j)
    for (int p = 0; p < np; ++p)
      U(p, j) = std::complex<double>(rng.gaussian(), rng.gaussian());
  return U;
}

// set layer weights so the net is the identity map (center tap 1 on the
// diagonal), biases zero; relu kept linear by feeding positive data later
void make_identity(GeneratorNet& net) {
  for (auto& layer : net.layers) {
    layer.weights.data.setZero();
    layer.bias.data.setZero();
    const auto& s = layer.weights.shape;
    const int Cout = s[0], Cin = s[1];
    if (layer.weights.ndim() == 4) {
      const int k = s[3];
      for (int c = 0; c < std::min(Cout, Cin); ++c)
        layer.weights[((static_cast<Eigen::Index>(c) * Cin + c) * k + k / 2) *
                          k + k / 2] = 1.0;
    } else {
      const int k = s[2];
      for (int c = 0; c < std::min(Cout, Cin); ++c)
        layer.weights[(static_cast<Eigen::Index>(c) * Cin + c) * k + k / 2] =
            1.0;
    }
  }
}

}  // namespace

TEST_CASE("factor channel packing round-trips") {
  const int H = 6, W = 5, r = 3;
  MatrixXcd U = random_factors(H * W, r, 1);
  ad::Tensor t = complex_to_channels(U, H, W);
  REQUIRE(t.shape == std::vector<int>{2 * r, H, W});
  MatrixXcd back = channels_to_complex(t);
  CHECK((back - U).lpNorm<Eigen::Infinity>() == 0.0);
  // channel pair (0,1) holds real/imag of column 0 with p = x*H + y
  CHECK(t.at3(0, 2, 3) == U(3 * H + 2, 0).real());
  CHECK(t.at3(1, 2, 3) == U(3 * H + 2, 0).imag());
}

TEST_CASE("latent tensor packing round-trips") {
  Rng rng(2);
  MatrixXd Z(3, 7);
  for (int i = 0; i < Z.size(); ++i) Z(i) = rng.gaussian();
  ad::Tensor t = tensor_from_latents(Z);
  REQUIRE(t.shape == std::vector<int>{3, 7});
  CHECK((latents_from_tensor(t) - Z).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("network shapes follow the stated architecture") {
  GeneratorNet sp = make_spatial_net(4, 3);
  REQUIRE(sp.layers.size() == 4);
  for (const auto& l : sp.layers) {
    CHECK(l.weights.shape == std::vector<int>{8, 8, 3, 3});
    CHECK(l.bias.shape == std::vector<int>{8});
  }
  GeneratorNet tp = make_temporal_net(2, 5, 9, 3);
  REQUIRE(tp.layers.size() == 4);
  CHECK(tp.layers[0].weights.shape == std::vector<int>{9, 2, 3});
  CHECK(tp.layers[1].weights.shape == std::vector<int>{9, 9, 3});
  CHECK(tp.layers[3].weights.shape == std::vector<int>{5, 9, 3});
  sp.validate();
  tp.validate();
}

TEST_CASE("identity spatial net reproduces nonnegative inputs") {
  // positive channel data passes through all three interior relus untouched
  const int H = 5, W = 4, r = 2;
  MatrixXcd U = random_factors(H * W, r, 3);
  U = U.cwiseAbs().cast<std::complex<double>>();  // nonnegative re, zero im
  GeneratorNet net = make_spatial_net(r, 3);
  make_identity(net);
  SpatialSeed seed = seed_from_factors(U, H, W);
  MatrixXcd out = spatial_forward(net, seed);
  CHECK((out - U).lpNorm<Eigen::Infinity>() < 1e-13);
}

TEST_CASE("identity temporal net reproduces nonnegative latents") {
  const int d = 3, nf = 9;
  Rng rng(4);
  MatrixXd Z(d, nf);
  for (int i = 0; i < Z.size(); ++i) Z(i) = std::abs(rng.gaussian());
  GeneratorNet net = make_temporal_net(d, d, d, 3);
  make_identity(net);
  MatrixXd V = temporal_forward(net, Z);
  REQUIRE(V.rows() == nf);
  REQUIRE(V.cols() == d);
  CHECK((V - Z.transpose()).lpNorm<Eigen::Infinity>() < 1e-13);
}

TEST_CASE("zeroed net outputs only its final bias") {
  GeneratorNet net = make_temporal_net(2, 3, 4, 3);
  for (auto& l : net.layers) {
    l.weights.data.setZero();
    l.bias.data.setZero();
  }
  net.layers.back().bias.data << 0.5, -1.0, 2.0;
  MatrixXd Z = MatrixXd::Random(2, 6);
  MatrixXd V = temporal_forward(net, Z);
  for (int i = 0; i < 6; ++i) {
    CHECK(V(i, 0) == 0.5);
    CHECK(V(i, 1) == -1.0);
    CHECK(V(i, 2) == 2.0);
  }
}

TEST_CASE("weight initialization is deterministic and fan-in bounded") {
  GeneratorNet a = make_spatial_net(3, 3);
  GeneratorNet b = make_spatial_net(3, 3);
  randomize_net(a, 11);
  randomize_net(b, 11);
  for (size_t l = 0; l < a.layers.size(); ++l) {
    CHECK((a.layers[l].weights.data - b.layers[l].weights.data).norm() == 0.0);
    CHECK(a.layers[l].bias.data.norm() == 0.0);
    const double bound =
        1.0 / std::sqrt(double(a.layers[l].weights.shape[1]) * 3 * 3);
    CHECK(a.layers[l].weights.data.lpNorm<Eigen::Infinity>() <= bound);
  }
  GeneratorNet c = make_spatial_net(3, 3);
  randomize_net(c, 12);
  CHECK((a.layers[0].weights.data - c.layers[0].weights.data).norm() > 0.0);
}

TEST_CASE("soft threshold oracle values") {
  CHECK(soft_threshold(3.0, 1.0) == 2.0);
  CHECK(soft_threshold(-3.0, 1.0) == -2.0);
  CHECK(soft_threshold(0.5, 1.0) == 0.0);
  CHECK(soft_threshold(-0.5, 1.0) == 0.0);
  CHECK(soft_threshold(2.0, 0.0) == 2.0);
}

TEST_CASE("network soft threshold with zero tau is the identity") {
  GeneratorNet net = make_temporal_net(2, 3, 4, 3);
  randomize_net(net, 5);
  GeneratorNet copy = net;
  soft_threshold_net(net, 0.0);
  for (size_t l = 0; l < net.layers.size(); ++l)
    CHECK((net.layers[l].weights.data - copy.layers[l].weights.data).norm() ==
          0.0);
}

TEST_CASE("network soft threshold shrinks the l1 norm by tau per survivor") {
  GeneratorNet net = make_temporal_net(2, 3, 4, 3);
  randomize_net(net, 6);
  const double before = l1_weight_norm(net);
  const double tau = 1e-3;
  soft_threshold_net(net, tau);
  const double after = l1_weight_norm(net);
  CHECK(after < before);
  // each coefficient moves toward zero by at most tau
  Eigen::Index n_coeff = 0;
  for (const auto& l : net.layers)
    n_coeff += l.weights.size() + l.bias.size();
  CHECK(before - after <= tau * n_coeff + 1e-12);
  // large tau kills everything
  soft_threshold_net(net, 1e9);
  CHECK(zero_weight_fraction(net) == 1.0);
  CHECK(l1_weight_norm(net, false) == 0.0);
}

TEST_CASE("l1 norm with and without biases") {
  GeneratorNet net = make_temporal_net(2, 2, 2, 3);
  for (auto& l : net.layers) {
    l.weights.data.setConstant(1.0);
    l.bias.data.setConstant(2.0);
  }
  const double w_only = l1_weight_norm(net, false);
  const double with_b = l1_weight_norm(net, true);
  double expect_w = 0.0, expect_b = 0.0;
  for (const auto& l : net.layers) {
    expect_w += l.weights.data.size();
    expect_b += 2.0 * l.bias.data.size();
  }
  CHECK(w_only == expect_w);
  CHECK(with_b == expect_w + expect_b);
}

TEST_CASE("graph evaluation gradients match finite differences end to end") {
  const int d = 2, r = 3, nf = 6;
  GeneratorNet net = make_temporal_net(d, r, 4, 3);
  randomize_net(net, 7);
  Rng rng(8);
  MatrixXd Z(d, nf);
  for (int i = 0; i < Z.size(); ++i) Z(i) = rng.gaussian();

  auto objective = [&](const GeneratorNet& n, const MatrixXd& z) {
    MatrixXd V = temporal_forward(n, z);
    return 0.5 * V.squaredNorm();
  };

  NetEval ev = forward_eval(net, tensor_from_latents(Z));
  ad::Tensor seedg = ev.out();
  ev.graph.backward(ev.output, seedg);
  auto grads = ev.parameter_gradients();
  ad::Tensor zg = ev.input_gradient();

  const double h = 1e-6;
  for (size_t l = 0; l < net.layers.size(); ++l) {
    Rng pick(10 + l);
    Eigen::Index i = pick.below(net.layers[l].weights.size());
    GeneratorNet np = net;
    np.layers[l].weights[i] += h;
    const double fp = objective(np, Z);
    np.layers[l].weights[i] -= 2 * h;
    const double fm = objective(np, Z);
    CHECK(grads[l].weights[i] ==
          doctest::Approx((fp - fm) / (2 * h)).epsilon(1e-4));
  }
  MatrixXd zp = Z;
  zp(1, 2) += h;
  const double fp = objective(net, zp);
  zp(1, 2) -= 2 * h;
  const double fm = objective(net, zp);
  CHECK(latents_from_tensor(zg)(1, 2) ==
        doctest::Approx((fp - fm) / (2 * h)).epsilon(1e-4));
}
