#include "deblur/graph.hpp"
#include "deblur/rng.hpp"

#include <doctest.h>

#include <cmath>

using namespace deblur;
using ad::Tensor;

namespace {

Tensor random_tensor(std::vector<int> shape, uint64_t seed) {
  Tensor t(std::move(shape));
  Rng rng(seed);
  for (Eigen::Index i = 0; i < t.size(); ++i) t[i] = rng.gaussian();
  return t;
}

// independent reference convolution, zero "same" padding
Tensor conv2d_naive(const Tensor& x, const Tensor& w, const Tensor& b) {
  const int Cin = x.shape[0], H = x.shape[1], W = x.shape[2];
  const int Cout = w.shape[0], k = w.shape[3], half = k / 2;
  Tensor out({Cout, H, W});
  for (int co = 0; co < Cout; ++co)
    for (int y = 0; y < H; ++y)
      for (int xx = 0; xx < W; ++xx) {
        double acc = b[co];
        for (int ci = 0; ci < Cin; ++ci)
          for (int dy = 0; dy < k; ++dy)
            for (int dx = 0; dx < k; ++dx) {
              const int sy = y + dy - half, sx = xx + dx - half;
              if (sy < 0 || sy >= H || sx < 0 || sx >= W) continue;
              acc += x.at3(ci, sy, sx) *
                     w[((static_cast<Eigen::Index>(co) * Cin + ci) * k + dy) *
                           k + dx];
            }
        out.at3(co, y, xx) = acc;
      }
  return out;
}

Tensor conv1d_naive(const Tensor& x, const Tensor& w, const Tensor& b) {
  const int Cin = x.shape[0], L = x.shape[1];
  const int Cout = w.shape[0], k = w.shape[2], half = k / 2;
  Tensor out({Cout, L});
  for (int co = 0; co < Cout; ++co)
    for (int i = 0; i < L; ++i) {
      double acc = b[co];
      for (int ci = 0; ci < Cin; ++ci)
        for (int d = 0; d < k; ++d) {
          const int s = i + d - half;
          if (s < 0 || s >= L) continue;
          acc += x.at2(ci, s) *
                 w[(static_cast<Eigen::Index>(co) * Cin + ci) * k + d];
        }
      out.at2(co, i) = acc;
    }
  return out;
}

// scalar objective 0.5*||f(inputs)||^2; finite-difference check of one input
double half_sqnorm_2d(const Tensor& x, const Tensor& w, const Tensor& b) {
  ad::Graph g;
  auto out = g.conv2d(g.input(x), g.input(w), g.input(b));
  return 0.5 * g.value(out).data.squaredNorm();
}

}  // namespace

TEST_CASE("conv2d forward matches the direct convolution") {
  Tensor x = random_tensor({3, 5, 7}, 10);
  Tensor w = random_tensor({4, 3, 3, 3}, 11);
  Tensor b = random_tensor({4}, 12);
  ad::Graph g;
  auto out = g.conv2d(g.input(x), g.input(w), g.input(b));
  Tensor ref = conv2d_naive(x, w, b);
  CHECK((g.value(out).data - ref.data).lpNorm<Eigen::Infinity>() < 1e-12);
}

TEST_CASE("conv1d forward matches the direct convolution") {
  Tensor x = random_tensor({2, 9}, 20);
  Tensor w = random_tensor({5, 2, 3}, 21);
  Tensor b = random_tensor({5}, 22);
  ad::Graph g;
  auto out = g.conv1d(g.input(x), g.input(w), g.input(b));
  Tensor ref = conv1d_naive(x, w, b);
  CHECK((g.value(out).data - ref.data).lpNorm<Eigen::Infinity>() < 1e-12);
}

TEST_CASE("conv2d gradients pass finite differences") {
  Tensor x = random_tensor({2, 4, 4}, 30);
  Tensor w = random_tensor({3, 2, 3, 3}, 31);
  Tensor b = random_tensor({3}, 32);

  ad::Graph g;
  auto xi = g.input(x), wi = g.input(w), bi = g.input(b);
  auto out = g.conv2d(xi, wi, bi);
  Tensor seed = g.value(out);
  g.backward(out, seed);  // d(0.5||y||^2)/dy = y

  const double h = 1e-6;
  auto fd_check = [&](const Tensor& base, ad::NodeId node, int which) {
    const Tensor& grad = g.adjoint(node);
    Rng pick(40 + which);
    for (int trial = 0; trial < 8; ++trial) {
      Eigen::Index i = pick.below(base.size());
      Tensor xp = x, wp = w, bp = b;
      Tensor* slot = which == 0 ? &xp : which == 1 ? &wp : &bp;
      (*slot)[i] += h;
      const double fp = half_sqnorm_2d(xp, wp, bp);
      (*slot)[i] -= 2 * h;
      const double fm = half_sqnorm_2d(xp, wp, bp);
      const double fd = (fp - fm) / (2 * h);
      CHECK(grad[i] == doctest::Approx(fd).epsilon(1e-5));
    }
  };
  fd_check(x, xi, 0);
  fd_check(w, wi, 1);
  fd_check(b, bi, 2);
}

TEST_CASE("conv2d backward is the adjoint of the bias-free forward map") {
  // <g, conv(x)> == <x, grad_x> when bias is zero and grads seeded with g
  Tensor x = random_tensor({3, 6, 5}, 50);
  Tensor w = random_tensor({2, 3, 3, 3}, 51);
  Tensor b({2});
  ad::Graph g;
  auto xi = g.input(x);
  auto out = g.conv2d(xi, g.input(w), g.input(b));
  Tensor gout = random_tensor(g.value(out).shape, 52);
  g.backward(out, gout);
  const double lhs = gout.data.dot(g.value(out).data);
  const double rhs = x.data.dot(g.adjoint(xi).data);
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}

TEST_CASE("relu forward and subgradient") {
  Tensor x({1, 5});
  x.data << -2.0, -0.5, 0.0, 0.5, 2.0;
  ad::Graph g;
  auto xi = g.input(x);
  auto out = g.relu(xi);
  CHECK(g.value(out).data[0] == 0.0);
  CHECK(g.value(out).data[2] == 0.0);
  CHECK(g.value(out).data[4] == 2.0);
  Tensor seed({1, 5});
  seed.data.setOnes();
  g.backward(out, seed);
  // subgradient at exactly zero is zero
  CHECK(g.adjoint(xi).data[0] == 0.0);
  CHECK(g.adjoint(xi).data[2] == 0.0);
  CHECK(g.adjoint(xi).data[3] == 1.0);
}

TEST_CASE("linear_combine forward and gradient scaling") {
  Tensor x = random_tensor({2, 3}, 60);
  Tensor y = random_tensor({2, 3}, 61);
  ad::Graph g;
  auto xi = g.input(x), yi = g.input(y);
  auto out = g.linear_combine(2.0, xi, -3.0, yi);
  CHECK((g.value(out).data - (2.0 * x.data - 3.0 * y.data)).norm() < 1e-14);
  Tensor seed = random_tensor({2, 3}, 62);
  g.backward(out, seed);
  CHECK((g.adjoint(xi).data - 2.0 * seed.data).norm() < 1e-14);
  CHECK((g.adjoint(yi).data + 3.0 * seed.data).norm() < 1e-14);
}

TEST_CASE("gradients accumulate when a node feeds two consumers") {
  Tensor x = random_tensor({1, 4}, 70);
  ad::Graph g;
  auto xi = g.input(x);
  auto out = g.linear_combine(1.0, xi, 1.0, xi);  // 2x
  Tensor seed({1, 4});
  seed.data.setOnes();
  g.backward(out, seed);
  CHECK((g.adjoint(xi).data.array() - 2.0).abs().maxCoeff() < 1e-14);
}

TEST_CASE("chained conv-relu-conv gradient passes finite differences") {
  Tensor x = random_tensor({2, 4, 4}, 80);
  Tensor w1 = random_tensor({3, 2, 3, 3}, 81);
  Tensor b1 = random_tensor({3}, 82);
  Tensor w2 = random_tensor({2, 3, 3, 3}, 83);
  Tensor b2 = random_tensor({2}, 84);

  auto objective = [&](const Tensor& w1v) {
    ad::Graph g;
    auto h1 = g.relu(g.conv2d(g.input(x), g.input(w1v), g.input(b1)));
    auto out = g.conv2d(h1, g.input(w2), g.input(b2));
    return 0.5 * g.value(out).data.squaredNorm();
  };

  ad::Graph g;
  auto w1i = g.input(w1);
  auto h1 = g.relu(g.conv2d(g.input(x), w1i, g.input(b1)));
  auto out = g.conv2d(h1, g.input(w2), g.input(b2));
  g.backward(out, g.value(out));

  const double h = 1e-6;
  Rng pick(85);
  for (int trial = 0; trial < 10; ++trial) {
    Eigen::Index i = pick.below(w1.size());
    Tensor wp = w1;
    wp[i] += h;
    const double fp = objective(wp);
    wp[i] -= 2 * h;
    const double fm = objective(wp);
    CHECK(g.adjoint(w1i)[i] ==
          doctest::Approx((fp - fm) / (2 * h)).epsilon(1e-5));
  }
}

TEST_CASE("conv1d gradient passes finite differences") {
  Tensor x = random_tensor({2, 8}, 90);
  Tensor w = random_tensor({3, 2, 3}, 91);
  Tensor b = random_tensor({3}, 92);

  auto objective = [&](const Tensor& xv, const Tensor& wv) {
    ad::Graph g;
    auto out = g.conv1d(g.input(xv), g.input(wv), g.input(b));
    return 0.5 * g.value(out).data.squaredNorm();
  };

  ad::Graph g;
  auto xi = g.input(x), wi = g.input(w);
  auto out = g.conv1d(xi, wi, g.input(b));
  g.backward(out, g.value(out));

  const double h = 1e-6;
  Rng pick(93);
  for (int trial = 0; trial < 6; ++trial) {
    Eigen::Index i = pick.below(x.size());
    Tensor xp = x;
    xp[i] += h;
    const double fp = objective(xp, w);
    xp[i] -= 2 * h;
    const double fm = objective(xp, w);
    CHECK(g.adjoint(xi)[i] ==
          doctest::Approx((fp - fm) / (2 * h)).epsilon(1e-5));

    Eigen::Index jw = pick.below(w.size());
    Tensor wp = w;
    wp[jw] += h;
    const double gp = objective(x, wp);
    wp[jw] -= 2 * h;
    const double gm = objective(x, wp);
    CHECK(g.adjoint(wi)[jw] ==
          doctest::Approx((gp - gm) / (2 * h)).epsilon(1e-5));
  }
}
