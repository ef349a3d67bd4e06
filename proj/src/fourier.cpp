#include "deblur/fourier.hpp"

#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

namespace deblur {

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

// Iterative radix-2 Cooley-Tukey on a strided complex sequence.
void fft_strided(std::complex<double>* data, int n, Eigen::Index stride,
                 bool inverse) {
  // bit reversal
  for (int i = 1, j = 0; i < n; ++i) {
    int bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(data[i * stride], data[j * stride]);
  }
  for (int len = 2; len <= n; len <<= 1) {
    const double ang = (inverse ? 2.0 : -2.0) * kPi / len;
    const std::complex<double> wlen(std::cos(ang), std::sin(ang));
    for (int i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (int j = 0; j < len / 2; ++j) {
        std::complex<double> u = data[(i + j) * stride];
        std::complex<double> v = data[(i + j + len / 2) * stride] * w;
        data[(i + j) * stride] = u + v;
        data[(i + j + len / 2) * stride] = u - v;
        w *= wlen;
      }
    }
  }
}

}  // namespace

NudftPlan make_nudft_plan(const PointList& points, int H, int W) {
  const Eigen::Index m_count = points.rows();
  for (Eigen::Index m = 0; m < m_count; ++m) {
    if (points(m, 0) < -kPi - 1e-12 || points(m, 0) >= kPi + 1e-12 ||
        points(m, 1) < -kPi - 1e-12 || points(m, 1) >= kPi + 1e-12)
      throw std::invalid_argument("nudft: k-space coordinate outside [-pi, pi)");
  }
  NudftPlan plan;
  plan.H = H;
  plan.W = W;
  plan.Fx.resize(W, m_count);
  plan.Fy.resize(H, m_count);
  const int cx = W / 2, cy = H / 2;
  for (Eigen::Index m = 0; m < m_count; ++m) {
    const double kx = points(m, 0), ky = points(m, 1);
    for (int x = 0; x < W; ++x)
      plan.Fx(x, m) = std::polar(1.0, -kx * (x - cx));
    for (int y = 0; y < H; ++y)
      plan.Fy(y, m) = std::polar(1.0, -ky * (y - cy));
  }
  return plan;
}

VectorXcd NudftPlan::forward(const MatrixXcd& image) const {
  if (image.rows() != H || image.cols() != W)
    throw std::invalid_argument("nudft forward: image shape mismatch");
  MatrixXcd t = image * Fx;                       // H x M
  return (Fy.array() * t.array()).colwise().sum();
}

MatrixXcd NudftPlan::adjoint(const VectorXcd& samples) const {
  if (samples.size() != Fx.cols())
    throw std::invalid_argument("nudft adjoint: sample count mismatch");
  MatrixXcd g = Fy.conjugate();                   // H x M
  g = g.array().rowwise() * samples.transpose().array();
  return g * Fx.adjoint();                        // H x W
}

VectorXcd nudft_forward(const MatrixXcd& image, const PointList& points) {
  return make_nudft_plan(points, static_cast<int>(image.rows()),
                         static_cast<int>(image.cols()))
      .forward(image);
}

MatrixXcd nudft_adjoint(const VectorXcd& samples, const PointList& points,
                        int H, int W) {
  return make_nudft_plan(points, H, W).adjoint(samples);
}

void fft2_unitary(MatrixXcd& x, bool inverse) {
  const int H = static_cast<int>(x.rows()), W = static_cast<int>(x.cols());
  if (!is_pow2(H) || !is_pow2(W))
    throw std::invalid_argument("fft2_unitary: extents must be powers of two");
  for (int c = 0; c < W; ++c) fft_strided(x.data() + static_cast<Eigen::Index>(c) * H, H, 1, inverse);
  for (int r = 0; r < H; ++r) fft_strided(x.data() + r, W, H, inverse);
  x *= 1.0 / std::sqrt(static_cast<double>(H) * W);
}

Eigen::Index mask_count(const Mask& mask) {
  Eigen::Index n = 0;
  for (Eigen::Index j = 0; j < mask.cols(); ++j)
    for (Eigen::Index i = 0; i < mask.rows(); ++i)
      if (mask(i, j)) ++n;
  return n;
}

VectorXcd masked_fft_forward(const MatrixXcd& image, const Mask& mask) {
  if (image.rows() != mask.rows() || image.cols() != mask.cols())
    throw std::invalid_argument("masked_fft_forward: mask shape mismatch");
  MatrixXcd k = image;
  fft2_unitary(k, false);
  VectorXcd out(mask_count(mask));
  Eigen::Index n = 0;
  for (Eigen::Index j = 0; j < mask.cols(); ++j)
    for (Eigen::Index i = 0; i < mask.rows(); ++i)
      if (mask(i, j)) out[n++] = k(i, j);
  return out;
}

MatrixXcd masked_fft_adjoint(const VectorXcd& samples, const Mask& mask) {
  if (samples.size() != mask_count(mask))
    throw std::invalid_argument("masked_fft_adjoint: sample count mismatch");
  MatrixXcd k = MatrixXcd::Zero(mask.rows(), mask.cols());
  Eigen::Index n = 0;
  for (Eigen::Index j = 0; j < mask.cols(); ++j)
    for (Eigen::Index i = 0; i < mask.rows(); ++i)
      if (mask(i, j)) k(i, j) = samples[n++];
  fft2_unitary(k, true);
  return k;
}

}  // namespace deblur
