#pragma once

#include <Eigen/Dense>
#include <cstdint>

namespace deblur {

using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXcd;
using Eigen::VectorXd;
using PointList = Eigen::Matrix<double, Eigen::Dynamic, 2>;
using Mask = Eigen::Matrix<uint8_t, Eigen::Dynamic, Eigen::Dynamic>;

// Direct (exact) non-uniform DFT, factored per point into separable
// x/y phase tables so forward/adjoint reduce to dense GEMMs:
//   b[m] = sum_{y,x} img(y,x) * exp(-i*(kx_m*(x - W/2) + ky_m*(y - H/2)))
// Pixel grid is centered, so the DC sample carries no phase.
struct NudftPlan {
  int H = 0, W = 0;
  MatrixXcd Fx;  // W x M, Fx(x,m) = exp(-i*kx_m*(x - W/2))
  MatrixXcd Fy;  // H x M

  VectorXcd forward(const MatrixXcd& image) const;
  MatrixXcd adjoint(const VectorXcd& samples) const;
};

// points rows are (kx, ky) in radians/pixel, each in [-pi, pi)
NudftPlan make_nudft_plan(const PointList& points, int H, int W);

VectorXcd nudft_forward(const MatrixXcd& image, const PointList& points);
MatrixXcd nudft_adjoint(const VectorXcd& samples, const PointList& points,
                        int H, int W);

// In-place orthonormal 2-D DFT (radix-2; extents must be powers of two).
void fft2_unitary(MatrixXcd& x, bool inverse);

// Orthonormal 2-D DFT followed by mask selection; samples are collected in
// column-major order over the mask. Adjoint = zero-fill + inverse DFT.
VectorXcd masked_fft_forward(const MatrixXcd& image, const Mask& mask);
MatrixXcd masked_fft_adjoint(const VectorXcd& samples, const Mask& mask);

Eigen::Index mask_count(const Mask& mask);

}  // namespace deblur
