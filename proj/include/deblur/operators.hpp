#pragma once

#include "deblur/fourier.hpp"

#include <vector>

namespace deblur {

struct CoilMaps {
  std::vector<MatrixXcd> maps;  // one H x W complex sensitivity per coil
  int n_coils() const { return static_cast<int>(maps.size()); }
  int height() const { return maps.empty() ? 0 : static_cast<int>(maps[0].rows()); }
  int width() const { return maps.empty() ? 0 : static_cast<int>(maps[0].cols()); }
};

struct Spoke {
  double angle = 0.0;  // radians in [0, pi)
  bool navigator = false;
};

struct TrajectorySchedule {
  int n_readout = 0;
  std::vector<std::vector<Spoke>> frames;  // spokes per frame

  int n_frames() const { return static_cast<int>(frames.size()); }
  int spokes_per_frame() const {
    return frames.empty() ? 0 : static_cast<int>(frames[0].size());
  }
  // readout radii run from -pi to pi exclusive, n_readout samples per spoke
  PointList frame_points(int frame) const;
  PointList spoke_points(double angle) const;
};

enum class SamplingMode { Radial, Cartesian };

// Measured multi-coil k-space, either golden-angle radial (explicit
// trajectory) or masked Cartesian (per-frame binary mask over the DFT grid).
struct KSpaceDataset {
  SamplingMode mode = SamplingMode::Radial;
  int H = 0, W = 0;
  CoilMaps coils;
  TrajectorySchedule schedule;  // radial mode
  std::vector<Mask> masks;      // cartesian mode, one per frame
  std::vector<int> nav_rows;    // cartesian navigator ky lines (every frame)
  std::vector<std::vector<VectorXcd>> samples;  // [frame][coil]
  double noise_sigma = 0.0;

  int n_frames() const { return static_cast<int>(samples.size()); }
  int n_coils() const { return coils.n_coils(); }
  Eigen::Index frame_sample_count(int frame) const;
  void validate() const;

  // Concatenated navigator samples of one frame over all coils, used for
  // self-gating similarity. Navigator locations are identical in every frame.
  VectorXcd navigator_samples(int frame) const;
};

// Single-frame sampling operator bound to a dataset row; radial mode builds
// the separable NUDFT tables once and reuses them across coils.
class FrameOp {
 public:
  FrameOp(const KSpaceDataset& ds, int frame);
  VectorXcd forward(const MatrixXcd& image) const;
  MatrixXcd adjoint(const VectorXcd& samples) const;
  Eigen::Index sample_count() const { return count_; }

 private:
  SamplingMode mode_;
  NudftPlan plan_;     // radial
  const Mask* mask_ = nullptr;  // cartesian
  Eigen::Index count_ = 0;
};

// frame index p = x*H + y (column-major pixel flattening)
Eigen::Map<const MatrixXcd> as_image(const VectorXcd& flat, int H, int W);

// Eq.-(2)-style factor-domain measurement of one frame: measures
// S_c .* reshape(U*v) per coil without forming the full series.
std::vector<VectorXcd> frame_measure(const MatrixXcd& U, const VectorXd& v,
                                     const CoilMaps& coils, const FrameOp& op);

struct DcGradient {
  double loss = 0.0;
  MatrixXcd gU;  // N_pix x r
  MatrixXd gV;   // n_f x r
};

// loss = sum_i ||A_i(U v_i) - b_i||^2 with
//   gU = 2 sum_i A_i^H(res_i) v_i^T
//   gV(i,:) = 2 Re(U^H A_i^H(res_i))
DcGradient dc_gradient(const MatrixXcd& U, const MatrixXd& V,
                       const KSpaceDataset& ds);

// Restriction of the sums above to a frame subset (mini-batching); gV rows
// outside the subset are zero.
DcGradient dc_gradient_frames(const MatrixXcd& U, const MatrixXd& V,
                              const KSpaceDataset& ds,
                              const std::vector<int>& frames);

// Normal-equation application sum_i A_i^H A_i(U v_i) v_i^T for fixed V,
// plus the adjoint images of the data, both used by the baseline solvers.
MatrixXcd normal_apply(const MatrixXcd& U, const MatrixXd& V,
                       const KSpaceDataset& ds);
MatrixXcd adjoint_times_data(const MatrixXd& V, const KSpaceDataset& ds);

// sum_i ||A_i(U v_i) - b_i||^2 without gradients
double data_loss(const MatrixXcd& U, const MatrixXd& V, const KSpaceDataset& ds);

}  // namespace deblur
