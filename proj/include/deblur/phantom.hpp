#pragma once

#include "deblur/operators.hpp"

#include <cstdint>

namespace deblur {

struct ImageSeries {
  std::vector<MatrixXcd> frames;
  double frame_dt = 0.0468;

  int n_frames() const { return static_cast<int>(frames.size()); }
  int height() const { return frames.empty() ? 0 : static_cast<int>(frames[0].rows()); }
  int width() const { return frames.empty() ? 0 : static_cast<int>(frames[0].cols()); }
};

struct PhantomConfig {
  int H = 64, W = 64;
  double duration_s = 14.0;
  double frame_dt_s = 0.0468;
  double cardiac_period_s = 1.0;
  double respiratory_period_s = 3.5;
  double cardiac_amp = 0.15;     // fractional radius modulation of the ventricle
  double resp_shift_px = 3.0;    // vertical translation amplitude
  uint64_t seed = 1;

  int n_frames() const {
    return static_cast<int>(std::lround(duration_s / frame_dt_s));
  }
};

// Ellipse-based torso with an inner "ventricle" whose radii oscillate at the
// cardiac period, plus a whole-field vertical translation at the respiratory
// period. Deterministic given the seed.
ImageSeries make_phantom(const PhantomConfig& cfg);

// Smooth complex Gaussian-bump sensitivities centered on the image border.
CoilMaps make_coilmaps(int n_coils, int H, int W, uint64_t seed);

// Per frame: two navigator spokes at 0 and pi/2, the rest golden-angle
// ordered with a global spoke index.
TrajectorySchedule golden_angle_schedule(int n_f, int spokes_per_frame,
                                         int n_readout);

// theta_G = pi*(sqrt(5)-1)/2, ~111.246 degrees
double golden_angle_rad();

// Multi-coil radial acquisition with circular complex Gaussian noise.
KSpaceDataset acquire(const ImageSeries& series, const CoilMaps& coils,
                      const TrajectorySchedule& schedule, double noise_sigma,
                      uint64_t seed);

// Cartesian alternative: per-frame random phase-encode rows plus fixed
// navigator rows sampled in every frame.
std::vector<Mask> make_cartesian_masks(int n_f, int H, int W,
                                       int rows_per_frame,
                                       const std::vector<int>& nav_rows,
                                       uint64_t seed);

KSpaceDataset acquire_cartesian(const ImageSeries& series,
                                const CoilMaps& coils,
                                const std::vector<Mask>& masks,
                                const std::vector<int>& nav_rows,
                                double noise_sigma, uint64_t seed);

}  // namespace deblur
