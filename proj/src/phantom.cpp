#include "deblur/phantom.hpp"

#include "deblur/rng.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace deblur {

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

struct Ellipse {
  double cy, cx, ry, rx, value;  // value is added to the image inside
};

// Anti-aliased coverage of an ellipse at pixel (y, x): smoothstep over a
// ~1.5 px band around the boundary of the implicit equation.
double ellipse_coverage(const Ellipse& e, double y, double x) {
  const double fy = (y - e.cy) / e.ry, fx = (x - e.cx) / e.rx;
  const double f = fy * fy + fx * fx;
  // approximate signed distance in pixels
  const double d = (f - 1.0) * 0.5 * std::min(e.ry, e.rx);
  const double w = 0.75;
  double t = std::clamp((w - d) / (2.0 * w), 0.0, 1.0);
  return t * t * (3.0 - 2.0 * t);
}

void check_inside(const Ellipse& e, int H, int W) {
  if (e.cy - e.ry < 0.0 || e.cy + e.ry > H - 1 || e.cx - e.rx < 0.0 ||
      e.cx + e.rx > W - 1)
    throw std::invalid_argument("make_phantom: ellipse leaves the field of view");
}

}  // namespace

double golden_angle_rad() { return kPi * (std::sqrt(5.0) - 1.0) / 2.0; }

ImageSeries make_phantom(const PhantomConfig& cfg) {
  if (cfg.H < 16 || cfg.W < 16)
    throw std::invalid_argument("make_phantom: image too small");
  if (cfg.cardiac_period_s <= 2.0 * cfg.frame_dt_s ||
      cfg.respiratory_period_s <= 2.0 * cfg.frame_dt_s)
    throw std::invalid_argument("make_phantom: motion period not resolvable");

  const int H = cfg.H, W = cfg.W;
  const double cy0 = 0.5 * (H - 1), cx0 = 0.5 * (W - 1);
  const int n_f = cfg.n_frames();

  // static smooth phase so the series is genuinely complex
  MatrixXcd phase(H, W);
  for (int x = 0; x < W; ++x)
    for (int y = 0; y < H; ++y)
      phase(y, x) = std::polar(
          1.0, 0.4 * std::sin(2.0 * kPi * x / W) * std::cos(2.0 * kPi * y / H));

  ImageSeries series;
  series.frame_dt = cfg.frame_dt_s;
  series.frames.reserve(n_f);

  const double vr0 = 0.17 * std::min(H, W);
  for (int i = 0; i < n_f; ++i) {
    const double t = i * cfg.frame_dt_s;
    const double dy =
        cfg.resp_shift_px * std::sin(2.0 * kPi * t / cfg.respiratory_period_s);
    const double card =
        1.0 + cfg.cardiac_amp * std::sin(2.0 * kPi * t / cfg.cardiac_period_s);

    const Ellipse torso{cy0 + dy, cx0, 0.40 * H, 0.42 * W, 0.6};
    const Ellipse lung{cy0 + dy - 0.12 * H, cx0 - 0.18 * W, 0.16 * H,
                       0.13 * W, -0.35};
    const Ellipse ventricle{cy0 + dy + 0.08 * H, cx0 + 0.10 * W, vr0 * card,
                            0.85 * vr0 * card, 0.4};
    const Ellipse papillary{cy0 + dy + 0.08 * H, cx0 + 0.10 * W, 0.28 * vr0,
                            0.28 * vr0, -0.25};
    const Ellipse marker{cy0 + dy - 0.22 * H, cx0 + 0.24 * W, 0.045 * H,
                         0.045 * W, 0.35};
    for (const auto& e : {torso, lung, ventricle, papillary, marker})
      check_inside(e, H, W);

    MatrixXcd frame(H, W);
    for (int x = 0; x < W; ++x)
      for (int y = 0; y < H; ++y) {
        double v = 0.0;
        for (const auto& e : {torso, lung, ventricle, papillary, marker})
          v += e.value * ellipse_coverage(e, y, x);
        frame(y, x) = std::max(v, 0.0) * phase(y, x);
      }
    series.frames.push_back(std::move(frame));
  }
  return series;
}

CoilMaps make_coilmaps(int n_coils, int H, int W, uint64_t seed) {
  if (n_coils < 1) throw std::invalid_argument("make_coilmaps: n_coils < 1");
  Rng rng(Rng::derive(seed, 0xc011));
  CoilMaps cm;
  cm.maps.reserve(n_coils);
  const double cy0 = 0.5 * (H - 1), cx0 = 0.5 * (W - 1);
  const double rad = 0.62 * std::max(H, W);
  const double width = 0.8 * std::max(H, W);
  for (int c = 0; c < n_coils; ++c) {
    const double ang = 2.0 * kPi * c / n_coils + rng.uniform(-0.15, 0.15);
    const double ccy = cy0 + rad * std::sin(ang);
    const double ccx = cx0 + rad * std::cos(ang);
    const double ph0 = rng.uniform(0.0, 2.0 * kPi);
    const double gy = rng.uniform(-1.0, 1.0) / H, gx = rng.uniform(-1.0, 1.0) / W;
    MatrixXcd m(H, W);
    for (int x = 0; x < W; ++x)
      for (int y = 0; y < H; ++y) {
        const double d2 = (y - ccy) * (y - ccy) + (x - ccx) * (x - ccx);
        const double mag = std::exp(-d2 / (2.0 * width * width));
        m(y, x) = std::polar(mag, ph0 + gy * (y - cy0) + gx * (x - cx0));
      }
    cm.maps.push_back(std::move(m));
  }
  return cm;
}

TrajectorySchedule golden_angle_schedule(int n_f, int spokes_per_frame,
                                         int n_readout) {
  if (spokes_per_frame < 3)
    throw std::invalid_argument(
        "golden_angle_schedule: need >= 3 spokes/frame (2 navigators + 1)");
  TrajectorySchedule sched;
  sched.n_readout = n_readout;
  sched.frames.resize(n_f);
  const double ga = golden_angle_rad();
  long global = 0;
  for (int i = 0; i < n_f; ++i) {
    auto& spokes = sched.frames[i];
    spokes.push_back({0.0, true});
    spokes.push_back({kPi / 2.0, true});
    for (int j = 2; j < spokes_per_frame; ++j) {
      double a = std::fmod(static_cast<double>(global) * ga, kPi);
      spokes.push_back({a, false});
      ++global;
    }
  }
  return sched;
}

namespace {

void add_noise(VectorXcd& b, double sigma, uint64_t seed, uint64_t frame,
               uint64_t coil) {
  if (sigma == 0.0) return;
  Rng rng(Rng::derive(seed, frame + 1, coil + 1));
  const double s = sigma / std::sqrt(2.0);
  for (Eigen::Index m = 0; m < b.size(); ++m)
    b[m] += std::complex<double>(s * rng.gaussian(), s * rng.gaussian());
}

}  // namespace

KSpaceDataset acquire(const ImageSeries& series, const CoilMaps& coils,
                      const TrajectorySchedule& schedule, double noise_sigma,
                      uint64_t seed) {
  if (schedule.n_frames() != series.n_frames())
    throw std::invalid_argument("acquire: schedule/series frame mismatch");
  KSpaceDataset ds;
  ds.mode = SamplingMode::Radial;
  ds.H = series.height();
  ds.W = series.width();
  ds.coils = coils;
  ds.schedule = schedule;
  ds.noise_sigma = noise_sigma;
  ds.samples.resize(series.n_frames());
  for (int i = 0; i < series.n_frames(); ++i) {
    NudftPlan plan = make_nudft_plan(schedule.frame_points(i), ds.H, ds.W);
    for (int c = 0; c < coils.n_coils(); ++c) {
      VectorXcd b = plan.forward(coils.maps[c].cwiseProduct(series.frames[i]));
      add_noise(b, noise_sigma, seed, i, c);
      ds.samples[i].push_back(std::move(b));
    }
  }
  ds.validate();
  return ds;
}

std::vector<Mask> make_cartesian_masks(int n_f, int H, int W,
                                       int rows_per_frame,
                                       const std::vector<int>& nav_rows,
                                       uint64_t seed) {
  std::vector<Mask> masks(n_f, Mask::Zero(H, W));
  for (int i = 0; i < n_f; ++i) {
    for (int row : nav_rows) masks[i].row(row).setConstant(1);
    Rng rng(Rng::derive(seed, 0xca27, i));
    int placed = 0, guard = 0;
    while (placed < rows_per_frame && guard < 10000) {
      const int row = static_cast<int>(rng.below(H));
      ++guard;
      if (masks[i](row, 0)) continue;
      masks[i].row(row).setConstant(1);
      ++placed;
    }
  }
  return masks;
}

KSpaceDataset acquire_cartesian(const ImageSeries& series,
                                const CoilMaps& coils,
                                const std::vector<Mask>& masks,
                                const std::vector<int>& nav_rows,
                                double noise_sigma, uint64_t seed) {
  if (static_cast<int>(masks.size()) != series.n_frames())
    throw std::invalid_argument("acquire_cartesian: mask/series frame mismatch");
  KSpaceDataset ds;
  ds.mode = SamplingMode::Cartesian;
  ds.H = series.height();
  ds.W = series.width();
  ds.coils = coils;
  ds.masks = masks;
  ds.nav_rows = nav_rows;
  ds.noise_sigma = noise_sigma;
  ds.samples.resize(series.n_frames());
  for (int i = 0; i < series.n_frames(); ++i)
    for (int c = 0; c < coils.n_coils(); ++c) {
      VectorXcd b =
          masked_fft_forward(coils.maps[c].cwiseProduct(series.frames[i]),
                             masks[i]);
      add_noise(b, noise_sigma, seed, i, c);
      ds.samples[i].push_back(std::move(b));
    }
  ds.validate();
  return ds;
}

}  // namespace deblur
