#include "deblur/baselines.hpp"
#include "deblur/metrics.hpp"
#include "deblur/phantom.hpp"
#include "deblur/rng.hpp"

#include <doctest.h>

#include <cmath>

using namespace deblur;

namespace {

ImageSeries small_phantom(int H, int nf) {
  PhantomConfig cfg;
  cfg.resp_shift_px = 0.5;
  cfg.cardiac_amp = 0.1;
  cfg.H = H;
  cfg.W = H;
  cfg.frame_dt_s = 0.05;
  cfg.duration_s = nf * cfg.frame_dt_s;
  cfg.cardiac_period_s = 0.5;
  cfg.respiratory_period_s = 1.3;
  return make_phantom(cfg);
}

double recon_ser(const FactorPair& fp, const ImageSeries& ref, int H, int W) {
  return series_ser_db(fp, ref.frames, H, W);
}

}  // namespace

TEST_CASE("navigator graph Laplacian has the defining properties") {
  ImageSeries s = small_phantom(16, 30);
  CoilMaps cm = make_coilmaps(2, 16, 16, 3);
  KSpaceDataset ds =
      acquire(s, cm, golden_angle_schedule(s.n_frames(), 4, 16), 0.01, 9);
  GraphLaplacian gl = storm_laplacian(ds, 0.0, 5);

  const int nf = s.n_frames();
  REQUIRE(gl.W.rows() == nf);
  CHECK((gl.W - gl.W.transpose()).lpNorm<Eigen::Infinity>() < 1e-14);
  CHECK(gl.W.diagonal().lpNorm<Eigen::Infinity>() == 0.0);
  CHECK(gl.W.minCoeff() >= 0.0);
  // rows of L sum to zero, smallest eigenvalue is (numerically) zero
  CHECK((gl.L.rowwise().sum()).lpNorm<Eigen::Infinity>() < 1e-10);
  CHECK(std::abs(gl.eigenvalues[0]) < 1e-8);
  CHECK(gl.eigenvalues.minCoeff() > -1e-8);
  // eigenvalues ascend
  for (int i = 1; i < nf; ++i)
    CHECK(gl.eigenvalues[i] >= gl.eigenvalues[i - 1] - 1e-12);
  // eigenvectors orthonormal
  MatrixXd g = gl.eigenvectors.transpose() * gl.eigenvectors;
  CHECK((g - MatrixXd::Identity(nf, nf)).lpNorm<Eigen::Infinity>() < 1e-8);
}

TEST_CASE("frames with similar motion phase get stronger graph weights") {
  // cardiac period = 10 frames, respiratory = 20, so frame 20 matches frame 0
  PhantomConfig cfg;
  cfg.H = 16;
  cfg.W = 16;
  cfg.frame_dt_s = 0.05;
  cfg.duration_s = 2.0;
  cfg.cardiac_period_s = 0.5;
  cfg.respiratory_period_s = 1.0;
  cfg.resp_shift_px = 0.5;
  cfg.cardiac_amp = 0.1;
  ImageSeries s = make_phantom(cfg);
  CoilMaps cm = make_coilmaps(2, 16, 16, 3);
  KSpaceDataset ds =
      acquire(s, cm, golden_angle_schedule(s.n_frames(), 4, 16), 0.0, 9);
  GraphLaplacian gl = storm_laplacian(ds, 0.0, 6);
  // frame 0 and frame 20 share both phases; frame 3 does not
  CHECK(gl.W(0, 20) > gl.W(0, 3));
}

TEST_CASE("low-rank recovery makes steady progress on a rank-1 noiseless series") {
  const int H = 16, nf = 12;
  // static series = rank 1 exactly
  PhantomConfig cfg;
  cfg.resp_shift_px = 0.5;
  cfg.cardiac_amp = 0.1;
  cfg.H = H;
  cfg.W = H;
  cfg.frame_dt_s = 0.05;
  cfg.duration_s = nf * cfg.frame_dt_s;
  cfg.cardiac_amp = 0.0;
  cfg.resp_shift_px = 0.0;
  ImageSeries s = make_phantom(cfg);
  CoilMaps cm = make_coilmaps(2, H, H, 3);
  KSpaceDataset ds =
      acquire(s, cm, golden_angle_schedule(nf, 6, H), 0.0, 9);
  LowRankResult res = lowrank_recon(ds, 1, 1e-8, 120, 5);
  CHECK(recon_ser(res.factors, s, H, H) > 12.0);
  // steepest descent keeps improving with more sweeps
  LowRankResult more = lowrank_recon(ds, 1, 1e-8, 400, 5);
  CHECK(recon_ser(more.factors, s, H, H) > recon_ser(res.factors, s, H, H));
}

TEST_CASE("low-rank objective decreases monotonically in early sweeps") {
  ImageSeries s = small_phantom(16, 10);
  CoilMaps cm = make_coilmaps(2, 16, 16, 3);
  KSpaceDataset ds =
      acquire(s, cm, golden_angle_schedule(s.n_frames(), 5, 16), 0.01, 9);
  LowRankResult res = lowrank_recon(ds, 4, 1e-6, 25, 5);
  REQUIRE(res.objective.size() >= 10);
  for (size_t i = 1; i < 10; ++i)
    CHECK(res.objective[i] <= res.objective[i - 1] + 1e-9);
}

TEST_CASE("stronger frame regularization shrinks the recovered factors") {
  ImageSeries s = small_phantom(16, 10);
  CoilMaps cm = make_coilmaps(2, 16, 16, 3);
  KSpaceDataset ds =
      acquire(s, cm, golden_angle_schedule(s.n_frames(), 5, 16), 0.0, 9);
  LowRankResult weak = lowrank_recon(ds, 3, 1e-8, 40, 5);
  LowRankResult strong = lowrank_recon(ds, 3, 1e3, 40, 5);
  const double nw = (weak.factors.U * weak.factors.V.transpose()).norm();
  const double ns = (strong.factors.U * strong.factors.V.transpose()).norm();
  CHECK(ns < nw);
}

TEST_CASE("manifold recovery: CG residuals decrease and converge") {
  ImageSeries s = small_phantom(16, 30);
  CoilMaps cm = make_coilmaps(3, 16, 16, 3);
  KSpaceDataset ds =
      acquire(s, cm, golden_angle_schedule(s.n_frames(), 6, 16), 0.005, 9);
  GraphLaplacian gl = storm_laplacian(ds, 0.0, 5);
  StormResult res = storm_recon(ds, gl, 8, 0.05, 80);
  REQUIRE(res.cg_residual.size() >= 2);
  CHECK(res.cg_residual.back() < res.cg_residual.front());
  for (size_t i = 1; i < res.cg_residual.size(); ++i)
    CHECK(res.cg_residual[i] <= res.cg_residual[i - 1] * 1.5);
}

TEST_CASE("manifold temporal basis comes from the Laplacian eigenvectors") {
  ImageSeries s = small_phantom(16, 24);
  CoilMaps cm = make_coilmaps(2, 16, 16, 3);
  KSpaceDataset ds =
      acquire(s, cm, golden_angle_schedule(s.n_frames(), 5, 16), 0.0, 9);
  GraphLaplacian gl = storm_laplacian(ds, 0.0, 5);
  StormResult res = storm_recon(ds, gl, 4, 0.05, 60);
  REQUIRE(res.factors.V.cols() == 4);
  for (int j = 0; j < 4; ++j) {
    VectorXd v = res.factors.V.col(j);
    VectorXd e = gl.eigenvectors.col(j);
    CHECK(std::abs(std::abs(v.dot(e)) - 1.0) < 1e-8);
    // sign convention: largest-magnitude entry positive
    Eigen::Index imax;
    v.cwiseAbs().maxCoeff(&imax);
    CHECK(v[imax] > 0.0);
  }
  CHECK(res.eigenvalues.size() == 4);
}

TEST_CASE("manifold recovery beats plain low rank on a moving series") {
  ImageSeries s = small_phantom(16, 40);
  CoilMaps cm = make_coilmaps(3, 16, 16, 3);
  KSpaceDataset ds =
      acquire(s, cm, golden_angle_schedule(s.n_frames(), 5, 16), 0.01, 9);
  GraphLaplacian gl = storm_laplacian(ds, 0.0, 6);
  StormResult storm = storm_recon(ds, gl, 10, 0.05, 80);
  LowRankResult lowrank = lowrank_recon(ds, 10, 1e-6, 40, 5);
  const double ser_storm = recon_ser(storm.factors, s, 16, 16);
  const double ser_lowrank = recon_ser(lowrank.factors, s, 16, 16);
  CHECK(ser_storm > ser_lowrank);
}
