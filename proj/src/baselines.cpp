#include "deblur/baselines.hpp"

#include "deblur/rng.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace deblur {

namespace {

// sum_i ||A_i(U v_i)||^2
double forward_sqnorm(const MatrixXcd& U, const MatrixXd& V,
                      const KSpaceDataset& ds) {
  double acc = 0.0;
  for (int i = 0; i < ds.n_frames(); ++i) {
    FrameOp op(ds, i);
    VectorXcd xi = U * V.row(i).transpose();
    auto img = as_image(xi, ds.H, ds.W);
    for (int c = 0; c < ds.n_coils(); ++c)
      acc += op.forward(ds.coils.maps[c].cwiseProduct(img)).squaredNorm();
  }
  return acc;
}

}  // namespace

LowRankResult lowrank_recon(const KSpaceDataset& ds, int r, double lambda,
                            int sweeps, uint64_t seed) {
  if (r > ds.n_frames())
    throw std::invalid_argument("lowrank_recon: r > number of frames");
  const Eigen::Index npix = static_cast<Eigen::Index>(ds.H) * ds.W;
  const int nf = ds.n_frames();

  Rng rng(Rng::derive(seed, 0x10a7));
  MatrixXcd U(npix, r);
  MatrixXd V(nf, r);
  const double uscale = 1.0 / std::sqrt(static_cast<double>(npix));
  for (Eigen::Index j = 0; j < r; ++j) {
    for (Eigen::Index p = 0; p < npix; ++p)
      U(p, j) = std::complex<double>(rng.gaussian(), rng.gaussian()) * uscale;
    for (int i = 0; i < nf; ++i)
      V(i, j) = rng.gaussian() / std::sqrt(static_cast<double>(nf));
  }

  LowRankResult res;
  double prev = std::numeric_limits<double>::infinity();
  int rises = 0;
  for (int s = 0; s < sweeps; ++s) {
    // U step
    {
      DcGradient g = dc_gradient(U, V, ds);
      MatrixXcd dir = g.gU + 2.0 * lambda * U;
      const double gnorm2 = dir.squaredNorm();
      if (gnorm2 > 0.0) {
        const double curv =
            forward_sqnorm(dir, V, ds) + lambda * dir.squaredNorm();
        if (curv > 0.0) U -= (gnorm2 / (2.0 * curv)) * dir;
      }
    }
    // V step
    {
      DcGradient g = dc_gradient(U, V, ds);
      MatrixXd dir = g.gV + 2.0 * lambda * V;
      const double gnorm2 = dir.squaredNorm();
      if (gnorm2 > 0.0) {
        const double curv =
            forward_sqnorm(U, dir, ds) + lambda * dir.squaredNorm();
        if (curv > 0.0) V -= (gnorm2 / (2.0 * curv)) * dir;
      }
      const double obj = data_loss(U, V, ds) +
                         lambda * (U.squaredNorm() + V.squaredNorm());
      res.objective.push_back(obj);
      rises = (obj > prev) ? rises + 1 : 0;
      if (rises >= 10)
        throw std::runtime_error(
            "lowrank_recon: objective increased for 10 consecutive sweeps");
      prev = obj;
    }
  }
  res.factors = FactorPair{std::move(U), std::move(V)};
  return res;
}

GraphLaplacian storm_laplacian(const KSpaceDataset& ds, double sigma_kernel,
                               int k_nn) {
  const int nf = ds.n_frames();
  std::vector<VectorXcd> navs(nf);
  for (int i = 0; i < nf; ++i) navs[i] = ds.navigator_samples(i);

  MatrixXd dist(nf, nf);
  std::vector<double> offdiag;
  offdiag.reserve(static_cast<size_t>(nf) * (nf - 1) / 2);
  for (int i = 0; i < nf; ++i) {
    dist(i, i) = 0.0;
    for (int j = i + 1; j < nf; ++j) {
      const double d = (navs[i] - navs[j]).norm();
      dist(i, j) = dist(j, i) = d;
      offdiag.push_back(d);
    }
  }
  double sigma = sigma_kernel;
  if (sigma <= 0.0) {
    std::nth_element(offdiag.begin(), offdiag.begin() + offdiag.size() / 2,
                     offdiag.end());
    sigma = offdiag[offdiag.size() / 2];
    if (sigma <= 0.0) sigma = 1.0;  // static series: all distances zero
  }

  MatrixXd W = MatrixXd::Zero(nf, nf);
  std::vector<int> order(nf);
  for (int i = 0; i < nf; ++i) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return dist(i, a) < dist(i, b);
    });
    int kept = 0;
    for (int idx : order) {
      if (idx == i) continue;
      if (kept++ >= k_nn) break;
      W(i, idx) = std::exp(-dist(i, idx) * dist(i, idx) / (sigma * sigma));
    }
  }
  GraphLaplacian gl;
  gl.W = 0.5 * (W + W.transpose());
  gl.L = MatrixXd(gl.W.rowwise().sum().asDiagonal()) - gl.W;
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(gl.L);
  gl.eigenvalues = eig.eigenvalues();
  gl.eigenvectors = eig.eigenvectors();
  return gl;
}

StormResult storm_recon(const KSpaceDataset& ds, const GraphLaplacian& gl,
                        int r, double lambda, int max_cg_iters, double cg_tol) {
  const int nf = ds.n_frames();
  if (r > nf) throw std::invalid_argument("storm_recon: r > number of frames");
  if (gl.eigenvectors.rows() != nf)
    throw std::invalid_argument("storm_recon: Laplacian size mismatch");

  MatrixXd V = gl.eigenvectors.leftCols(r);
  VectorXd sigma = gl.eigenvalues.head(r);
  for (int j = 0; j < r; ++j) {
    Eigen::Index imax;
    V.col(j).cwiseAbs().maxCoeff(&imax);
    if (V(imax, j) < 0.0) V.col(j) = -V.col(j);
  }

  const Eigen::Index npix = static_cast<Eigen::Index>(ds.H) * ds.W;
  auto normal_op = [&](const MatrixXcd& X) -> MatrixXcd {
    MatrixXcd out = normal_apply(X, V, ds);
    for (int j = 0; j < r; ++j) out.col(j) += lambda * sigma[j] * X.col(j);
    return out;
  };
  auto rdot = [](const MatrixXcd& a, const MatrixXcd& b) {
    return (a.conjugate().cwiseProduct(b)).sum().real();
  };

  StormResult res;
  MatrixXcd U = MatrixXcd::Zero(npix, r);
  MatrixXcd rhs = adjoint_times_data(V, ds);
  MatrixXcd resid = rhs;  // rhs - N(0)
  MatrixXcd p = resid;
  double rs = rdot(resid, resid);
  const double rhs_norm = std::sqrt(rdot(rhs, rhs));
  res.cg_residual.push_back(std::sqrt(rs));
  res.converged = false;
  for (int it = 0; it < max_cg_iters; ++it) {
    if (std::sqrt(rs) <= cg_tol * rhs_norm) {
      res.converged = true;
      break;
    }
    MatrixXcd np = normal_op(p);
    const double alpha = rs / rdot(p, np);
    U += alpha * p;
    resid -= alpha * np;
    const double rs_new = rdot(resid, resid);
    res.cg_residual.push_back(std::sqrt(rs_new));
    p = resid + (rs_new / rs) * p;
    rs = rs_new;
  }
  if (!res.converged && std::sqrt(rs) <= cg_tol * rhs_norm)
    res.converged = true;
  res.eigenvalues = sigma;
  res.factors = FactorPair{std::move(U), std::move(V)};
  return res;
}

}  // namespace deblur
