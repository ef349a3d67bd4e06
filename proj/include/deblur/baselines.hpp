#pragma once

#include "deblur/factors.hpp"
#include "deblur/operators.hpp"

#include <cstdint>

namespace deblur {

struct GraphLaplacian {
  MatrixXd W;            // nonnegative symmetric weights, zero diagonal
  MatrixXd L;            // D - W
  VectorXd eigenvalues;  // ascending
  MatrixXd eigenvectors; // columns match eigenvalues
};

struct LowRankResult {
  FactorPair factors;
  std::vector<double> objective;  // per sweep
};

// ||A(U V^T) - B||^2 + lambda (||U||_F^2 + ||V||_F^2), alternating steepest
// descent with an exact line search per factor. Deterministic given seed.
// Aborts if the objective increases for 10 consecutive sweeps.
LowRankResult lowrank_recon(const KSpaceDataset& ds, int r, double lambda,
                            int sweeps, uint64_t seed);

// Gaussian kNN graph over per-frame navigator samples; sigma_kernel <= 0
// selects the median pairwise distance. L = D - W.
GraphLaplacian storm_laplacian(const KSpaceDataset& ds, double sigma_kernel,
                               int k_nn);

struct StormResult {
  FactorPair factors;
  VectorXd eigenvalues;            // the r smallest, ascending
  std::vector<double> cg_residual; // CG residual norms, monotone decreasing
  bool converged = true;
};

// V = r smallest-eigenvalue eigenvectors of L (sign fixed so the
// largest-magnitude entry is positive); U solves
//   min_U ||A(U V^T) - B||^2 + lambda * sum_j sigma_j ||u_j||^2
// by conjugate gradients on the normal equations.
StormResult storm_recon(const KSpaceDataset& ds, const GraphLaplacian& gl,
                        int r, double lambda, int max_cg_iters,
                        double cg_tol = 1e-10);

}  // namespace deblur
