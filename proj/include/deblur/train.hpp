#pragma once

#include "deblur/factors.hpp"
#include "deblur/generators.hpp"
#include "deblur/operators.hpp"
#include "deblur/phantom.hpp"

#include <optional>
#include <string>

namespace deblur {

struct ReconConfig {
  int r = 30;
  int d = 2;
  double lambda1 = 1e-3;
  double lambda2 = 1e-4;
  double lambda3 = 1e2;
  double lr_theta = 2e-4;
  double lr_phi = 2e-4;
  double lr_z = 2e-4;
  int epochs = 150;
  int pretrain_epochs_spatial = 400;
  int pretrain_epochs_temporal = 1500;
  double pretrain_lr = 2e-3;
  std::string init_mode = "storm";       // storm | lowrank | random
  std::string operator_mode = "radial";  // radial | cartesian
  std::string optimizer = "gd";          // gd | adam
  std::string pretrain_optimizer = "adam";
  bool exclude_bias_from_l1 = false;
  bool normalize_data = true;
  int hidden_temporal = 16;
  int kernel = 3;
  uint64_t seed = 1;
  int z_snapshot_every = 0;  // 0 = only first/last
  int minibatch_frames = 0;  // 0 = full batch

  void validate() const;
};

struct TraceRow {
  int epoch = 0;
  double data_loss = 0.0;
  double l1_theta = 0.0;
  double l1_phi = 0.0;
  double tv_z = 0.0;
  double ser_db = 0.0;  // NaN when no reference supplied
};

struct TrainTrace {
  std::vector<TraceRow> rows;
  std::vector<std::pair<int, MatrixXd>> z_snapshots;

  double final_ser() const { return rows.empty() ? 0.0 : rows.back().ser_db; }
  double peak_ser() const;
  int peak_epoch() const;
};

// sum_{i>=1} sum_k |Z(k,i) - Z(k,i-1)|
double temporal_tv(const MatrixXd& Z);
// subgradient with backward differences, sign(0) = 0
MatrixXd temporal_tv_subgradient(const MatrixXd& Z);

struct PretrainResult {
  std::vector<double> loss;     // per epoch
  double relative_fit = 0.0;    // ||G(.) - target||_F / ||target||_F
};

// theta_0 = argmin ||G_theta(U0) - U_target||_F^2 (gradient descent; net is
// updated in place)
PretrainResult pretrain_spatial(GeneratorNet& net, const SpatialSeed& seed,
                                const MatrixXcd& u_target, int epochs,
                                double lr, const std::string& optimizer);

// {phi_0, Z_0} = argmin ||G_phi(Z) - V_target||_F^2 over phi and Z jointly
PretrainResult pretrain_temporal(GeneratorNet& net, MatrixXd& Z,
                                 const MatrixXd& v_target, int epochs,
                                 double lr, const std::string& optimizer);

struct ReconInit {
  GeneratorNet theta;
  GeneratorNet phi;
  MatrixXd Z;      // d x n_f
  MatrixXcd U0;    // generator input factors (unnormalized units)
};

// d x n_f latent initializer: leading principal components of the temporal
// courses, each row scaled to unit RMS.
MatrixXd latent_init_from_courses(const MatrixXd& V, int d);

// Builds both generators from initializer factors (U0, V0): the spatial net
// is fit to reproduce U0 / scale from its own seed, the temporal net and Z
// are fit jointly to V0. scale should match the data normalization used by
// reconstruct (dataset_norm) so the nets start in the normalized regime.
ReconInit pretrain_init(const MatrixXcd& U0, const MatrixXd& V0, int H, int W,
                        const ReconConfig& cfg, double scale,
                        PretrainResult* spatial_out = nullptr,
                        PretrainResult* temporal_out = nullptr);

struct ReconResult {
  FactorPair factors;  // rescaled back to data units
  GeneratorNet theta;
  GeneratorNet phi;
  MatrixXd Z;
  TrainTrace trace;
  double scale = 1.0;  // data normalization factor applied during the fit
};

// Joint proximal-gradient optimization of Eq-style objective:
//   ||A(UV^T) - B||^2 + l1*||theta||_1 + l2*||phi||_1 + l3*||grad_t Z||_1
// with U = G_theta(U0), V = G_phi(Z). Soft-threshold prox for the weight
// penalties, subgradient for the latent TV term.
ReconResult reconstruct(const KSpaceDataset& ds, const ReconConfig& cfg,
                        const ReconInit& init,
                        const ImageSeries* reference = nullptr);

// sqrt of the total sample energy, used for data normalization
double dataset_norm(const KSpaceDataset& ds);

// Synthesize the frame at column i, with the latent optionally overridden:
// evaluates the temporal net on all of Z (conv context crosses frames) and
// selects column i.
MatrixXcd frame_synthesis(const MatrixXcd& U, const GeneratorNet& phi,
                          const MatrixXd& Z, int i, int H, int W,
                          const std::optional<VectorXd>& z_override = {});

}  // namespace deblur
