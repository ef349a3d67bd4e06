#include "deblur/train.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace deblur {

namespace {

double sign0(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

// Per-tensor first-order update, plain GD or Adam, shared step counter.
class Optimizer {
 public:
  Optimizer(std::string mode, double lr) : mode_(std::move(mode)), lr_(lr) {
    if (mode_ != "gd" && mode_ != "adam")
      throw std::invalid_argument("Optimizer: unknown mode '" + mode_ + "'");
  }

  void tick() { ++t_; }

  // Per-coordinate step scale of the last update: lr for plain GD, the
  // bias-corrected adaptive scale for Adam. Used by the l1 prox so the
  // threshold matches the effective step actually taken; the denominator is
  // floored so coordinates with no gradient history decay at a bounded rate.
  Eigen::ArrayXd step_scale(size_t slot, Eigen::Index n) const {
    if (mode_ == "gd" || slot >= v_.size() || v_[slot].size() != n)
      return Eigen::ArrayXd::Constant(n, lr_);
    const double bc2 = 1.0 - std::pow(beta2_, t_);
    return lr_ / ((v_[slot].array() / bc2).sqrt() + prox_floor_);
  }

  void step(size_t slot, Eigen::VectorXd& param, const Eigen::VectorXd& grad) {
    if (mode_ == "gd") {
      param -= lr_ * grad;
      return;
    }
    if (slot >= m_.size()) {
      m_.resize(slot + 1);
      v_.resize(slot + 1);
    }
    if (m_[slot].size() != param.size()) {
      m_[slot] = Eigen::VectorXd::Zero(param.size());
      v_[slot] = Eigen::VectorXd::Zero(param.size());
    }
    m_[slot] = beta1_ * m_[slot] + (1.0 - beta1_) * grad;
    v_[slot] = beta2_ * v_[slot].array() +
               (1.0 - beta2_) * grad.array().square();
    const double bc1 = 1.0 - std::pow(beta1_, t_);
    const double bc2 = 1.0 - std::pow(beta2_, t_);
    param.array() -= lr_ * (m_[slot].array() / bc1) /
                     ((v_[slot].array() / bc2).sqrt() + eps_);
  }

 private:
  std::string mode_;
  double lr_;
  double beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8, prox_floor_ = 5e-3;
  int t_ = 0;
  std::vector<Eigen::VectorXd> m_, v_;
};

void apply_net_update(GeneratorNet& net, const std::vector<ConvLayer>& grads,
                      Optimizer& opt, size_t slot0) {
  for (size_t l = 0; l < net.layers.size(); ++l) {
    opt.step(slot0 + 2 * l, net.layers[l].weights.data, grads[l].weights.data);
    opt.step(slot0 + 2 * l + 1, net.layers[l].bias.data, grads[l].bias.data);
  }
}

// Proximal step for lambda * ||net||_1 matching the optimizer's effective
// per-coordinate step size.
void prox_net(GeneratorNet& net, const Optimizer& opt, double lambda,
              bool include_bias) {
  if (lambda <= 0.0) return;
  auto shrink = [&](size_t slot, Eigen::VectorXd& w) {
    const Eigen::ArrayXd s = opt.step_scale(slot, w.size());
    for (Eigen::Index i = 0; i < w.size(); ++i)
      w[i] = soft_threshold(w[i], lambda * s[i]);
  };
  for (size_t l = 0; l < net.layers.size(); ++l) {
    shrink(2 * l, net.layers[l].weights.data);
    if (include_bias) shrink(2 * l + 1, net.layers[l].bias.data);
  }
}

void check_finite(double v, const char* what) {
  if (!std::isfinite(v))
    throw std::runtime_error(std::string(what) + ": non-finite loss");
}

}  // namespace

void ReconConfig::validate() const {
  if (lambda1 < 0.0 || lambda2 < 0.0 || lambda3 < 0.0)
    throw std::invalid_argument("ReconConfig: lambdas must be >= 0");
  if (lr_theta <= 0.0 || lr_phi <= 0.0 || lr_z <= 0.0 || pretrain_lr <= 0.0)
    throw std::invalid_argument("ReconConfig: step sizes must be > 0");
  if (r < 1 || d < 1 || epochs < 0)
    throw std::invalid_argument("ReconConfig: bad r/d/epochs");
  if (init_mode != "storm" && init_mode != "lowrank" && init_mode != "random")
    throw std::invalid_argument("ReconConfig: unknown init mode");
  if (operator_mode != "radial" && operator_mode != "cartesian")
    throw std::invalid_argument("ReconConfig: unknown operator mode");
  if (optimizer != "gd" && optimizer != "adam")
    throw std::invalid_argument("ReconConfig: unknown optimizer");
  if (pretrain_optimizer != "gd" && pretrain_optimizer != "adam")
    throw std::invalid_argument("ReconConfig: unknown pretrain optimizer");
}

double TrainTrace::peak_ser() const {
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& r : rows) best = std::max(best, r.ser_db);
  return best;
}

int TrainTrace::peak_epoch() const {
  double best = -std::numeric_limits<double>::infinity();
  int at = 0;
  for (const auto& r : rows)
    if (r.ser_db > best) {
      best = r.ser_db;
      at = r.epoch;
    }
  return at;
}

double temporal_tv(const MatrixXd& Z) {
  if (Z.cols() < 2)
    throw std::invalid_argument("temporal_tv: need at least 2 frames");
  double acc = 0.0;
  for (Eigen::Index i = 1; i < Z.cols(); ++i)
    acc += (Z.col(i) - Z.col(i - 1)).cwiseAbs().sum();
  return acc;
}

MatrixXd temporal_tv_subgradient(const MatrixXd& Z) {
  MatrixXd g = MatrixXd::Zero(Z.rows(), Z.cols());
  for (Eigen::Index i = 1; i < Z.cols(); ++i)
    for (Eigen::Index k = 0; k < Z.rows(); ++k) {
      const double s = sign0(Z(k, i) - Z(k, i - 1));
      g(k, i) += s;
      g(k, i - 1) -= s;
    }
  return g;
}

PretrainResult pretrain_spatial(GeneratorNet& net, const SpatialSeed& seed,
                                const MatrixXcd& u_target, int epochs,
                                double lr, const std::string& optimizer) {
  if (net.in_channels() != seed.data.shape[0])
    throw std::invalid_argument("pretrain_spatial: seed channel mismatch");
  if (net.out_channels() != 2 * u_target.cols())
    throw std::invalid_argument("pretrain_spatial: target rank mismatch");
  const ad::Tensor target =
      complex_to_channels(u_target, seed.H(), seed.W());
  const double tnorm = std::max(target.data.norm(), 1e-300);

  Optimizer opt(optimizer, lr);
  PretrainResult res;
  for (int e = 0; e < epochs; ++e) {
    NetEval ev = forward_eval(net, seed.data);
    ad::Tensor diff(target.shape, ev.out().data - target.data);
    const double loss = diff.data.squaredNorm();
    check_finite(loss, "pretrain_spatial");
    res.loss.push_back(loss);
    diff.data *= 2.0;
    ev.graph.backward(ev.output, diff);
    opt.tick();
    apply_net_update(net, ev.parameter_gradients(), opt, 0);
  }
  NetEval ev = forward_eval(net, seed.data);
  res.relative_fit = (ev.out().data - target.data).norm() / tnorm;
  return res;
}

PretrainResult pretrain_temporal(GeneratorNet& net, MatrixXd& Z,
                                 const MatrixXd& v_target, int epochs,
                                 double lr, const std::string& optimizer) {
  if (net.out_channels() != v_target.cols())
    throw std::invalid_argument("pretrain_temporal: target rank mismatch");
  if (Z.cols() != v_target.rows())
    throw std::invalid_argument("pretrain_temporal: frame count mismatch");
  ad::Tensor target({net.out_channels(), static_cast<int>(v_target.rows())});
  for (int j = 0; j < v_target.cols(); ++j)
    for (int i = 0; i < v_target.rows(); ++i) target.at2(j, i) = v_target(i, j);
  const double tnorm = std::max(target.data.norm(), 1e-300);

  Optimizer opt(optimizer, lr);
  PretrainResult res;
  const size_t z_slot = 2 * net.layers.size();
  for (int e = 0; e < epochs; ++e) {
    ad::Tensor zt = tensor_from_latents(Z);
    NetEval ev = forward_eval(net, zt);
    ad::Tensor diff(target.shape, ev.out().data - target.data);
    const double loss = diff.data.squaredNorm();
    check_finite(loss, "pretrain_temporal");
    res.loss.push_back(loss);
    diff.data *= 2.0;
    ev.graph.backward(ev.output, diff);
    opt.tick();
    apply_net_update(net, ev.parameter_gradients(), opt, 0);
    MatrixXd zg = latents_from_tensor(ev.input_gradient());
    Eigen::VectorXd zvec = Eigen::Map<Eigen::VectorXd>(Z.data(), Z.size());
    Eigen::VectorXd gvec = Eigen::Map<Eigen::VectorXd>(zg.data(), zg.size());
    opt.step(z_slot, zvec, gvec);
    Z = Eigen::Map<MatrixXd>(zvec.data(), Z.rows(), Z.cols());
  }
  NetEval ev = forward_eval(net, tensor_from_latents(Z));
  res.relative_fit = (ev.out().data - target.data).norm() / tnorm;
  return res;
}

MatrixXd latent_init_from_courses(const MatrixXd& V, int d) {
  if (d <= 0 || d > V.rows())
    throw std::invalid_argument("latent_init_from_courses: bad dimension");
  MatrixXd C = V.rowwise() - V.colwise().mean();
  Eigen::JacobiSVD<MatrixXd> svd(C, Eigen::ComputeThinU | Eigen::ComputeThinV);
  MatrixXd Z(d, V.rows());
  for (int k = 0; k < d; ++k) {
    VectorXd course = svd.matrixU().col(k);
    Eigen::Index imax;
    course.cwiseAbs().maxCoeff(&imax);
    if (course[imax] < 0.0) course = -course;
    const double rms = std::max(course.norm() / std::sqrt(double(V.rows())),
                                1e-300);
    Z.row(k) = course.transpose() / rms;
  }
  return Z;
}

ReconInit pretrain_init(const MatrixXcd& U0, const MatrixXd& V0, int H, int W,
                        const ReconConfig& cfg, double scale,
                        PretrainResult* spatial_out,
                        PretrainResult* temporal_out) {
  cfg.validate();
  if (scale <= 0.0) throw std::invalid_argument("pretrain_init: bad scale");
  ReconInit init;
  init.U0 = U0;
  init.theta = make_spatial_net(cfg.r, cfg.kernel);
  init.phi = make_temporal_net(cfg.d, cfg.r, cfg.hidden_temporal, cfg.kernel);
  randomize_net(init.theta, cfg.seed + 101);
  randomize_net(init.phi, cfg.seed + 202);

  const MatrixXcd u_scaled = U0 / scale;
  SpatialSeed seed = seed_from_factors(u_scaled, H, W);
  PretrainResult sp =
      pretrain_spatial(init.theta, seed, u_scaled, cfg.pretrain_epochs_spatial,
                       cfg.pretrain_lr, cfg.pretrain_optimizer);
  if (spatial_out) *spatial_out = sp;

  // Weight each temporal course by its spatial column norm so the PCA ranks
  // courses by their energy in image space, not by the arbitrary column
  // scaling of the factorization.
  MatrixXd v_weighted = V0;
  for (Eigen::Index k = 0; k < v_weighted.cols(); ++k)
    v_weighted.col(k) *= U0.col(k).norm();
  init.Z = latent_init_from_courses(v_weighted, cfg.d);
  PretrainResult tp =
      pretrain_temporal(init.phi, init.Z, V0, cfg.pretrain_epochs_temporal,
                        cfg.pretrain_lr, cfg.pretrain_optimizer);
  if (temporal_out) *temporal_out = tp;
  return init;
}

double dataset_norm(const KSpaceDataset& ds) {
  double acc = 0.0;
  for (const auto& frame : ds.samples)
    for (const auto& b : frame) acc += b.squaredNorm();
  return std::sqrt(acc);
}

ReconResult reconstruct(const KSpaceDataset& ds, const ReconConfig& cfg,
                        const ReconInit& init, const ImageSeries* reference) {
  cfg.validate();
  const int H = ds.H, W = ds.W, nf = ds.n_frames();
  if (init.Z.cols() != nf)
    throw std::invalid_argument("reconstruct: Z frame count mismatch");

  const double scale =
      cfg.normalize_data ? std::max(dataset_norm(ds), 1e-300) : 1.0;
  KSpaceDataset work = ds;
  for (auto& frame : work.samples)
    for (auto& b : frame) b /= scale;

  ReconResult res;
  res.theta = init.theta;
  res.phi = init.phi;
  res.Z = init.Z;
  res.scale = scale;
  const SpatialSeed seed{complex_to_channels(init.U0 / scale, H, W)};

  Optimizer opt_theta(cfg.optimizer, cfg.lr_theta);
  Optimizer opt_phi(cfg.optimizer, cfg.lr_phi);
  Optimizer opt_z(cfg.optimizer, cfg.lr_z);
  const bool l1_bias = !cfg.exclude_bias_from_l1;

  std::vector<int> all_frames(nf);
  for (int i = 0; i < nf; ++i) all_frames[i] = i;

  auto record = [&](int epoch, double loss, const MatrixXcd& U,
                    const MatrixXd& V) {
    TraceRow row;
    row.epoch = epoch;
    row.data_loss = loss;
    row.l1_theta = l1_weight_norm(res.theta, l1_bias);
    row.l1_phi = l1_weight_norm(res.phi, l1_bias);
    row.tv_z = nf >= 2 ? temporal_tv(res.Z) : 0.0;
    row.ser_db = std::numeric_limits<double>::quiet_NaN();
    if (reference) {
      FactorPair fp{U * scale, V};
      row.ser_db = series_ser_db(fp, reference->frames, H, W);
    }
    res.trace.rows.push_back(row);
    const bool snap = cfg.z_snapshot_every > 0 &&
                      epoch % cfg.z_snapshot_every == 0;
    if (snap || epoch == 0 || epoch == cfg.epochs)
      res.trace.z_snapshots.emplace_back(epoch, res.Z);
  };

  for (int e = 0; e < cfg.epochs; ++e) {
    // batches are contiguous frame chunks; full batch by default
    const int chunk = cfg.minibatch_frames > 0 ? cfg.minibatch_frames : nf;
    bool recorded = false;
    for (int start = 0; start < nf; start += chunk) {
      std::vector<int> batch(
          all_frames.begin() + start,
          all_frames.begin() + std::min(nf, start + chunk));

      NetEval ev_u = forward_eval(res.theta, seed.data);
      MatrixXcd U = channels_to_complex(ev_u.out());
      ad::Tensor zt = tensor_from_latents(res.Z);
      NetEval ev_v = forward_eval(res.phi, zt);
      MatrixXd V = temporal_out_to_V(ev_v.out());

      DcGradient g = dc_gradient_frames(U, V, work, batch);
      check_finite(g.loss, "reconstruct");
      if (!recorded) {
        // trace rows reflect the state entering the epoch; with the default
        // full batch the loss is the exact epoch loss
        const double loss = (chunk >= nf) ? g.loss : data_loss(U, V, work);
        record(e, loss, U, V);
        recorded = true;
      }

      ev_u.graph.backward(ev_u.output, complex_to_channels(g.gU, H, W));
      ad::Tensor vseed({res.phi.out_channels(), nf});
      for (int j = 0; j < g.gV.cols(); ++j)
        for (int i = 0; i < nf; ++i) vseed.at2(j, i) = g.gV(i, j);
      ev_v.graph.backward(ev_v.output, vseed);

      opt_theta.tick();
      opt_phi.tick();
      opt_z.tick();
      apply_net_update(res.theta, ev_u.parameter_gradients(), opt_theta, 0);
      prox_net(res.theta, opt_theta, cfg.lambda1, l1_bias);
      apply_net_update(res.phi, ev_v.parameter_gradients(), opt_phi, 0);
      prox_net(res.phi, opt_phi, cfg.lambda2, l1_bias);

      MatrixXd gz = latents_from_tensor(ev_v.input_gradient());
      if (cfg.lambda3 > 0.0 && nf >= 2)
        gz += cfg.lambda3 * temporal_tv_subgradient(res.Z);
      Eigen::VectorXd zvec = Eigen::Map<Eigen::VectorXd>(res.Z.data(), res.Z.size());
      Eigen::VectorXd gvec = Eigen::Map<Eigen::VectorXd>(gz.data(), gz.size());
      opt_z.step(0, zvec, gvec);
      res.Z = Eigen::Map<MatrixXd>(zvec.data(), res.Z.rows(), res.Z.cols());
    }
  }

  // final state row + returned factors
  MatrixXcd U = spatial_forward(res.theta, seed);
  MatrixXd V = temporal_forward(res.phi, res.Z);
  record(cfg.epochs, data_loss(U, V, work), U, V);
  res.factors = FactorPair{U * scale, V};
  return res;
}

MatrixXcd frame_synthesis(const MatrixXcd& U, const GeneratorNet& phi,
                          const MatrixXd& Z, int i, int H, int W,
                          const std::optional<VectorXd>& z_override) {
  if (i < 0 || i >= Z.cols())
    throw std::invalid_argument("frame_synthesis: frame index out of range");
  MatrixXd Zi = Z;
  if (z_override) {
    if (z_override->size() != Z.rows())
      throw std::invalid_argument("frame_synthesis: latent dimension mismatch");
    Zi.col(i) = *z_override;
  }
  MatrixXd V = temporal_forward(phi, Zi);
  VectorXcd x = U * V.row(i).transpose();
  return Eigen::Map<const MatrixXcd>(x.data(), H, W);
}

}  // namespace deblur
