#include "deblur/operators.hpp"

#include <cmath>
#include <stdexcept>

namespace deblur {

namespace {
constexpr double kPi = 3.141592653589793238462643383279502884;
}

PointList TrajectorySchedule::spoke_points(double angle) const {
  PointList pts(n_readout, 2);
  const double c = std::cos(angle), s = std::sin(angle);
  for (int k = 0; k < n_readout; ++k) {
    const double t = -kPi + 2.0 * kPi * k / n_readout;
    pts(k, 0) = t * c;
    pts(k, 1) = t * s;
  }
  return pts;
}

PointList TrajectorySchedule::frame_points(int frame) const {
  const auto& spokes = frames.at(frame);
  PointList pts(static_cast<Eigen::Index>(spokes.size()) * n_readout, 2);
  for (size_t j = 0; j < spokes.size(); ++j)
    pts.middleRows(static_cast<Eigen::Index>(j) * n_readout, n_readout) =
        spoke_points(spokes[j].angle);
  return pts;
}

Eigen::Index KSpaceDataset::frame_sample_count(int frame) const {
  if (mode == SamplingMode::Radial)
    return static_cast<Eigen::Index>(schedule.frames.at(frame).size()) *
           schedule.n_readout;
  return mask_count(masks.at(frame));
}

void KSpaceDataset::validate() const {
  if (coils.height() != H || coils.width() != W)
    throw std::invalid_argument("KSpaceDataset: coil map shape mismatch");
  if (static_cast<int>(samples.size()) == 0)
    throw std::invalid_argument("KSpaceDataset: no frames");
  for (int i = 0; i < n_frames(); ++i) {
    if (static_cast<int>(samples[i].size()) != n_coils())
      throw std::invalid_argument("KSpaceDataset: coil count mismatch");
    for (const auto& s : samples[i])
      if (s.size() != frame_sample_count(i))
        throw std::invalid_argument(
            "KSpaceDataset: sample count does not match schedule");
  }
}

VectorXcd KSpaceDataset::navigator_samples(int frame) const {
  std::vector<std::pair<Eigen::Index, Eigen::Index>> spans;  // offset, length
  if (mode == SamplingMode::Radial) {
    const auto& spokes = schedule.frames.at(frame);
    Eigen::Index off = 0;
    for (const auto& sp : spokes) {
      if (sp.navigator) spans.emplace_back(off, schedule.n_readout);
      off += schedule.n_readout;
    }
  } else {
    if (nav_rows.empty())
      throw std::invalid_argument("navigator_samples: dataset has no navigators");
    const Mask& m = masks.at(frame);
    Eigen::Index off = 0;
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      for (Eigen::Index i = 0; i < m.rows(); ++i) {
        if (!m(i, j)) continue;
        for (int row : nav_rows)
          if (i == row) spans.emplace_back(off, 1);
        ++off;
      }
  }
  if (spans.empty())
    throw std::invalid_argument("navigator_samples: frame has no navigators");
  Eigen::Index total = 0;
  for (auto& sp : spans) total += sp.second;
  VectorXcd out(total * n_coils());
  Eigen::Index n = 0;
  for (int c = 0; c < n_coils(); ++c)
    for (auto& sp : spans) {
      out.segment(n, sp.second) = samples[frame][c].segment(sp.first, sp.second);
      n += sp.second;
    }
  return out;
}

FrameOp::FrameOp(const KSpaceDataset& ds, int frame) : mode_(ds.mode) {
  if (mode_ == SamplingMode::Radial) {
    plan_ = make_nudft_plan(ds.schedule.frame_points(frame), ds.H, ds.W);
    count_ = plan_.Fx.cols();
  } else {
    mask_ = &ds.masks.at(frame);
    count_ = mask_count(*mask_);
  }
}

VectorXcd FrameOp::forward(const MatrixXcd& image) const {
  return mode_ == SamplingMode::Radial ? plan_.forward(image)
                                       : masked_fft_forward(image, *mask_);
}

MatrixXcd FrameOp::adjoint(const VectorXcd& samples) const {
  return mode_ == SamplingMode::Radial ? plan_.adjoint(samples)
                                       : masked_fft_adjoint(samples, *mask_);
}

Eigen::Map<const MatrixXcd> as_image(const VectorXcd& flat, int H, int W) {
  if (flat.size() != static_cast<Eigen::Index>(H) * W)
    throw std::invalid_argument("as_image: length != H*W");
  return Eigen::Map<const MatrixXcd>(flat.data(), H, W);
}

std::vector<VectorXcd> frame_measure(const MatrixXcd& U, const VectorXd& v,
                                     const CoilMaps& coils, const FrameOp& op) {
  if (U.cols() != v.size())
    throw std::invalid_argument("frame_measure: factor rank mismatch");
  const int H = coils.height(), W = coils.width();
  VectorXcd xi = U * v;
  auto img = as_image(xi, H, W);
  std::vector<VectorXcd> out;
  out.reserve(coils.maps.size());
  for (const auto& s : coils.maps)
    out.push_back(op.forward(s.cwiseProduct(img)));
  return out;
}

DcGradient dc_gradient(const MatrixXcd& U, const MatrixXd& V,
                       const KSpaceDataset& ds) {
  std::vector<int> frames(ds.n_frames());
  for (int i = 0; i < ds.n_frames(); ++i) frames[i] = i;
  return dc_gradient_frames(U, V, ds, frames);
}

DcGradient dc_gradient_frames(const MatrixXcd& U, const MatrixXd& V,
                              const KSpaceDataset& ds,
                              const std::vector<int>& frames) {
  const int H = ds.H, W = ds.W;
  const int nf = ds.n_frames(), nc = ds.n_coils();
  const Eigen::Index r = U.cols();
  if (V.rows() != nf || V.cols() != r)
    throw std::invalid_argument("dc_gradient: V shape mismatch");

  DcGradient g;
  g.gU = MatrixXcd::Zero(U.rows(), r);
  g.gV = MatrixXd::Zero(nf, r);
  for (int i : frames) {
    FrameOp op(ds, i);
    VectorXcd xi = U * V.row(i).transpose();
    auto img = as_image(xi, H, W);
    MatrixXcd acc = MatrixXcd::Zero(H, W);
    for (int c = 0; c < nc; ++c) {
      VectorXcd res = op.forward(ds.coils.maps[c].cwiseProduct(img)) -
                      ds.samples[i][c];
      g.loss += res.squaredNorm();
      acc += ds.coils.maps[c].conjugate().cwiseProduct(op.adjoint(res));
    }
    Eigen::Map<const VectorXcd> a(acc.data(), acc.size());
    g.gU.noalias() += 2.0 * a * V.row(i);
    g.gV.row(i) = 2.0 * (U.adjoint() * a).real();
  }
  return g;
}

MatrixXcd normal_apply(const MatrixXcd& U, const MatrixXd& V,
                       const KSpaceDataset& ds) {
  const int H = ds.H, W = ds.W;
  MatrixXcd out = MatrixXcd::Zero(U.rows(), U.cols());
  for (int i = 0; i < ds.n_frames(); ++i) {
    FrameOp op(ds, i);
    VectorXcd xi = U * V.row(i).transpose();
    auto img = as_image(xi, H, W);
    MatrixXcd acc = MatrixXcd::Zero(H, W);
    for (int c = 0; c < ds.n_coils(); ++c)
      acc += ds.coils.maps[c].conjugate().cwiseProduct(
          op.adjoint(op.forward(ds.coils.maps[c].cwiseProduct(img))));
    Eigen::Map<const VectorXcd> a(acc.data(), acc.size());
    out.noalias() += a * V.row(i);
  }
  return out;
}

MatrixXcd adjoint_times_data(const MatrixXd& V, const KSpaceDataset& ds) {
  const int H = ds.H, W = ds.W;
  MatrixXcd out = MatrixXcd::Zero(static_cast<Eigen::Index>(H) * W, V.cols());
  for (int i = 0; i < ds.n_frames(); ++i) {
    FrameOp op(ds, i);
    MatrixXcd acc = MatrixXcd::Zero(H, W);
    for (int c = 0; c < ds.n_coils(); ++c)
      acc += ds.coils.maps[c].conjugate().cwiseProduct(
          op.adjoint(ds.samples[i][c]));
    Eigen::Map<const VectorXcd> a(acc.data(), acc.size());
    out.noalias() += a * V.row(i);
  }
  return out;
}

double data_loss(const MatrixXcd& U, const MatrixXd& V, const KSpaceDataset& ds) {
  const int H = ds.H, W = ds.W;
  double loss = 0.0;
  for (int i = 0; i < ds.n_frames(); ++i) {
    FrameOp op(ds, i);
    VectorXcd xi = U * V.row(i).transpose();
    auto img = as_image(xi, H, W);
    for (int c = 0; c < ds.n_coils(); ++c)
      loss += (op.forward(ds.coils.maps[c].cwiseProduct(img)) -
               ds.samples[i][c])
                  .squaredNorm();
  }
  return loss;
}

}  // namespace deblur
