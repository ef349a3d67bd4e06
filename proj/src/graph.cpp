#include "deblur/graph.hpp"

#include <stdexcept>

namespace deblur::ad {

namespace {

using RowMat =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMap = Eigen::Map<RowMat>;
using ConstRowMap = Eigen::Map<const RowMat>;

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

// Patch matrix for 2-D "same" convolution: (Cin*k*k) x (H*W), zero padded.
Eigen::MatrixXd im2col2d(const Tensor& in, int k) {
  const int C = in.shape[0], H = in.shape[1], W = in.shape[2];
  const int half = k / 2;
  Eigen::MatrixXd cols = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(C) * k * k,
                                               static_cast<Eigen::Index>(H) * W);
  for (int c = 0; c < C; ++c)
    for (int dy = 0; dy < k; ++dy)
      for (int dx = 0; dx < k; ++dx) {
        const Eigen::Index row = (static_cast<Eigen::Index>(c) * k + dy) * k + dx;
        for (int y = 0; y < H; ++y) {
          const int sy = y + dy - half;
          if (sy < 0 || sy >= H) continue;
          for (int x = 0; x < W; ++x) {
            const int sx = x + dx - half;
            if (sx < 0 || sx >= W) continue;
            cols(row, static_cast<Eigen::Index>(y) * W + x) = in.at3(c, sy, sx);
          }
        }
      }
  return cols;
}

void col2im2d_add(const Eigen::MatrixXd& cols, int k, Tensor& grad) {
  const int C = grad.shape[0], H = grad.shape[1], W = grad.shape[2];
  const int half = k / 2;
  for (int c = 0; c < C; ++c)
    for (int dy = 0; dy < k; ++dy)
      for (int dx = 0; dx < k; ++dx) {
        const Eigen::Index row = (static_cast<Eigen::Index>(c) * k + dy) * k + dx;
        for (int y = 0; y < H; ++y) {
          const int sy = y + dy - half;
          if (sy < 0 || sy >= H) continue;
          for (int x = 0; x < W; ++x) {
            const int sx = x + dx - half;
            if (sx < 0 || sx >= W) continue;
            grad.at3(c, sy, sx) += cols(row, static_cast<Eigen::Index>(y) * W + x);
          }
        }
      }
}

Eigen::MatrixXd im2col1d(const Tensor& in, int k) {
  const int C = in.shape[0], L = in.shape[1];
  const int half = k / 2;
  Eigen::MatrixXd cols =
      Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(C) * k, L);
  for (int c = 0; c < C; ++c)
    for (int d = 0; d < k; ++d) {
      const Eigen::Index row = static_cast<Eigen::Index>(c) * k + d;
      for (int i = 0; i < L; ++i) {
        const int s = i + d - half;
        if (s < 0 || s >= L) continue;
        cols(row, i) = in.at2(c, s);
      }
    }
  return cols;
}

void col2im1d_add(const Eigen::MatrixXd& cols, int k, Tensor& grad) {
  const int C = grad.shape[0], L = grad.shape[1];
  const int half = k / 2;
  for (int c = 0; c < C; ++c)
    for (int d = 0; d < k; ++d) {
      const Eigen::Index row = static_cast<Eigen::Index>(c) * k + d;
      for (int i = 0; i < L; ++i) {
        const int s = i + d - half;
        if (s < 0 || s >= L) continue;
        grad.at2(c, s) += cols(row, i);
      }
    }
}

}  // namespace

NodeId Graph::check_id(NodeId id) const {
  if (id < 0 || id >= static_cast<NodeId>(nodes_.size()))
    throw std::invalid_argument("Graph: invalid node id");
  return id;
}

NodeId Graph::input(Tensor value) {
  require(value.data.allFinite(), "Graph::input: non-finite entries");
  Node n;
  n.kind = OpKind::Input;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size()) - 1;
}

NodeId Graph::conv2d(NodeId x, NodeId weights, NodeId bias) {
  const Tensor& in = nodes_[check_id(x)].value;
  const Tensor& w = nodes_[check_id(weights)].value;
  const Tensor& b = nodes_[check_id(bias)].value;
  require(in.ndim() == 3, "conv2d: input must be [Cin,H,W], got " + in.shape_str());
  require(w.ndim() == 4, "conv2d: weights must be [Cout,Cin,k,k], got " + w.shape_str());
  require(b.ndim() == 1, "conv2d: bias must be [Cout], got " + b.shape_str());
  require(w.shape[2] == w.shape[3] && w.shape[2] % 2 == 1,
          "conv2d: kernel must be square with odd size, got " + w.shape_str());
  require(w.shape[1] == in.shape[0],
          "conv2d: weight Cin " + std::to_string(w.shape[1]) +
              " != input channels " + std::to_string(in.shape[0]));
  require(b.shape[0] == w.shape[0], "conv2d: bias length != Cout");

  const int Cout = w.shape[0], H = in.shape[1], W = in.shape[2], k = w.shape[2];
  Node n;
  n.kind = OpKind::Conv2d;
  n.parents = {x, weights, bias};
  n.cols = im2col2d(in, k);
  n.value = Tensor({Cout, H, W});
  RowMap out(n.value.data.data(), Cout, static_cast<Eigen::Index>(H) * W);
  ConstRowMap wm(w.data.data(), Cout, w.size() / Cout);
  out.noalias() = wm * n.cols;
  out.colwise() += b.data;
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size()) - 1;
}

NodeId Graph::conv1d(NodeId x, NodeId weights, NodeId bias) {
  const Tensor& in = nodes_[check_id(x)].value;
  const Tensor& w = nodes_[check_id(weights)].value;
  const Tensor& b = nodes_[check_id(bias)].value;
  require(in.ndim() == 2, "conv1d: input must be [Cin,L], got " + in.shape_str());
  require(w.ndim() == 3, "conv1d: weights must be [Cout,Cin,k], got " + w.shape_str());
  require(b.ndim() == 1, "conv1d: bias must be [Cout], got " + b.shape_str());
  require(w.shape[2] % 2 == 1, "conv1d: kernel size must be odd");
  require(w.shape[1] == in.shape[0],
          "conv1d: weight Cin " + std::to_string(w.shape[1]) +
              " != input channels " + std::to_string(in.shape[0]));
  require(b.shape[0] == w.shape[0], "conv1d: bias length != Cout");

  const int Cout = w.shape[0], L = in.shape[1], k = w.shape[2];
  Node n;
  n.kind = OpKind::Conv1d;
  n.parents = {x, weights, bias};
  n.cols = im2col1d(in, k);
  n.value = Tensor({Cout, L});
  RowMap out(n.value.data.data(), Cout, L);
  ConstRowMap wm(w.data.data(), Cout, w.size() / Cout);
  out.noalias() = wm * n.cols;
  out.colwise() += b.data;
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size()) - 1;
}

NodeId Graph::relu(NodeId x) {
  const Tensor& in = nodes_[check_id(x)].value;
  Node n;
  n.kind = OpKind::Relu;
  n.parents = {x};
  n.value = Tensor(in.shape, in.data.cwiseMax(0.0));
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size()) - 1;
}

NodeId Graph::add_bias(NodeId x, NodeId bias) {
  const Tensor& in = nodes_[check_id(x)].value;
  const Tensor& b = nodes_[check_id(bias)].value;
  require(b.ndim() == 1 && b.shape[0] == in.shape[0],
          "add_bias: bias length must match leading channel extent");
  Node n;
  n.kind = OpKind::AddBias;
  n.parents = {x, bias};
  n.value = in;
  const Eigen::Index per = in.size() / in.shape[0];
  for (int c = 0; c < in.shape[0]; ++c)
    n.value.data.segment(c * per, per).array() += b.data[c];
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size()) - 1;
}

NodeId Graph::linear_combine(double a, NodeId x, double b, NodeId y) {
  const Tensor& xv = nodes_[check_id(x)].value;
  const Tensor& yv = nodes_[check_id(y)].value;
  require(xv.same_shape(yv), "linear_combine: shape mismatch " + xv.shape_str() +
                                 " vs " + yv.shape_str());
  Node n;
  n.kind = OpKind::LinearCombine;
  n.parents = {x, y};
  n.alpha = a;
  n.beta = b;
  n.value = Tensor(xv.shape, a * xv.data + b * yv.data);
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size()) - 1;
}

void Graph::backward(NodeId out, const Tensor& seed) {
  check_id(out);
  require(seed.same_shape(nodes_[out].value),
          "backward: seed shape " + seed.shape_str() + " != output shape " +
              nodes_[out].value.shape_str());
  for (auto& n : nodes_) n.adjoint = Tensor(n.value.shape);
  nodes_[out].adjoint.data = seed.data;

  for (NodeId id = static_cast<NodeId>(nodes_.size()) - 1; id >= 0; --id) {
    Node& n = nodes_[id];
    switch (n.kind) {
      case OpKind::Input:
        break;
      case OpKind::Relu: {
        Tensor& gx = nodes_[n.parents[0]].adjoint;
        const Tensor& in = nodes_[n.parents[0]].value;
        // subgradient at 0 is 0
        gx.data.array() +=
            n.adjoint.data.array() * (in.data.array() > 0.0).cast<double>();
        break;
      }
      case OpKind::AddBias: {
        Tensor& gx = nodes_[n.parents[0]].adjoint;
        Tensor& gb = nodes_[n.parents[1]].adjoint;
        gx.data += n.adjoint.data;
        const Eigen::Index per = n.value.size() / n.value.shape[0];
        for (int c = 0; c < n.value.shape[0]; ++c)
          gb.data[c] += n.adjoint.data.segment(c * per, per).sum();
        break;
      }
      case OpKind::LinearCombine: {
        nodes_[n.parents[0]].adjoint.data += n.alpha * n.adjoint.data;
        nodes_[n.parents[1]].adjoint.data += n.beta * n.adjoint.data;
        break;
      }
      case OpKind::Conv2d:
      case OpKind::Conv1d: {
        Tensor& gx = nodes_[n.parents[0]].adjoint;
        Tensor& gw = nodes_[n.parents[1]].adjoint;
        Tensor& gb = nodes_[n.parents[2]].adjoint;
        const Tensor& w = nodes_[n.parents[1]].value;
        const int Cout = w.shape[0];
        const Eigen::Index cols_n = n.cols.cols();
        ConstRowMap gout(n.adjoint.data.data(), Cout, cols_n);
        RowMap gwm(gw.data.data(), Cout, gw.size() / Cout);
        gwm.noalias() += gout * n.cols.transpose();
        gb.data += gout.rowwise().sum();
        ConstRowMap wm(w.data.data(), Cout, w.size() / Cout);
        Eigen::MatrixXd gcols = wm.transpose() * gout;
        const int k = w.shape[w.ndim() - 1];
        if (n.kind == OpKind::Conv2d)
          col2im2d_add(gcols, k, gx);
        else
          col2im1d_add(gcols, k, gx);
        break;
      }
    }
  }
}

}  // namespace deblur::ad
