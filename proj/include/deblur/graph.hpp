#pragma once

#include "deblur/tensor.hpp"

#include <vector>

namespace deblur::ad {

enum class OpKind { Input, Conv2d, Conv1d, Relu, AddBias, LinearCombine };

using NodeId = int;

// Reverse-mode graph over exactly the operations the two factor generators
// need. Nodes are appended in topological order; forward values are computed
// eagerly at construction and cached, backward() fills the adjoints.
class Graph {
 public:
  NodeId input(Tensor value);

  // input [Cin,H,W], weights [Cout,Cin,k,k] (k odd), bias [Cout];
  // zero "same" padding, stride 1 -> output [Cout,H,W]
  NodeId conv2d(NodeId x, NodeId weights, NodeId bias);

  // input [Cin,L], weights [Cout,Cin,k], bias [Cout] -> [Cout,L]
  NodeId conv1d(NodeId x, NodeId weights, NodeId bias);

  NodeId relu(NodeId x);

  // x [C,...] + per-channel bias [C]
  NodeId add_bias(NodeId x, NodeId bias);

  // a*x + b*y, shapes equal
  NodeId linear_combine(double a, NodeId x, double b, NodeId y);

  const Tensor& value(NodeId id) const { return nodes_[id].value; }
  const Tensor& adjoint(NodeId id) const { return nodes_[id].adjoint; }

  // Reverse sweep seeding d(scalar objective)/d(value(out)) = seed.
  // Accumulates adjoints for every node reachable from the inputs.
  void backward(NodeId out, const Tensor& seed);

  int node_count() const { return static_cast<int>(nodes_.size()); }

 private:
  struct Node {
    OpKind kind;
    std::vector<NodeId> parents;
    Tensor value;
    Tensor adjoint;
    double alpha = 0.0, beta = 0.0;  // linear_combine coefficients
    Eigen::MatrixXd cols;            // cached im2col patches for conv backward
  };

  NodeId check_id(NodeId id) const;
  std::vector<Node> nodes_;
};

}  // namespace deblur::ad
