#pragma once

#include <Eigen/Dense>
#include <initializer_list>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace deblur::ad {

// Dense row-major tensor of doubles. Shapes are small and fixed per graph;
// all heavy lifting happens through Eigen maps onto the flat storage.
struct Tensor {
  std::vector<int> shape;
  Eigen::VectorXd data;

  Tensor() = default;
  explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
    data = Eigen::VectorXd::Zero(count(shape));
  }
  Tensor(std::vector<int> s, Eigen::VectorXd d)
      : shape(std::move(s)), data(std::move(d)) {
    if (data.size() != count(shape))
      throw std::invalid_argument("Tensor: data length does not match shape");
  }

  static Eigen::Index count(const std::vector<int>& s) {
    Eigen::Index n = 1;
    for (int e : s) {
      if (e <= 0) throw std::invalid_argument("Tensor: nonpositive extent");
      n *= e;
    }
    return n;
  }

  static Tensor zeros(std::vector<int> s) { return Tensor(std::move(s)); }

  Eigen::Index size() const { return data.size(); }
  int ndim() const { return static_cast<int>(shape.size()); }

  double& operator[](Eigen::Index i) { return data[i]; }
  double operator[](Eigen::Index i) const { return data[i]; }

  // [C,H,W] indexing
  double& at3(int c, int y, int x) {
    return data[(static_cast<Eigen::Index>(c) * shape[1] + y) * shape[2] + x];
  }
  double at3(int c, int y, int x) const {
    return data[(static_cast<Eigen::Index>(c) * shape[1] + y) * shape[2] + x];
  }
  // [C,L] indexing
  double& at2(int c, int i) {
    return data[static_cast<Eigen::Index>(c) * shape[1] + i];
  }
  double at2(int c, int i) const {
    return data[static_cast<Eigen::Index>(c) * shape[1] + i];
  }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  std::string shape_str() const {
    std::string s = "[";
    for (size_t i = 0; i < shape.size(); ++i) {
      if (i) s += ",";
      s += std::to_string(shape[i]);
    }
    return s + "]";
  }
};

}  // namespace deblur::ad
