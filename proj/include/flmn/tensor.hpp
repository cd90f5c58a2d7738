#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "flmn/errors.hpp"

namespace flmn::diffmath {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Dimension sizes; rank 0 (scalar), 1 (vector) or 2 (matrix).
using Shape = std::vector<int>;

inline std::int64_t numel(const Shape& s) {
  std::int64_t n = 1;
  for (int d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
  os << ']';
  return os.str();
}

// Dense 64-bit value with an explicit shape, stored flat in row-major order.
struct Tensor {
  Shape shape;
  Eigen::VectorXd data;

  Tensor() = default;
  Tensor(Shape s, Eigen::VectorXd d) : shape(std::move(s)), data(std::move(d)) {
    if (numel(shape) != data.size())
      throw GraphError("tensor data length " + std::to_string(data.size()) +
                       " does not match shape " + shape_str(shape));
  }

  static Tensor scalar(double v) {
    Eigen::VectorXd d(1);
    d[0] = v;
    return Tensor(Shape{}, std::move(d));
  }
  static Tensor zeros(const Shape& s) { return Tensor(s, Eigen::VectorXd::Zero(numel(s))); }
  static Tensor full(const Shape& s, double v) {
    return Tensor(s, Eigen::VectorXd::Constant(numel(s), v));
  }
  static Tensor from_vector(const Eigen::VectorXd& v) {
    return Tensor(Shape{static_cast<int>(v.size())}, v);
  }
  static Tensor from_matrix(const Eigen::MatrixXd& m) {
    RowMat rm = m;
    return Tensor(Shape{static_cast<int>(m.rows()), static_cast<int>(m.cols())},
                  Eigen::Map<const Eigen::VectorXd>(rm.data(), rm.size()));
  }

  int rank() const { return static_cast<int>(shape.size()); }
  std::int64_t size() const { return data.size(); }
  int rows() const { return shape.at(0); }
  int cols() const { return shape.at(1); }

  double scalar_value() const {
    if (data.size() != 1) throw GraphError("tensor is not scalar-shaped: " + shape_str(shape));
    return data[0];
  }

  Eigen::Map<const RowMat> as_matrix() const {
    return Eigen::Map<const RowMat>(data.data(), rows(), cols());
  }
  Eigen::Map<RowMat> as_matrix() {
    return Eigen::Map<RowMat>(data.data(), rows(), cols());
  }
  Eigen::MatrixXd to_matrix() const { return as_matrix(); }
  const Eigen::VectorXd& flat() const { return data; }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }
  bool all_finite() const { return data.allFinite(); }
};

}  // namespace flmn::diffmath
