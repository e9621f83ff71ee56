#pragma once

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

#include "xprot/error.hpp"

namespace xprot {

// Dense f64 array, row-major. The empty shape is a scalar (size 1).
// All reductions and matrix products accumulate sequentially in index order
// (leftmost-first), so results are bitwise reproducible across runs.
class Tensor {
 public:
  Tensor() : shape_(), data_(1, 0.0) {}
  explicit Tensor(std::vector<std::size_t> shape);
  Tensor(std::vector<std::size_t> shape, double fill);
  Tensor(std::vector<std::size_t> shape, std::vector<double> data);

  static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor from_vector(std::vector<double> values);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  std::size_t extent(std::size_t axis) const { return shape_.at(axis); }

  // 2-D convenience accessors; rows()/cols() require rank 2.
  std::size_t rows() const;
  std::size_t cols() const;

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& operator()(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  bool all_finite() const;

  Tensor& fill(double value);
  Tensor& scale(double factor);
  Tensor& add(const Tensor& other);          // elementwise +=
  Tensor& sub(const Tensor& other);          // elementwise -=
  Tensor& mul(const Tensor& other);          // elementwise *= (Hadamard)
  Tensor& axpy(double alpha, const Tensor& other);  // this += alpha * other

  std::string shape_string() const;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

enum class Reduce { sum, mean, max };

// Standard matrix product in f64; inner accumulation runs over k ascending.
Tensor matmul(const Tensor& a, const Tensor& b);
// a^T * b and a * b^T without materializing the transpose.
Tensor matmul_tn(const Tensor& a, const Tensor& b);
Tensor matmul_nt(const Tensor& a, const Tensor& b);

Tensor transpose(const Tensor& a);

// Row-wise softmax with max-subtraction. NaN input is rejected.
Tensor softmax_rows(const Tensor& a);

// Drops `axis` from the shape; sum/mean accumulate sequentially in
// ascending index order along the reduced axis.
Tensor reduce(const Tensor& a, std::size_t axis, Reduce kind);

double sum_all(const Tensor& a);
double dot_all(const Tensor& a, const Tensor& b);

}  // namespace xprot
