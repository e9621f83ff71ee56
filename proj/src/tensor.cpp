#include "xprot/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace xprot {

namespace {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t e : shape) n *= e;
  return n;
}

[[noreturn]] void throw_shape_mismatch(const char* op, const Tensor& a, const Tensor& b) {
  throw Error(ErrorCode::dimension_mismatch,
              std::string(op) + ": incompatible shapes " + a.shape_string() + " and " +
                  b.shape_string());
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), data_(shape_product(shape_), 0.0) {}

Tensor::Tensor(std::vector<std::size_t> shape, double fill)
    : shape_(std::move(shape)), data_(shape_product(shape_), fill) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != shape_product(shape_)) {
    throw Error(ErrorCode::dimension_mismatch,
                "tensor data length " + std::to_string(data_.size()) +
                    " does not match shape " + shape_string());
  }
}

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  std::size_t r = rows.size();
  std::size_t c = r == 0 ? 0 : rows.begin()->size();
  Tensor t({r, c});
  std::size_t i = 0;
  for (const auto& row : rows) {
    if (row.size() != c) {
      throw Error(ErrorCode::dimension_mismatch, "from_rows: ragged rows");
    }
    for (double v : row) t.data_[i++] = v;
  }
  return t;
}

Tensor Tensor::from_vector(std::vector<double> values) {
  std::vector<std::size_t> shape{values.size()};
  return Tensor(std::move(shape), std::move(values));
}

std::size_t Tensor::rows() const {
  if (rank() != 2) {
    throw Error(ErrorCode::dimension_mismatch, "rows(): tensor is not rank 2, shape " + shape_string());
  }
  return shape_[0];
}

std::size_t Tensor::cols() const {
  if (rank() != 2) {
    throw Error(ErrorCode::dimension_mismatch, "cols(): tensor is not rank 2, shape " + shape_string());
  }
  return shape_[1];
}

bool Tensor::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

Tensor& Tensor::fill(double value) {
  std::fill(data_.begin(), data_.end(), value);
  return *this;
}

Tensor& Tensor::scale(double factor) {
  for (double& v : data_) v *= factor;
  return *this;
}

Tensor& Tensor::add(const Tensor& other) {
  if (!same_shape(other)) throw_shape_mismatch("add", *this, other);
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Tensor& Tensor::sub(const Tensor& other) {
  if (!same_shape(other)) throw_shape_mismatch("sub", *this, other);
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
  return *this;
}

Tensor& Tensor::mul(const Tensor& other) {
  if (!same_shape(other)) throw_shape_mismatch("mul", *this, other);
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] *= other.data_[i];
  return *this;
}

Tensor& Tensor::axpy(double alpha, const Tensor& other) {
  if (!same_shape(other)) throw_shape_mismatch("axpy", *this, other);
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += alpha * other.data_[i];
  return *this;
}

std::string Tensor::shape_string() const {
  std::ostringstream out;
  out << "[";
  for (std::size_t i = 0; i < shape_.size(); ++i) {
    if (i) out << "x";
    out << shape_[i];
  }
  out << "]";
  return out.str();
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.rows()) {
    throw_shape_mismatch("matmul", a, b);
  }
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  Tensor out({m, n});
  const double* pa = a.data();
  const double* pb = b.data();
  double* po = out.data();
  // i-k-j order: each out[i][j] accumulates over k ascending, contiguous in b.
  for (std::size_t i = 0; i < m; ++i) {
    double* orow = po + i * n;
    for (std::size_t kk = 0; kk < k; ++kk) {
      const double av = pa[i * k + kk];
      if (av == 0.0) continue;
      const double* brow = pb + kk * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
  return out;
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.rows() != b.rows()) {
    throw_shape_mismatch("matmul_tn", a, b);
  }
  const std::size_t m = a.cols(), k = a.rows(), n = b.cols();
  Tensor out({m, n});
  const double* pa = a.data();
  const double* pb = b.data();
  double* po = out.data();
  for (std::size_t kk = 0; kk < k; ++kk) {
    const double* arow = pa + kk * m;
    const double* brow = pb + kk * n;
    for (std::size_t i = 0; i < m; ++i) {
      const double av = arow[i];
      if (av == 0.0) continue;
      double* orow = po + i * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
  return out;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.cols()) {
    throw_shape_mismatch("matmul_nt", a, b);
  }
  const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
  Tensor out({m, n});
  const double* pa = a.data();
  const double* pb = b.data();
  double* po = out.data();
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = pa + i * k;
    double* orow = po + i * n;
    for (std::size_t j = 0; j < n; ++j) {
      const double* brow = pb + j * k;
      double acc = 0.0;
      for (std::size_t kk = 0; kk < k; ++kk) acc += arow[kk] * brow[kk];
      orow[j] = acc;
    }
  }
  return out;
}

Tensor transpose(const Tensor& a) {
  if (a.rank() != 2) {
    throw Error(ErrorCode::dimension_mismatch, "transpose: expected rank 2, got " + a.shape_string());
  }
  const std::size_t m = a.rows(), n = a.cols();
  Tensor out({n, m});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out(j, i) = a(i, j);
  }
  return out;
}

Tensor softmax_rows(const Tensor& a) {
  if (a.rank() != 2) {
    throw Error(ErrorCode::dimension_mismatch, "softmax_rows: expected rank 2, got " + a.shape_string());
  }
  const std::size_t m = a.rows(), n = a.cols();
  Tensor out({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      const double v = a(i, j);
      if (std::isnan(v)) {
        throw Error(ErrorCode::numeric_failure, "softmax_rows: NaN in row " + std::to_string(i));
      }
      mx = std::max(mx, v);
    }
    double denom = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double e = std::exp(a(i, j) - mx);
      out(i, j) = e;
      denom += e;
    }
    for (std::size_t j = 0; j < n; ++j) out(i, j) /= denom;
  }
  return out;
}

Tensor reduce(const Tensor& a, std::size_t axis, Reduce kind) {
  if (axis >= a.rank()) {
    throw Error(ErrorCode::invalid_argument,
                "reduce: axis " + std::to_string(axis) + " out of range for shape " + a.shape_string());
  }
  const auto& shape = a.shape();
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) inner *= shape[i];
  const std::size_t mid = shape[axis];

  std::vector<std::size_t> out_shape;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i != axis) out_shape.push_back(shape[i]);
  }
  Tensor out(out_shape);
  const double* pa = a.data();
  double* po = out.data();
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const double* base = pa + o * mid * inner + in;
      double acc;
      if (kind == Reduce::max) {
        acc = base[0];
        for (std::size_t m = 1; m < mid; ++m) acc = std::max(acc, base[m * inner]);
      } else {
        acc = 0.0;
        for (std::size_t m = 0; m < mid; ++m) acc += base[m * inner];
        if (kind == Reduce::mean) acc /= static_cast<double>(mid);
      }
      po[o * inner + in] = acc;
    }
  }
  return out;
}

double sum_all(const Tensor& a) {
  const double* p = a.data();
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += p[i];
  return acc;
}

double dot_all(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) {
    throw Error(ErrorCode::dimension_mismatch,
                "dot_all: incompatible shapes " + a.shape_string() + " and " + b.shape_string());
  }
  const double* pa = a.data();
  const double* pb = b.data();
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += pa[i] * pb[i];
  return acc;
}

}  // namespace xprot
