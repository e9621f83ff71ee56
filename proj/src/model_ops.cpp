#include "xprot/model_ops.hpp"

#include <cmath>

#include "xprot/error.hpp"

namespace xprot::ops {

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  Tensor y = matmul(x, w);
  add_row_vector(y, b);
  return y;
}

Tensor linear_vec(const Tensor& v, const Tensor& w, const Tensor& b) {
  if (v.rank() != 1 || w.rank() != 2 || v.size() != w.rows() || b.size() != w.cols()) {
    throw Error(ErrorCode::dimension_mismatch,
                "linear_vec: shapes " + v.shape_string() + ", " + w.shape_string() + ", " +
                    b.shape_string());
  }
  const std::size_t m = w.rows(), n = w.cols();
  Tensor y({n});
  for (std::size_t j = 0; j < n; ++j) y[j] = b[j];
  for (std::size_t i = 0; i < m; ++i) {
    const double vi = v[i];
    if (vi == 0.0) continue;
    for (std::size_t j = 0; j < n; ++j) y[j] += vi * w(i, j);
  }
  return y;
}

Tensor mat_vec(const Tensor& w, const Tensor& v) {
  if (w.rank() != 2 || v.rank() != 1 || w.cols() != v.size()) {
    throw Error(ErrorCode::dimension_mismatch,
                "mat_vec: shapes " + w.shape_string() + " and " + v.shape_string());
  }
  const std::size_t m = w.rows(), n = w.cols();
  Tensor y({m});
  for (std::size_t i = 0; i < m; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) acc += w(i, j) * v[j];
    y[i] = acc;
  }
  return y;
}

Tensor outer(const Tensor& u, const Tensor& v) {
  if (u.rank() != 1 || v.rank() != 1) {
    throw Error(ErrorCode::dimension_mismatch,
                "outer: shapes " + u.shape_string() + " and " + v.shape_string());
  }
  Tensor y({u.size(), v.size()});
  for (std::size_t i = 0; i < u.size(); ++i) {
    for (std::size_t j = 0; j < v.size(); ++j) y(i, j) = u[i] * v[j];
  }
  return y;
}

Tensor& add_row_vector(Tensor& m, const Tensor& v) {
  if (m.rank() != 2 || v.rank() != 1 || m.cols() != v.size()) {
    throw Error(ErrorCode::dimension_mismatch,
                "add_row_vector: shapes " + m.shape_string() + " and " + v.shape_string());
  }
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) m(i, j) += v[j];
  }
  return m;
}

Tensor col_sum(const Tensor& m) {
  if (m.rank() != 2) {
    throw Error(ErrorCode::dimension_mismatch, "col_sum: expected rank 2, got " + m.shape_string());
  }
  Tensor y({m.cols()});
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) y[j] += m(i, j);
  }
  return y;
}

namespace {

void layer_norm_row(const double* x, double* y, const double* g, const double* b,
                    std::size_t n) {
  double mean = 0.0;
  for (std::size_t j = 0; j < n; ++j) mean += x[j];
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const double d = x[j] - mean;
    var += d * d;
  }
  var /= static_cast<double>(n);
  const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
  for (std::size_t j = 0; j < n; ++j) y[j] = g[j] * (x[j] - mean) * inv + b[j];
}

}  // namespace

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias) {
  const std::size_t n = x.rank() == 1 ? x.size() : x.cols();
  if (gain.size() != n || bias.size() != n) {
    throw Error(ErrorCode::dimension_mismatch,
                "layer_norm: shapes " + x.shape_string() + ", " + gain.shape_string());
  }
  Tensor y(x.shape());
  const std::size_t rows = x.rank() == 1 ? 1 : x.rows();
  for (std::size_t i = 0; i < rows; ++i) {
    layer_norm_row(x.data() + i * n, y.data() + i * n, gain.data(), bias.data(), n);
  }
  return y;
}

LayerNormGrad layer_norm_backward(const Tensor& dy, const Tensor& x, const Tensor& gain) {
  const std::size_t n = x.rank() == 1 ? x.size() : x.cols();
  const std::size_t rows = x.rank() == 1 ? 1 : x.rows();
  LayerNormGrad out;
  out.dx = Tensor(x.shape());
  out.d_gain = Tensor({n});
  out.d_bias = Tensor({n});
  for (std::size_t i = 0; i < rows; ++i) {
    const double* xr = x.data() + i * n;
    const double* dyr = dy.data() + i * n;
    double* dxr = out.dx.data() + i * n;

    double mean = 0.0;
    for (std::size_t j = 0; j < n; ++j) mean += xr[j];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double d = xr[j] - mean;
      var += d * d;
    }
    var /= static_cast<double>(n);
    const double inv = 1.0 / std::sqrt(var + kLayerNormEps);

    double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double xhat = (xr[j] - mean) * inv;
      const double dxhat = dyr[j] * gain[j];
      sum_dxhat += dxhat;
      sum_dxhat_xhat += dxhat * xhat;
      out.d_gain[j] += dyr[j] * xhat;
      out.d_bias[j] += dyr[j];
    }
    const double nd = static_cast<double>(n);
    for (std::size_t j = 0; j < n; ++j) {
      const double xhat = (xr[j] - mean) * inv;
      const double dxhat = dyr[j] * gain[j];
      dxr[j] = inv / nd * (nd * dxhat - sum_dxhat - xhat * sum_dxhat_xhat);
    }
  }
  return out;
}

namespace {
constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;
}  // namespace

Tensor gelu(const Tensor& x) {
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double v = x[i];
    y[i] = 0.5 * v * (1.0 + std::erf(v * kInvSqrt2));
  }
  return y;
}

Tensor gelu_grad(const Tensor& x) {
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double v = x[i];
    y[i] = 0.5 * (1.0 + std::erf(v * kInvSqrt2)) + v * kInvSqrt2Pi * std::exp(-0.5 * v * v);
  }
  return y;
}

Tensor relu(const Tensor& x) {
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
  return y;
}

Tensor softmax_rows_backward(const Tensor& dp, const Tensor& p) {
  if (!dp.same_shape(p)) {
    throw Error(ErrorCode::dimension_mismatch,
                "softmax_rows_backward: shapes " + dp.shape_string() + " and " + p.shape_string());
  }
  Tensor ds(p.shape());
  const std::size_t m = p.rows(), n = p.cols();
  for (std::size_t i = 0; i < m; ++i) {
    double dot = 0.0;
    for (std::size_t j = 0; j < n; ++j) dot += dp(i, j) * p(i, j);
    for (std::size_t j = 0; j < n; ++j) ds(i, j) = p(i, j) * (dp(i, j) - dot);
  }
  return ds;
}

Tensor slice_cols(const Tensor& m, std::size_t start, std::size_t count) {
  if (m.rank() != 2 || start + count > m.cols()) {
    throw Error(ErrorCode::dimension_mismatch,
                "slice_cols: [" + std::to_string(start) + "," + std::to_string(start + count) +
                    ") out of " + m.shape_string());
  }
  Tensor y({m.rows(), count});
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < count; ++j) y(i, j) = m(i, start + j);
  }
  return y;
}

void paste_cols(Tensor& m, const Tensor& block, std::size_t start) {
  if (m.rank() != 2 || block.rank() != 2 || block.rows() != m.rows() ||
      start + block.cols() > m.cols()) {
    throw Error(ErrorCode::dimension_mismatch,
                "paste_cols: block " + block.shape_string() + " at " + std::to_string(start) +
                    " into " + m.shape_string());
  }
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < block.cols(); ++j) m(i, start + j) = block(i, j);
  }
}

std::pair<Tensor, Tensor> head_cut_from_residual_grad(const Tensor& d_r1, const Tensor& wo) {
  return {matmul_nt(d_r1, wo), d_r1};
}

}  // namespace xprot::ops
