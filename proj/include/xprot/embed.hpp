#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "xprot/attribution.hpp"
#include "xprot/tensor.hpp"

namespace xprot::embed {

struct TsneConfig {
  double perplexity = 30.0;
  double learning_rate = 200.0;
  std::size_t iterations = 1000;
  double early_exaggeration = 12.0;
  std::size_t exaggeration_iters = 250;  // early exaggeration window; momentum
                                         // switches 0.5 -> 0.8 at the same point
  std::uint64_t seed = 0;
};

struct EmbedConfig {
  std::size_t pca_dims = 50;
  TsneConfig tsne;
};

struct FlatMaps {
  Tensor matrix;  // [N x (n_layers * n_heads)], row-major flattening
  std::vector<std::string> ids;
  std::vector<std::string> classes;
};

FlatMaps flatten(const std::vector<attribution::SummedMap>& maps,
                 const std::vector<std::string>& class_labels);

struct PcaResult {
  Tensor scores;                    // [N x k], mean-centered projections
  std::vector<double> eigenvalues;  // all eigenvalues, non-increasing
  Tensor components;                // [d x k], column = component, sign-fixed
  Tensor mean;                      // [d]
};

// Eigendecomposition of the sample covariance (cyclic Jacobi). Component
// signs are fixed so the largest-|coordinate| entry is positive.
PcaResult pca(const Tensor& matrix, std::size_t k);

struct TsneResult {
  Tensor points;                   // [N x 2]
  std::vector<double> kl_history;  // objective per iteration
};

// Exact O(N^2) t-SNE: per-point sigma by binary search on entropy
// (tolerance 1e-5, <= 50 iterations), symmetrized P, Student-t(1) kernel,
// gradient descent with gains and momentum. Deterministic given seed.
TsneResult tsne(const Tensor& scores, const TsneConfig& config);

void emit_scatter(const Tensor& points, const std::vector<std::string>& ids,
                  const std::vector<std::string>& classes, const std::string& csv_path,
                  const std::string& svg_path);

std::string scatter_csv(const Tensor& points, const std::vector<std::string>& ids,
                        const std::vector<std::string>& classes);
std::string scatter_svg(const Tensor& points, const std::vector<std::string>& classes);

// Lloyd k-means with k-means++ seeding; deterministic given seed.
std::vector<std::size_t> kmeans(const Tensor& points, std::size_t k, std::uint64_t seed,
                                std::size_t max_iterations = 100);

// Unadjusted Rand index between two labelings.
double rand_index(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b);

}  // namespace xprot::embed
