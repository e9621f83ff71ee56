#include "xprot/embed.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "xprot/error.hpp"
#include "xprot/rng.hpp"

namespace xprot::embed {

FlatMaps flatten(const std::vector<attribution::SummedMap>& maps,
                 const std::vector<std::string>& class_labels) {
  if (maps.empty()) {
    throw Error(ErrorCode::empty_result, "flatten: no maps");
  }
  if (class_labels.size() != maps.size()) {
    throw Error(ErrorCode::dimension_mismatch, "flatten: class label count mismatch");
  }
  const auto shape = maps.front().values.shape();
  FlatMaps out;
  out.matrix = Tensor({maps.size(), maps.front().values.size()});
  for (std::size_t i = 0; i < maps.size(); ++i) {
    if (maps[i].values.shape() != shape) {
      throw Error(ErrorCode::dimension_mismatch,
                  "flatten: heterogeneous map shapes (" + maps[i].values.shape_string() + ")");
    }
    for (std::size_t j = 0; j < maps[i].values.size(); ++j) {
      out.matrix(i, j) = maps[i].values[j];
    }
    out.ids.push_back(maps[i].protein_id);
    out.classes.push_back(class_labels[i]);
  }
  return out;
}

namespace {

// Cyclic Jacobi eigendecomposition of a symmetric matrix. Eigenvalues land
// on the diagonal; V accumulates the rotations (columns = eigenvectors).
void jacobi_eigen(Tensor& a, Tensor& v, std::size_t n) {
  v = Tensor({n, n});
  for (std::size_t i = 0; i < n; ++i) v(i, i) = 1.0;
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    }
    if (off < 1e-24) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (std::fabs(apq) < 1e-300) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t i = 0; i < n; ++i) {
          const double aip = a(i, p), aiq = a(i, q);
          a(i, p) = c * aip - s * aiq;
          a(i, q) = s * aip + c * aiq;
        }
        for (std::size_t i = 0; i < n; ++i) {
          const double api = a(p, i), aqi = a(q, i);
          a(p, i) = c * api - s * aqi;
          a(q, i) = s * api + c * aqi;
        }
        for (std::size_t i = 0; i < n; ++i) {
          const double vip = v(i, p), viq = v(i, q);
          v(i, p) = c * vip - s * viq;
          v(i, q) = s * vip + c * viq;
        }
      }
    }
  }
}

}  // namespace

PcaResult pca(const Tensor& matrix, std::size_t k) {
  const std::size_t n = matrix.rows(), d = matrix.cols();
  if (n < 2) {
    throw Error(ErrorCode::invalid_argument, "pca: need at least 2 rows");
  }
  if (k == 0 || k > d || k > n - 1) {
    throw Error(ErrorCode::invalid_argument,
                "pca: k = " + std::to_string(k) + " exceeds min(N-1, dims) = " +
                    std::to_string(std::min(n - 1, d)));
  }
  PcaResult out;
  out.mean = Tensor({d});
  for (std::size_t j = 0; j < d; ++j) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += matrix(i, j);
    out.mean[j] = acc / static_cast<double>(n);
  }
  Tensor centered({n, d});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) centered(i, j) = matrix(i, j) - out.mean[j];
  }
  Tensor cov = matmul_tn(centered, centered);
  cov.scale(1.0 / static_cast<double>(n - 1));

  Tensor v;
  jacobi_eigen(cov, v, d);

  std::vector<std::size_t> order(d);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return cov(a, a) > cov(b, b); });

  out.eigenvalues.resize(d);
  for (std::size_t j = 0; j < d; ++j) out.eigenvalues[j] = cov(order[j], order[j]);

  out.components = Tensor({d, k});
  for (std::size_t j = 0; j < k; ++j) {
    const std::size_t src = order[j];
    // Sign fix: the largest-magnitude coordinate becomes positive.
    std::size_t arg = 0;
    for (std::size_t i = 1; i < d; ++i) {
      if (std::fabs(v(i, src)) > std::fabs(v(arg, src))) arg = i;
    }
    const double sign = v(arg, src) >= 0.0 ? 1.0 : -1.0;
    for (std::size_t i = 0; i < d; ++i) out.components(i, j) = sign * v(i, src);
  }
  out.scores = matmul(centered, out.components);
  return out;
}

namespace {

void pairwise_squared_distances(const Tensor& x, Tensor& dd) {
  const std::size_t n = x.rows(), d = x.cols();
  for (std::size_t i = 0; i < n; ++i) {
    dd(i, i) = 0.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t c = 0; c < d; ++c) {
        const double diff = x(i, c) - x(j, c);
        acc += diff * diff;
      }
      dd(i, j) = acc;
      dd(j, i) = acc;
    }
  }
}

// Row-conditional affinities: binary search on the Gaussian precision beta
// until the row entropy matches log(perplexity) within 1e-5, <= 50 rounds.
void gaussian_affinities(const Tensor& dd, double perplexity, Tensor& p) {
  const std::size_t n = dd.rows();
  const double target_entropy = std::log(perplexity);
  for (std::size_t i = 0; i < n; ++i) {
    double beta = 1.0;
    double beta_min = -std::numeric_limits<double>::max();
    double beta_max = std::numeric_limits<double>::max();
    double sum_p = 0.0;
    for (int round = 0; round < 50; ++round) {
      sum_p = std::numeric_limits<double>::min();
      double h_acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const double pij = i == j ? 0.0 : std::exp(-beta * dd(i, j));
        p(i, j) = pij;
        sum_p += pij;
        h_acc += beta * dd(i, j) * pij;
      }
      const double entropy = h_acc / sum_p + std::log(sum_p);
      const double diff = entropy - target_entropy;
      if (std::fabs(diff) < 1e-5) break;
      if (diff > 0.0) {
        beta_min = beta;
        beta = beta_max == std::numeric_limits<double>::max() ? beta * 2.0
                                                              : 0.5 * (beta + beta_max);
      } else {
        beta_max = beta;
        beta = beta_min == -std::numeric_limits<double>::max() ? beta / 2.0
                                                               : 0.5 * (beta + beta_min);
      }
    }
    for (std::size_t j = 0; j < n; ++j) p(i, j) /= sum_p;
  }
}

double kl_divergence(const Tensor& p, const Tensor& y) {
  const std::size_t n = y.rows();
  Tensor dd({n, n});
  pairwise_squared_distances(y, dd);
  double sum_q = std::numeric_limits<double>::min();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j) sum_q += 1.0 / (1.0 + dd(i, j));
    }
  }
  double kl = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double pij = p(i, j);
      if (pij <= 0.0) continue;
      const double qij = (1.0 / (1.0 + dd(i, j))) / sum_q;
      kl += pij * std::log(pij / std::max(qij, 1e-300));
    }
  }
  return kl;
}

}  // namespace

TsneResult tsne(const Tensor& scores, const TsneConfig& config) {
  const std::size_t n = scores.rows();
  if (static_cast<double>(n) < 3.0 * config.perplexity + 1.0) {
    throw Error(ErrorCode::invalid_argument,
                "tsne: need at least " +
                    std::to_string(static_cast<std::size_t>(3.0 * config.perplexity + 1.0)) +
                    " rows for perplexity " + std::to_string(config.perplexity));
  }
  Tensor dd({n, n});
  pairwise_squared_distances(scores, dd);
  bool all_identical = true;
  for (std::size_t i = 0; i < n && all_identical; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (dd(i, j) != 0.0) {
        all_identical = false;
        break;
      }
    }
  }
  if (all_identical) {
    throw Error(ErrorCode::invalid_argument, "tsne: all rows identical, affinities degenerate");
  }

  Tensor p({n, n});
  gaussian_affinities(dd, config.perplexity, p);
  // Symmetrize: P = (P + P^T) / (2N), then apply early exaggeration.
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = (p(i, j) + p(j, i)) / (2.0 * static_cast<double>(n));
      p(i, j) = v;
      p(j, i) = v;
    }
    p(i, i) = 0.0;
  }
  for (std::size_t i = 0; i < p.size(); ++i) p[i] *= config.early_exaggeration;

  Rng rng(config.seed);
  Tensor y({n, 2});
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = rng.normal() * 1e-4;
  Tensor velocity({n, 2});
  Tensor gains({n, 2}, 1.0);
  Tensor grad({n, 2});
  Tensor q_num({n, n});

  TsneResult out;
  out.kl_history.reserve(config.iterations);
  double momentum = 0.5;

  for (std::size_t iter = 0; iter < config.iterations; ++iter) {
    if (iter == config.exaggeration_iters) {
      for (std::size_t i = 0; i < p.size(); ++i) p[i] /= config.early_exaggeration;
      momentum = 0.8;
    }

    pairwise_squared_distances(y, dd);
    double sum_q = std::numeric_limits<double>::min();
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (i == j) {
          q_num(i, j) = 0.0;
          continue;
        }
        const double v = 1.0 / (1.0 + dd(i, j));
        q_num(i, j) = v;
        sum_q += v;
      }
    }

    grad.fill(0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (i == j) continue;
        const double mult = (p(i, j) - q_num(i, j) / sum_q) * q_num(i, j);
        for (std::size_t c = 0; c < 2; ++c) {
          grad(i, c) += 4.0 * mult * (y(i, c) - y(j, c));
        }
      }
    }

    for (std::size_t i = 0; i < y.size(); ++i) {
      const bool same_sign = (grad[i] > 0.0) == (velocity[i] > 0.0);
      gains[i] = std::max(0.01, same_sign ? gains[i] * 0.8 : gains[i] + 0.2);
      velocity[i] = momentum * velocity[i] - config.learning_rate * gains[i] * grad[i];
      y[i] += velocity[i];
    }
    // Re-center.
    for (std::size_t c = 0; c < 2; ++c) {
      double mean = 0.0;
      for (std::size_t i = 0; i < n; ++i) mean += y(i, c);
      mean /= static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i) y(i, c) -= mean;
    }

    out.kl_history.push_back(kl_divergence(p, y));
  }
  out.points = std::move(y);
  return out;
}

std::string scatter_csv(const Tensor& points, const std::vector<std::string>& ids,
                        const std::vector<std::string>& classes) {
  if (points.rows() != ids.size() || ids.size() != classes.size()) {
    throw Error(ErrorCode::dimension_mismatch, "scatter_csv: length mismatch");
  }
  std::ostringstream out;
  out << "protein_id,class,x,y\n";
  char buf[64];
  for (std::size_t i = 0; i < points.rows(); ++i) {
    out << ids[i] << "," << classes[i];
    std::snprintf(buf, sizeof(buf), ",%.17g,%.17g", points(i, 0), points(i, 1));
    out << buf << "\n";
  }
  return out.str();
}

namespace {

const std::vector<std::string>& palette() {
  static const std::vector<std::string> colors = {
      "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
      "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  return colors;
}

}  // namespace

std::string scatter_svg(const Tensor& points, const std::vector<std::string>& classes) {
  if (points.rows() != classes.size()) {
    throw Error(ErrorCode::dimension_mismatch, "scatter_svg: length mismatch");
  }
  std::vector<std::string> class_order;
  for (const auto& c : classes) {
    if (std::find(class_order.begin(), class_order.end(), c) == class_order.end()) {
      class_order.push_back(c);
    }
  }
  std::sort(class_order.begin(), class_order.end());

  const double width = 640.0, height = 640.0, margin = 40.0;
  double min_x = points(0, 0), max_x = points(0, 0);
  double min_y = points(0, 1), max_y = points(0, 1);
  for (std::size_t i = 0; i < points.rows(); ++i) {
    min_x = std::min(min_x, points(i, 0));
    max_x = std::max(max_x, points(i, 0));
    min_y = std::min(min_y, points(i, 1));
    max_y = std::max(max_y, points(i, 1));
  }
  const double span_x = std::max(max_x - min_x, 1e-12);
  const double span_y = std::max(max_y - min_y, 1e-12);

  std::ostringstream out;
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
  out << "  <rect width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";
  char buf[128];
  for (std::size_t i = 0; i < points.rows(); ++i) {
    const double cx = margin + (points(i, 0) - min_x) / span_x * (width - 2 * margin);
    const double cy = height - margin - (points(i, 1) - min_y) / span_y * (height - 2 * margin);
    const std::size_t cls =
        std::find(class_order.begin(), class_order.end(), classes[i]) - class_order.begin();
    const std::string& color = palette()[cls % palette().size()];
    std::snprintf(buf, sizeof(buf), "  <circle cx=\"%.3f\" cy=\"%.3f\" r=\"4\" fill=\"%s\"/>\n",
                  cx, cy, color.c_str());
    out << buf;
  }
  for (std::size_t c = 0; c < class_order.size(); ++c) {
    const double ly = margin + 18.0 * static_cast<double>(c);
    std::snprintf(buf, sizeof(buf),
                  "  <circle cx=\"%.1f\" cy=\"%.1f\" r=\"5\" fill=\"%s\"/>\n", width - margin - 90.0,
                  ly, palette()[c % palette().size()].c_str());
    out << buf;
    out << "  <text x=\"" << width - margin - 80.0 << "\" y=\"" << ly + 4.0
        << "\" font-family=\"sans-serif\" font-size=\"12\">" << class_order[c] << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

void emit_scatter(const Tensor& points, const std::vector<std::string>& ids,
                  const std::vector<std::string>& classes, const std::string& csv_path,
                  const std::string& svg_path) {
  std::ofstream csv(csv_path, std::ios::binary | std::ios::trunc);
  if (!csv) {
    throw Error(ErrorCode::io_error, "emit_scatter: cannot write " + csv_path);
  }
  csv << scatter_csv(points, ids, classes);
  std::ofstream svg(svg_path, std::ios::binary | std::ios::trunc);
  if (!svg) {
    throw Error(ErrorCode::io_error, "emit_scatter: cannot write " + svg_path);
  }
  svg << scatter_svg(points, classes);
}

std::vector<std::size_t> kmeans(const Tensor& points, std::size_t k, std::uint64_t seed,
                                std::size_t max_iterations) {
  const std::size_t n = points.rows(), d = points.cols();
  if (k == 0 || k > n) {
    throw Error(ErrorCode::invalid_argument, "kmeans: invalid k");
  }
  Rng rng(seed);
  // k-means++ seeding.
  std::vector<std::size_t> centers{static_cast<std::size_t>(rng.below(n))};
  std::vector<double> dist2(n, std::numeric_limits<double>::max());
  auto sq_dist = [&](std::size_t i, std::size_t j) {
    double acc = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      const double diff = points(i, c) - points(j, c);
      acc += diff * diff;
    }
    return acc;
  };
  while (centers.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      dist2[i] = std::min(dist2[i], sq_dist(i, centers.back()));
      total += dist2[i];
    }
    double pick = rng.next_double() * total;
    std::size_t chosen = n - 1;
    for (std::size_t i = 0; i < n; ++i) {
      pick -= dist2[i];
      if (pick <= 0.0) {
        chosen = i;
        break;
      }
    }
    centers.push_back(chosen);
  }

  Tensor centroids({k, d});
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t j = 0; j < d; ++j) centroids(c, j) = points(centers[c], j);
  }
  std::vector<std::size_t> assignment(n, 0);
  for (std::size_t iter = 0; iter < max_iterations; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = 0;
      double best_d = std::numeric_limits<double>::max();
      for (std::size_t c = 0; c < k; ++c) {
        double acc = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
          const double diff = points(i, j) - centroids(c, j);
          acc += diff * diff;
        }
        if (acc < best_d) {
          best_d = acc;
          best = c;
        }
      }
      if (assignment[i] != best) {
        assignment[i] = best;
        changed = true;
      }
    }
    if (!changed && iter > 0) break;
    centroids.fill(0.0);
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      ++counts[assignment[i]];
      for (std::size_t j = 0; j < d; ++j) centroids(assignment[i], j) += points(i, j);
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;
      for (std::size_t j = 0; j < d; ++j) centroids(c, j) /= static_cast<double>(counts[c]);
    }
  }
  return assignment;
}

double rand_index(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
  if (a.size() != b.size() || a.size() < 2) {
    throw Error(ErrorCode::invalid_argument, "rand_index: need two labelings of equal size >= 2");
  }
  std::size_t agree = 0, total = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = i + 1; j < a.size(); ++j) {
      const bool same_a = a[i] == a[j];
      const bool same_b = b[i] == b[j];
      agree += (same_a == same_b);
      ++total;
    }
  }
  return static_cast<double>(agree) / static_cast<double>(total);
}

}  // namespace xprot::embed
