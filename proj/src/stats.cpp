#include "xprot/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "xprot/error.hpp"

namespace xprot::stats {

namespace {

double ibeta_continued_fraction(double a, double b, double x) {
  // Lentz's algorithm for the incomplete beta continued fraction.
  const double tiny = 1e-300;
  const double eps = 1e-16;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 300; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < eps) break;
  }
  return h;
}

}  // namespace

double reg_incomplete_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                          a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return front * ibeta_continued_fraction(a, b, x) / a;
  }
  return 1.0 - front * ibeta_continued_fraction(b, a, 1.0 - x) / b;
}

double student_t_sf(double t, double df) {
  const double x = df / (df + t * t);
  const double half_tail = 0.5 * reg_incomplete_beta(0.5 * df, 0.5, x);
  return t >= 0.0 ? half_tail : 1.0 - half_tail;
}

double normal_sf(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

std::optional<double> point_biserial(const std::vector<double>& values,
                                     const std::vector<std::uint8_t>& mask) {
  if (values.size() != mask.size()) {
    throw Error(ErrorCode::dimension_mismatch,
                "point_biserial: " + std::to_string(values.size()) + " values vs " +
                    std::to_string(mask.size()) + " mask entries");
  }
  const std::size_t n = values.size();
  if (n < 2) {
    throw Error(ErrorCode::invalid_argument, "point_biserial: need at least 2 samples");
  }
  double mean_v = 0.0, mean_m = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mean_v += values[i];
    mean_m += mask[i] ? 1.0 : 0.0;
  }
  mean_v /= static_cast<double>(n);
  mean_m /= static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dv = values[i] - mean_v;
    const double dm = (mask[i] ? 1.0 : 0.0) - mean_m;
    sxy += dv * dm;
    sxx += dv * dv;
    syy += dm * dm;
  }
  if (sxx == 0.0 || syy == 0.0) return std::nullopt;
  const double r = sxy / std::sqrt(sxx * syy);
  return std::clamp(r, -1.0, 1.0);
}

TestResult t_test_one_sample(const std::vector<double>& values, double mu0,
                             Alternative alternative) {
  const std::size_t n = values.size();
  if (n < 2) {
    throw Error(ErrorCode::invalid_argument, "t_test_one_sample: need at least 2 samples");
  }
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (double v : values) {
    const double d = v - mean;
    ss += d * d;
  }
  if (ss == 0.0) {
    throw Error(ErrorCode::numeric_failure, "t_test_one_sample: zero sample variance");
  }
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  const double se = sd / std::sqrt(static_cast<double>(n));
  const double t = (mean - mu0) / se;
  const double df = static_cast<double>(n - 1);
  TestResult result;
  result.statistic = t;
  result.n = n;
  result.alternative = alternative;
  if (alternative == Alternative::greater) {
    result.p_value = student_t_sf(t, df);
  } else {
    result.p_value = std::min(1.0, 2.0 * student_t_sf(std::fabs(t), df));
  }
  return result;
}

TestResult wilcoxon_signed_rank(const std::vector<double>& values, Alternative alternative) {
  std::vector<double> nonzero;
  nonzero.reserve(values.size());
  for (double v : values) {
    if (v != 0.0) nonzero.push_back(v);
  }
  const std::size_t n = nonzero.size();
  if (n == 0) {
    throw Error(ErrorCode::invalid_argument, "wilcoxon_signed_rank: all values are zero");
  }

  // Rank |values|, average ranks for ties.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::fabs(nonzero[a]) < std::fabs(nonzero[b]);
  });
  std::vector<double> ranks(n);
  bool has_ties = false;
  std::vector<std::size_t> tie_sizes;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n &&
           std::fabs(nonzero[order[j + 1]]) == std::fabs(nonzero[order[i]])) {
      ++j;
    }
    const double avg_rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg_rank;
    if (j > i) {
      has_ties = true;
      tie_sizes.push_back(j - i + 1);
    }
    i = j + 1;
  }

  double w_plus = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    if (nonzero[k] > 0.0) w_plus += ranks[k];
  }

  TestResult result;
  result.statistic = w_plus;
  result.n = n;
  result.alternative = alternative;

  if (!has_ties && n <= 25) {
    // Exact null distribution of W+ by subset-sum counting over ranks 1..n.
    const std::size_t max_sum = n * (n + 1) / 2;
    std::vector<double> count(max_sum + 1, 0.0);
    count[0] = 1.0;
    for (std::size_t r = 1; r <= n; ++r) {
      for (std::size_t s = max_sum; s + 1 > r; --s) count[s] += count[s - r];
    }
    const double total = std::pow(2.0, static_cast<double>(n));
    const auto tail_ge = [&](double w) {
      double acc = 0.0;
      for (std::size_t s = 0; s <= max_sum; ++s) {
        if (static_cast<double>(s) >= w) acc += count[s];
      }
      return acc / total;
    };
    if (alternative == Alternative::greater) {
      result.p_value = tail_ge(w_plus);
    } else {
      const double upper = tail_ge(w_plus);
      const double lower = tail_ge(static_cast<double>(max_sum) - w_plus);
      result.p_value = std::min(1.0, 2.0 * std::min(upper, lower));
    }
    return result;
  }

  const double nd = static_cast<double>(n);
  const double mu = nd * (nd + 1.0) / 4.0;
  double sigma2 = nd * (nd + 1.0) * (2.0 * nd + 1.0) / 24.0;
  for (std::size_t t : tie_sizes) {
    const double td = static_cast<double>(t);
    sigma2 -= (td * td * td - td) / 48.0;
  }
  const double sigma = std::sqrt(sigma2);
  if (alternative == Alternative::greater) {
    const double z = (w_plus - mu - 0.5) / sigma;
    result.p_value = normal_sf(z);
  } else {
    const double z = (std::fabs(w_plus - mu) - 0.5) / sigma;
    result.p_value = std::min(1.0, 2.0 * normal_sf(z));
  }
  return result;
}

std::vector<double> bh_adjust(const std::vector<double>& p_values) {
  const std::size_t m = p_values.size();
  for (double p : p_values) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw Error(ErrorCode::invalid_argument, "bh_adjust: p-value outside [0,1]");
    }
  }
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return p_values[a] < p_values[b]; });
  std::vector<double> adjusted(m, 0.0);
  double running = 1.0;
  for (std::size_t i = m; i > 0; --i) {
    const std::size_t idx = order[i - 1];
    const double q = p_values[idx] * static_cast<double>(m) / static_cast<double>(i);
    running = std::min(running, std::min(q, 1.0));
    adjusted[idx] = running;
  }
  return adjusted;
}

ThresholdedMatrix neglog10_threshold(const Tensor& p_adjusted, double alpha) {
  ThresholdedMatrix out;
  out.display = Tensor(p_adjusted.shape());
  out.mask.assign(p_adjusted.size(), 0);
  const double* p = p_adjusted.data();
  double* d = out.display.data();
  for (std::size_t i = 0; i < p_adjusted.size(); ++i) {
    if (p[i] < alpha) {
      out.mask[i] = 1;
      d[i] = -std::log10(p[i]);
    } else {
      d[i] = std::numeric_limits<double>::quiet_NaN();
    }
  }
  return out;
}

}  // namespace xprot::stats
