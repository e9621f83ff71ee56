#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "xprot/tensor.hpp"

namespace xprot::stats {

enum class Alternative { greater, two_sided };

struct TestResult {
  double statistic = 0.0;
  double p_value = 1.0;
  std::size_t n = 0;
  Alternative alternative = Alternative::greater;
};

// Pearson correlation between continuous values and a 0/1 mask.
// Returns nullopt when the correlation is undefined (constant mask or
// constant values); callers exclude such proteins.
std::optional<double> point_biserial(const std::vector<double>& values,
                                     const std::vector<std::uint8_t>& mask);

// One-sample Student t-test against mu0. Requires n >= 2 and nonzero
// sample variance (zero variance raises).
TestResult t_test_one_sample(const std::vector<double>& values, double mu0 = 0.0,
                             Alternative alternative = Alternative::greater);

// One-sample Wilcoxon signed-rank test. Exact zeros are discarded; |values|
// are ranked with average ranks for ties; W+ sums the ranks of positive
// values. Exact enumeration for tie-free n <= 25, otherwise a normal
// approximation with tie and continuity corrections.
TestResult wilcoxon_signed_rank(const std::vector<double>& values,
                                Alternative alternative = Alternative::greater);

// Benjamini-Hochberg step-up adjustment; preserves input order.
std::vector<double> bh_adjust(const std::vector<double>& p_values);

struct ThresholdedMatrix {
  Tensor display;                    // -log10(p_adj) where significant, NaN elsewhere
  std::vector<std::uint8_t> mask;    // 1 where p_adj < alpha (strict)
};

ThresholdedMatrix neglog10_threshold(const Tensor& p_adjusted, double alpha = 0.05);

// Upper-tail probabilities. Student-t via the regularized incomplete beta
// function (continued fraction), normal via erfc; both accurate to well
// under 1e-10 absolute.
double student_t_sf(double t, double df);
double normal_sf(double z);
double reg_incomplete_beta(double a, double b, double x);

}  // namespace xprot::stats
