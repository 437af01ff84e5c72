#pragma once

#include <span>

namespace tomnet {

struct WelchResult {
  double t = 0.0;
  double p = 1.0;
  double df = 0.0;
};

double mean(std::span<const double> x);
/// Unbiased sample variance (n - 1 denominator).
double sample_variance(std::span<const double> x);

/// Two-sided Welch unequal-variance t-test. Requires at least two values
/// per sample. Two constant samples give p = 1 when the means agree and
/// p = 0 otherwise.
WelchResult welch_t_test(std::span<const double> a, std::span<const double> b);

/// One-sided version for the alternative mean(a) > mean(b).
WelchResult welch_t_test_greater(std::span<const double> a,
                                 std::span<const double> b);

}  // namespace tomnet
