#include "tomnet/stats.hpp"

#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <limits>

#include "tomnet/error.hpp"

namespace tomnet {

double mean(std::span<const double> x) {
  if (x.empty()) throw Error("mean of an empty sample");
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

double sample_variance(std::span<const double> x) {
  if (x.size() < 2) throw Error("variance needs at least two values");
  const double m = mean(x);
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return ss / static_cast<double>(x.size() - 1);
}

namespace {

/// t statistic and Welch-Satterthwaite degrees of freedom; df = 0 marks
/// the degenerate zero-variance case.
WelchResult welch_statistic(std::span<const double> a,
                            std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) {
    throw Error("Welch test needs at least two values per sample");
  }
  const double ma = mean(a), mb = mean(b);
  const double va = sample_variance(a) / static_cast<double>(a.size());
  const double vb = sample_variance(b) / static_cast<double>(b.size());
  WelchResult r;
  const double se2 = va + vb;
  if (se2 == 0.0) {
    if (ma == mb) return r;
    r.t = ma > mb ? std::numeric_limits<double>::infinity()
                  : -std::numeric_limits<double>::infinity();
    r.p = 0.0;
    return r;
  }
  r.t = (ma - mb) / std::sqrt(se2);
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  r.df = se2 * se2 / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
  return r;
}

}  // namespace

WelchResult welch_t_test(std::span<const double> a, std::span<const double> b) {
  WelchResult r = welch_statistic(a, b);
  if (r.df == 0.0) return r;
  boost::math::students_t dist(r.df);
  r.p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(r.t)));
  return r;
}

WelchResult welch_t_test_greater(std::span<const double> a,
                                 std::span<const double> b) {
  WelchResult r = welch_statistic(a, b);
  if (r.df == 0.0) {
    if (r.t == 0.0) r.p = 1.0;
    else r.p = r.t > 0 ? 0.0 : 1.0;
    return r;
  }
  boost::math::students_t dist(r.df);
  r.p = boost::math::cdf(boost::math::complement(dist, r.t));
  return r;
}

}  // namespace tomnet
