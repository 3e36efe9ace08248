#pragma once

// Reference distributions for the inference layer. Normal, chi-square and F
// tails come from Boost.Math; the studentized range distribution (for Tukey
// HSD) is integrated numerically here.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstddef>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>
#include <tuple>
#include <utility>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/roots.hpp>

#include "ssc/error.hpp"

namespace ssc::dist {

inline double normal_cdf(double z) noexcept { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

inline double normal_two_sided_p(double z) noexcept { return std::erfc(std::abs(z) / std::numbers::sqrt2); }

inline double chi_squared_sf(double x, double df) {
  if (x <= 0.0) return 1.0;
  return boost::math::cdf(boost::math::complement(boost::math::chi_squared_distribution<double>(df), x));
}

inline double f_sf(double f, double df1, double df2) {
  if (!(f > 0.0)) return 1.0;
  if (std::isinf(f)) return 0.0;
  return boost::math::cdf(boost::math::complement(boost::math::fisher_f_distribution<double>(df1, df2), f));
}

namespace detail {

inline double normal_pdf(double z) noexcept { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }

// P(range of k iid standard normals <= w).
inline double range_cdf(double w, int k) {
  if (w <= 0.0) return 0.0;
  auto integrand = [w, k](double z) {
    const double inner = normal_cdf(z) - normal_cdf(z - w);
    return normal_pdf(z) * std::pow(inner, k - 1);
  };
  using boost::math::quadrature::gauss_kronrod;
  const double v = k * gauss_kronrod<double, 31>::integrate(integrand, -8.5, 8.5, 12, 1e-12);
  return std::clamp(v, 0.0, 1.0);
}

}  // namespace detail

// CDF of the studentized range Q with k means and df error degrees of
// freedom: P(Q <= q) = integral over s of P(range <= q s) f(s) ds, where
// s = sqrt(chi2_df / df).
inline double ptukey(double q, int k, double df) {
  if (k < 2) throw Error("studentized range needs k >= 2");
  if (!(df > 0.0)) throw Error("studentized range needs df > 0");
  if (q <= 0.0) return 0.0;
  if (df > 5000.0) return detail::range_cdf(q, k);
  const double log_norm = 0.5 * df * std::log(df) - std::lgamma(0.5 * df) - (0.5 * df - 1.0) * std::log(2.0);
  auto integrand = [&](double s) {
    if (s <= 0.0) return 0.0;
    const double log_f = log_norm + (df - 1.0) * std::log(s) - 0.5 * df * s * s;
    return detail::range_cdf(q * s, k) * std::exp(log_f);
  };
  const double spread = 1.0 / std::sqrt(df);
  const double lo = std::max(0.0, 1.0 - 12.0 * spread);
  const double hi = 1.0 + 12.0 * spread + (df < 6.0 ? 8.0 : 0.0);
  using boost::math::quadrature::gauss_kronrod;
  const double v = gauss_kronrod<double, 31>::integrate(integrand, lo, hi, 12, 1e-10);
  return std::clamp(v, 0.0, 1.0);
}

// Quantile of the studentized range by bracketing root search.
inline double qtukey(double p, int k, double df) {
  if (!(p > 0.0 && p < 1.0)) throw Error("qtukey needs 0 < p < 1");
  auto f = [&](double q) { return ptukey(q, k, df) - p; };
  double lo = 0.0;
  double hi = 4.0;
  while (f(hi) < 0.0) {
    lo = hi;
    hi *= 2.0;
  }
  boost::math::tools::eps_tolerance<double> tol(40);
  std::uintmax_t iters = 100;
  const auto [a, b] = boost::math::tools::toms748_solve(f, lo, hi, tol, iters);
  return 0.5 * (a + b);
}

// Critical values are memoized per (k, df, p); the cache is process-wide and
// guarded by a mutex.
inline double tukey_critical(double p, int k, double df) {
  static std::mutex mu;
  static std::map<std::tuple<double, int, double>, double> cache;
  const auto key = std::make_tuple(p, k, df);
  {
    std::lock_guard lock(mu);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
  }
  const double q = qtukey(p, k, df);
  std::lock_guard lock(mu);
  cache.emplace(key, q);
  return q;
}

}  // namespace ssc::dist
