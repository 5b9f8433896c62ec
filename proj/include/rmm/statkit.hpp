#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rmm/error.hpp"

namespace rmm {

/// Euler-Mascheroni constant.
inline constexpr double euler_gamma = std::numbers::egamma;

//-----------------------------------------------------------------------------
// Reference distributions

/// Standard normal CDF, G(x) = (erf(x / sqrt 2) + 1) / 2. Evaluated through
/// erfc so that the lower tail keeps its relative accuracy.
inline double gaussian_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

inline double gaussian_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

/// CDF of the maximum of d i.i.d. standard normals, G(y)^d.
inline double max_gaussian_cdf(double y, std::size_t d) {
  return std::pow(gaussian_cdf(y), static_cast<double>(d));
}

inline double max_gaussian_pdf(double y, std::size_t d) {
  const double dd = static_cast<double>(d);
  return dd * std::pow(gaussian_cdf(y), dd - 1.0) * gaussian_pdf(y);
}

namespace detail {

template <class F>
double simpson_step(const F& f, double a, double b, double fa, double fm, double fb, double whole,
                    double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  return simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace detail

/// Adaptive Simpson quadrature with Richardson correction.
template <class F>
double integrate_adaptive(F f, double a, double b, double abs_tol, int max_depth = 50) {
  // Split first so narrow peaks are not missed by the coarse estimate.
  constexpr int pieces = 64;
  const double h = (b - a) / pieces;
  double total = 0.0;
  for (int k = 0; k < pieces; ++k) {
    const double lo = a + k * h, hi = lo + h;
    const double fa = f(lo), fb = f(hi), fm = f(0.5 * (lo + hi));
    const double whole = h / 6.0 * (fa + 4.0 * fm + fb);
    total += detail::simpson_step(f, lo, hi, fa, fm, fb, whole, abs_tol / pieces, max_depth);
  }
  return total;
}

struct Moments {
  double mean = 0.0;
  double std = 0.0;
};

/// Mean and standard deviation of the max-of-d-normals law, by quadrature
/// of its density over [-10, 10].
inline Moments max_gaussian_moments(std::size_t d) {
  if (d == 0) throw Error(ErrorCode::InvalidArgument, "d must be >= 1");
  constexpr double tol = 1e-10;
  const auto first = [d](double y) { return y * max_gaussian_pdf(y, d); };
  const double mean = integrate_adaptive(first, -10.0, 10.0, tol);
  const auto second = [d, mean](double y) { return (y - mean) * (y - mean) * max_gaussian_pdf(y, d); };
  const double var = integrate_adaptive(second, -10.0, 10.0, tol);
  return {mean, std::sqrt(var)};
}

//-----------------------------------------------------------------------------
// Empirical distributions

class EmpiricalCDF {
 public:
  explicit EmpiricalCDF(std::vector<double> samples) : sorted_(std::move(samples)) {
    if (sorted_.empty()) throw Error(ErrorCode::EmptyInput, "empirical CDF needs samples");
    std::sort(sorted_.begin(), sorted_.end());
  }

  [[nodiscard]] std::size_t n() const noexcept { return sorted_.size(); }
  [[nodiscard]] std::span<const double> sorted_samples() const noexcept { return sorted_; }

  /// F_n(x) = #{x_i <= x} / n
  [[nodiscard]] double operator()(double x) const {
    const auto it = std::upper_bound(sorted_.begin(), sorted_.end(), x);
    return static_cast<double>(it - sorted_.begin()) / static_cast<double>(n());
  }

  /// F_n(x-) = #{x_i < x} / n
  [[nodiscard]] double left_limit(double x) const {
    const auto it = std::lower_bound(sorted_.begin(), sorted_.end(), x);
    return static_cast<double>(it - sorted_.begin()) / static_cast<double>(n());
  }

 private:
  std::vector<double> sorted_;
};

/// sup_x |F_n(x) - F(x)| for a continuous reference F, evaluated on both
/// sides of every jump of F_n.
template <class Cdf>
double ks_distance(const EmpiricalCDF& ecdf, const Cdf& ref) {
  const auto xs = ecdf.sorted_samples();
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  std::size_t i = 0;
  while (i < xs.size()) {
    std::size_t j = i;
    while (j + 1 < xs.size() && xs[j + 1] == xs[i]) ++j;
    const double f = ref(xs[i]);
    d = std::max({d, std::abs(static_cast<double>(i) / n - f),
                  std::abs(static_cast<double>(j + 1) / n - f)});
    i = j + 1;
  }
  return d;
}

/// Two-sample distance sup_x |F_n(x) - G_m(x)| between step functions.
inline double ks_distance(const EmpiricalCDF& a, const EmpiricalCDF& b) {
  double d = 0.0;
  for (double x : a.sorted_samples()) d = std::max(d, std::abs(a(x) - b(x)));
  for (double x : b.sorted_samples()) d = std::max(d, std::abs(a(x) - b(x)));
  return d;
}

//-----------------------------------------------------------------------------
// Sample statistics

inline double mean(std::span<const double> x) {
  if (x.empty()) throw Error(ErrorCode::EmptyInput, "mean of no samples");
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

/// k = 1: mean. k = 2: unbiased variance (n - 1). k > 2: central moment with
/// denominator n.
inline double central_moment(std::span<const double> x, int k) {
  if (k < 1) throw Error(ErrorCode::InvalidArgument, "moment order must be >= 1");
  if (x.empty()) throw Error(ErrorCode::EmptyInput, "central moment of no samples");
  const double mu = mean(x);
  if (k == 1) return mu;
  if (x.size() < 2) throw Error(ErrorCode::EmptyInput, "central moment needs n >= 2");
  double s = 0.0;
  for (double v : x) s += std::pow(v - mu, k);
  const double n = static_cast<double>(x.size());
  return k == 2 ? s / (n - 1.0) : s / n;
}

inline double stddev(std::span<const double> x) { return std::sqrt(central_moment(x, 2)); }

inline double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size())
    throw Error(ErrorCode::DimensionMismatch, "pearson needs equal-length samples");
  if (x.size() < 2) throw Error(ErrorCode::EmptyInput, "pearson needs n >= 2");
  const double mx = mean(x), my = mean(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double a = x[i] - mx, b = y[i] - my;
    sxy += a * b;
    sxx += a * a;
    syy += b * b;
  }
  if (sxx == 0.0 || syy == 0.0) throw Error(ErrorCode::ZeroVariance, "constant sample");
  return sxy / std::sqrt(sxx * syy);
}

//-----------------------------------------------------------------------------
// Asymptotic laws

struct AsymptoticFit {
  double amplitude = 0.0;
  double exponent = 0.0;  // value ~ amplitude * d^(-exponent)
  double r_squared = 0.0;
};

/// Least squares of log(value) against log(d).
inline AsymptoticFit power_law_fit(std::span<const std::pair<double, double>> points) {
  if (points.size() < 3) throw Error(ErrorCode::InvalidArgument, "power-law fit needs >= 3 points");
  std::vector<double> lx, ly;
  for (const auto& [d, v] : points) {
    if (!(d > 0.0) || !(v > 0.0))
      throw Error(ErrorCode::NonPositiveValue, "power-law fit needs positive (d, value)");
    lx.push_back(std::log(d));
    ly.push_back(std::log(v));
  }
  const double mx = mean(lx), my = mean(ly);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxy += (lx[i] - mx) * (ly[i] - my);
    sxx += (lx[i] - mx) * (lx[i] - mx);
  }
  if (sxx == 0.0) throw Error(ErrorCode::ZeroVariance, "all abscissae coincide");
  const double slope = sxy / sxx;
  const double intercept = my - slope * mx;
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    const double r = ly[i] - (intercept + slope * lx[i]);
    ss_res += r * r;
    ss_tot += (ly[i] - my) * (ly[i] - my);
  }
  AsymptoticFit fit;
  fit.amplitude = std::exp(intercept);
  fit.exponent = -slope;
  fit.r_squared = ss_tot > 0.0 ? std::clamp(1.0 - ss_res / ss_tot, 0.0, 1.0) : 1.0;
  return fit;
}

/// Large-d mean entropy rate, log(e^(gamma - 1) d).
inline double predicted_h(double d) {
  if (d < 2.0) throw Error(ErrorCode::InvalidArgument, "predicted_h needs d >= 2");
  return euler_gamma - 1.0 + std::log(d);
}

/// Large-d variance of a row entropy U_i.
inline double predicted_sigma_u2(double d) {
  if (d < 2.0) throw Error(ErrorCode::InvalidArgument, "predicted_sigma_u2 needs d >= 2");
  constexpr double g = euler_gamma;
  const double ld = std::log(d);
  return (1.0 + (g - 4.0) * g + std::numbers::pi * std::numbers::pi / 3.0 +
          (2.0 * g - 4.0 + ld) * ld) /
         d;
}

}  // namespace rmm
