#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "rmm/dense.hpp"
#include "rmm/error.hpp"
#include "rmm/markov_matrix.hpp"
#include "rmm/rng.hpp"

namespace rmm {

enum class SampleMode { exact, asymptotic };

/// One ensemble row: exponentials y, their sum s, and x = y / s.
struct RowSample {
  std::vector<double> y;
  std::vector<double> x;
  double s = 0.0;
};

/// Normalizes a given vector of positive exponentials into a row.
inline RowSample row_from_exponentials(std::vector<double> y) {
  RowSample r;
  r.s = 0.0;
  for (double v : y) r.s += v;
  r.x.resize(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) r.x[i] = y[i] / r.s;
  r.y = std::move(y);
  return r;
}

/// Uniform point on the (d-1)-simplex via normalized i.i.d. exponentials.
template <class Gen>
RowSample sample_row(std::size_t d, Gen& g) {
  if (d == 0) throw Error(ErrorCode::InvalidArgument, "dimension must be >= 1");
  std::vector<double> y(d);
  for (auto& v : y) v = exponential(g);
  return row_from_exponentials(std::move(y));
}

// Fills `out` with x = y / sum(y) for fresh exponentials; no allocation.
template <class Gen>
void fill_simplex_row(std::span<double> out, Gen& g) {
  double s = 0.0;
  for (auto& v : out) {
    v = exponential(g);
    s += v;
  }
  for (auto& v : out) v /= s;
}

/// Draws a matrix from the ensemble: d independent simplex-uniform rows from
/// the stream named by `seed`.
inline MarkovMatrix sample_matrix(std::size_t d, SeedSpec seed) {
  if (d == 0) throw Error(ErrorCode::InvalidArgument, "dimension must be >= 1");
  auto g = make_generator(seed);
  Matrix<double> m(d, d);
  for (std::size_t i = 0; i < d; ++i) fill_simplex_row(m.row(i), g);
  return MarkovMatrix::adopt(std::move(m));
}

/// Raw draw that makes the exact/asymptotic choice explicit. In asymptotic
/// mode every entry is an independent exponential with rate d and rows are
/// not renormalized, so `stochastic` is false and the matrix only serves
/// comparative statistics.
struct RawSample {
  Matrix<double> values;
  bool stochastic = true;
};

inline RawSample sample_entries(std::size_t d, SeedSpec seed, SampleMode mode) {
  if (mode == SampleMode::exact) return {sample_matrix(d, seed).matrix(), true};
  if (d == 0) throw Error(ErrorCode::InvalidArgument, "dimension must be >= 1");
  auto g = make_generator(seed);
  Matrix<double> m(d, d);
  const double rate = static_cast<double>(d);
  for (auto& v : m.data()) v = exponential(g) / rate;
  return {std::move(m), false};
}

//-----------------------------------------------------------------------------
// Moment-generating function of one row, E[exp(-lambda^T x)].

inline constexpr double repeated_lambda_tol = 1e-9;

/// Closed form (-1)^(d-1) (d-1)! sum_i exp(-lambda_i) / w'(lambda_i), with
/// w(x) = prod_i (x - lambda_i). Needs pairwise distinct arguments.
inline double mgf_analytic(std::span<const double> lambda) {
  const std::size_t d = lambda.size();
  if (d == 0) throw Error(ErrorCode::InvalidArgument, "empty lambda");
  std::vector<double> sorted(lambda.begin(), lambda.end());
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 1; i < d; ++i)
    if (sorted[i] - sorted[i - 1] <= repeated_lambda_tol)
      throw Error(ErrorCode::RepeatedLambda,
                  "arguments " + std::to_string(sorted[i - 1]) + " and " +
                      std::to_string(sorted[i]) + " coincide");
  double sum = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    double wprime = 1.0;
    for (std::size_t j = 0; j < d; ++j)
      if (j != i) wprime *= lambda[i] - lambda[j];
    sum += std::exp(-lambda[i]) / wprime;
  }
  double factorial = 1.0;
  for (std::size_t k = 2; k < d; ++k) factorial *= static_cast<double>(k);
  const double sign = (d - 1) % 2 == 0 ? 1.0 : -1.0;
  return sign * factorial * sum;
}

struct MonteCarloEstimate {
  double mean = 0.0;
  double std_error = 0.0;
};

/// Sample mean and standard error of exp(-lambda^T x) over sample_row draws.
inline MonteCarloEstimate mgf_estimate(std::span<const double> lambda, std::size_t n_samples,
                                       SeedSpec seed) {
  if (n_samples < 1000)
    throw Error(ErrorCode::InvalidArgument, "mgf_estimate needs at least 1000 samples");
  const std::size_t d = lambda.size();
  if (d == 0) throw Error(ErrorCode::InvalidArgument, "empty lambda");
  auto g = make_generator(seed);
  std::vector<double> x(d);
  // Welford
  double mean = 0.0, m2 = 0.0;
  for (std::size_t k = 0; k < n_samples; ++k) {
    fill_simplex_row(x, g);
    double dot = 0.0;
    for (std::size_t i = 0; i < d; ++i) dot += lambda[i] * x[i];
    const double v = std::exp(-dot);
    const double delta = v - mean;
    mean += delta / static_cast<double>(k + 1);
    m2 += delta * (v - mean);
  }
  const double n = static_cast<double>(n_samples);
  const double var = m2 / (n - 1.0);
  return {mean, std::sqrt(var / n)};
}

}  // namespace rmm
