#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "rmm/dense.hpp"
#include "rmm/error.hpp"
#include "rmm/markov_matrix.hpp"

namespace rmm {

/// Entries at or below this are exact zeros for x log x.
inline constexpr double entropy_zero_floor = 1e-300;

struct EntropyReport {
  double h = 0.0;      // entropy growth rate, nats
  double h_ave = 0.0;  // mean row entropy
  double h_osc = 0.0;  // sum (pi_i - 1/d)(U_i - h_ave)
  std::vector<double> u;
};

/// U_i = -sum_j M_ij log M_ij, natural log, 0 log 0 = 0. Accepts raw
/// (non-stochastic) matrices as well.
inline std::vector<double> row_entropies(const Matrix<double>& m) {
  std::vector<double> u(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    double s = 0.0;
    for (double v : m.row(i))
      if (v > entropy_zero_floor) s -= v * std::log(v);
    u[i] = s;
  }
  return u;
}

inline std::vector<double> row_entropies(const MarkovMatrix& m) {
  return row_entropies(m.matrix());
}

inline EntropyReport entropy_rate(const MarkovMatrix& m, std::span<const double> pi) {
  const std::size_t d = m.dim();
  if (pi.size() != d)
    throw Error(ErrorCode::DimensionMismatch,
                "pi has dimension " + std::to_string(pi.size()) + ", matrix " + std::to_string(d));
  EntropyReport r;
  r.u = row_entropies(m);
  const double inv_d = 1.0 / static_cast<double>(d);
  for (std::size_t i = 0; i < d; ++i) {
    r.h += pi[i] * r.u[i];
    r.h_ave += r.u[i];
  }
  r.h_ave *= inv_d;
  for (std::size_t i = 0; i < d; ++i) r.h_osc += (pi[i] - inv_d) * (r.u[i] - r.h_ave);
  return r;
}

//-----------------------------------------------------------------------------

enum class DecayFlag { ok, instant, non_mixing };

/// Decay exponent -log|nu| and time -1/log|nu|. Both are NaN unless
/// 0 < |nu| < 1 - 1e-9.
struct DecayRecord {
  double abs_nu = 0.0;
  double tau_inv = std::numeric_limits<double>::quiet_NaN();
  double tau_c = std::numeric_limits<double>::quiet_NaN();
  DecayFlag flag = DecayFlag::ok;

  [[nodiscard]] bool defined() const noexcept { return flag == DecayFlag::ok; }
};

inline constexpr double non_mixing_tol = 1e-9;

inline DecayRecord decay_record(std::complex<double> nu) {
  DecayRecord r;
  r.abs_nu = std::abs(nu);
  if (r.abs_nu == 0.0) {
    r.flag = DecayFlag::instant;
  } else if (!(r.abs_nu < 1.0 - non_mixing_tol)) {
    r.flag = DecayFlag::non_mixing;
  } else {
    r.tau_inv = -std::log(r.abs_nu);
    r.tau_c = 1.0 / r.tau_inv;
  }
  return r;
}

//-----------------------------------------------------------------------------

/// C_{f,g}(t) = <f, g(t)>_pi - <f>_pi <g>_pi for t = 0..t_max, with the
/// observable propagated as g(t) = M^t g.
inline std::vector<double> correlation(const MarkovMatrix& m, std::span<const double> pi,
                                       std::span<const double> f, std::span<const double> g,
                                       std::size_t t_max) {
  const std::size_t d = m.dim();
  if (pi.size() != d || f.size() != d || g.size() != d)
    throw Error(ErrorCode::DimensionMismatch, "pi, f and g must match the matrix dimension");
  double mean_f = 0.0, mean_g = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    mean_f += pi[i] * f[i];
    mean_g += pi[i] * g[i];
  }
  std::vector<double> c(t_max + 1);
  std::vector<double> cur(g.begin(), g.end()), next(d);
  for (std::size_t t = 0; t <= t_max; ++t) {
    double s = 0.0;
    for (std::size_t i = 0; i < d; ++i) s += pi[i] * f[i] * cur[i];
    c[t] = s - mean_f * mean_g;
    if (t < t_max) {
      multiply<double>(m.matrix(), cur, next);
      cur.swap(next);
    }
  }
  return c;
}

struct DecayFit {
  double slope = 0.0;           // fitted log-decay per step
  double relative_error = 0.0;  // |slope - log|nu|| / |log|nu||
  std::size_t points = 0;
};

/// Least-squares slope of log|C(t)| on t in [2, t_hi], t_hi being the last
/// index with |C(t)| > 1e-12 |C(0)|.
inline DecayFit decay_fit(std::span<const double> corr, double nu_abs) {
  if (!(nu_abs > 0.0 && nu_abs < 1.0))
    throw Error(ErrorCode::InvalidArgument, "|nu| must lie in (0, 1)");
  if (corr.empty()) throw Error(ErrorCode::WindowTooShort, "empty correlation");
  const double floor = 1e-12 * std::abs(corr[0]);
  std::size_t t_hi = 0;
  bool any = false;
  for (std::size_t t = 0; t < corr.size(); ++t)
    if (std::abs(corr[t]) > floor) {
      t_hi = t;
      any = true;
    }
  std::vector<double> ts, ls;
  if (any && corr[0] != 0.0)
    for (std::size_t t = 2; t <= t_hi; ++t)
      if (std::abs(corr[t]) > floor) {
        ts.push_back(static_cast<double>(t));
        ls.push_back(std::log(std::abs(corr[t])));
      }
  if (ts.size() < 4)
    throw Error(ErrorCode::WindowTooShort,
                std::to_string(ts.size()) + " usable points, need at least 4");
  const double n = static_cast<double>(ts.size());
  double mt = 0.0, ml = 0.0;
  for (std::size_t k = 0; k < ts.size(); ++k) {
    mt += ts[k];
    ml += ls[k];
  }
  mt /= n;
  ml /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t k = 0; k < ts.size(); ++k) {
    sxy += (ts[k] - mt) * (ls[k] - ml);
    sxx += (ts[k] - mt) * (ts[k] - mt);
  }
  DecayFit fit;
  fit.slope = sxy / sxx;
  const double target = std::log(nu_abs);
  fit.relative_error = std::abs(fit.slope - target) / std::abs(target);
  fit.points = ts.size();
  return fit;
}

}  // namespace rmm
