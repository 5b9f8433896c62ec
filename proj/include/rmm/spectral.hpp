#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "rmm/dense.hpp"
#include "rmm/eigen.hpp"
#include "rmm/error.hpp"
#include "rmm/markov_matrix.hpp"
#include "rmm/rng.hpp"

namespace rmm {

using complex_t = std::complex<double>;

struct SpectralOptions {
  std::size_t full_spectrum_limit = 2048;
  double stat_tol = 1e-12;            // L1 residual of pi^T M - pi^T
  std::size_t max_power_iterations = 2000;
  std::size_t krylov_basis = 40;
  std::size_t krylov_max_restarts = 500;
  double krylov_tol = 1e-8;           // Ritz residual
  double bound_tol = 1e-10;           // relative, projected power iteration
  std::size_t bound_max_iterations = 200000;
  double mix_tol = 1e-9;
  QrOptions qr{};
};

enum class StationaryMethod { power, linear_solve };

struct StationaryDistribution {
  std::vector<double> pi;
  double residual = 0.0;
  std::size_t iterations = 0;
  StationaryMethod method = StationaryMethod::power;
};

struct SpectralSummary {
  std::vector<complex_t> eigenvalues;  // full spectrum, or {perron, nu}
  bool full = true;
  complex_t perron{1.0, 0.0};
  complex_t nu{0.0, 0.0};
  double abs_nu = 0.0;
  double sigma_bound = 0.0;
  bool mixing = true;
};

namespace detail {

inline double l1_residual(std::span<const double> pi, const MarkovMatrix& m,
                          std::vector<double>& scratch) {
  scratch.resize(pi.size());
  multiply_left<double>(pi, m.matrix(), scratch);
  double r = 0.0;
  for (std::size_t i = 0; i < pi.size(); ++i) r += std::abs(scratch[i] - pi[i]);
  return r;
}

// Number of closed communicating classes of the support graph. Only
// matrices with exact zeros can have more than one.
inline std::size_t closed_class_count(const MarkovMatrix& m) {
  const std::size_t d = m.dim();
  const auto edge = [&](std::size_t i, std::size_t j) { return m(i, j) > 0.0; };

  // Kosaraju, iterative.
  std::vector<std::size_t> order;
  order.reserve(d);
  std::vector<char> seen(d, 0);
  for (std::size_t s = 0; s < d; ++s) {
    if (seen[s]) continue;
    std::vector<std::pair<std::size_t, std::size_t>> stack{{s, 0}};
    seen[s] = 1;
    while (!stack.empty()) {
      auto& [u, next] = stack.back();
      if (next == d) {
        order.push_back(u);
        stack.pop_back();
        continue;
      }
      const std::size_t v = next++;
      if (edge(u, v) && !seen[v]) {
        seen[v] = 1;
        stack.emplace_back(v, 0);
      }
    }
  }
  constexpr std::size_t unset = static_cast<std::size_t>(-1);
  std::vector<std::size_t> comp(d, unset);
  std::size_t ncomp = 0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if (comp[*it] != unset) continue;
    std::vector<std::size_t> stack{*it};
    comp[*it] = ncomp;
    while (!stack.empty()) {
      const std::size_t u = stack.back();
      stack.pop_back();
      for (std::size_t v = 0; v < d; ++v)
        if (edge(v, u) && comp[v] == unset) {
          comp[v] = ncomp;
          stack.push_back(v);
        }
    }
    ++ncomp;
  }
  std::vector<char> leaks(ncomp, 0);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j)
      if (edge(i, j) && comp[i] != comp[j]) leaks[comp[i]] = 1;
  return static_cast<std::size_t>(std::count(leaks.begin(), leaks.end(), 0));
}

// Solves (I - M^T) pi = 0 with the last equation replaced by sum(pi) = 1.
inline std::vector<double> stationary_solve(const MarkovMatrix& m) {
  const std::size_t d = m.dim();
  Matrix<double> a(d, d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) a(i, j) = (i == j ? 1.0 : 0.0) - m(j, i);
  for (std::size_t j = 0; j < d; ++j) a(d - 1, j) = 1.0;
  std::vector<double> b(d, 0.0);
  b[d - 1] = 1.0;

  double scale = 0.0;
  for (double v : a.data()) scale = std::max(scale, std::abs(v));
  for (std::size_t k = 0; k < d; ++k) {
    std::size_t piv = k;
    for (std::size_t i = k + 1; i < d; ++i)
      if (std::abs(a(i, k)) > std::abs(a(piv, k))) piv = i;
    if (std::abs(a(piv, k)) <= 1e-12 * scale)
      throw Error(ErrorCode::DegenerateStationary,
                  "normalized system is rank deficient at column " + std::to_string(k) +
                      "; eigenvalue 1 is not simple");
    if (piv != k) {
      std::swap_ranges(a.row(k).begin(), a.row(k).end(), a.row(piv).begin());
      std::swap(b[k], b[piv]);
    }
    const auto rk = a.row(k);
    for (std::size_t i = k + 1; i < d; ++i) {
      const double f = a(i, k) / rk[k];
      if (f == 0.0) continue;
      auto ri = a.row(i);
      for (std::size_t j = k; j < d; ++j) ri[j] -= f * rk[j];
      b[i] -= f * b[k];
    }
  }
  std::vector<double> x(d);
  for (std::size_t k = d; k-- > 0;) {
    double s = b[k];
    for (std::size_t j = k + 1; j < d; ++j) s -= a(k, j) * x[j];
    x[k] = s / a(k, k);
  }
  return x;
}

inline void sort_spectrum(std::vector<complex_t>& ev) {
  std::stable_sort(ev.begin(), ev.end(),
                   [](const complex_t& a, const complex_t& b) { return std::abs(a) > std::abs(b); });
  // Moduli equal within 1e-12: decreasing real part, then decreasing
  // imaginary part (positive member of a conjugate pair first).
  constexpr double tie = 1e-12;
  std::size_t start = 0;
  while (start < ev.size()) {
    std::size_t end = start + 1;
    const double top = std::abs(ev[start]);
    while (end < ev.size() && top - std::abs(ev[end]) <= tie) ++end;
    std::sort(ev.begin() + static_cast<std::ptrdiff_t>(start),
              ev.begin() + static_cast<std::ptrdiff_t>(end),
              [](const complex_t& a, const complex_t& b) {
                if (a.real() != b.real()) return a.real() > b.real();
                return a.imag() > b.imag();
              });
    start = end;
  }
}

inline std::vector<double> start_vector(std::size_t d, std::uint64_t salt) {
  auto g = make_generator({0x5EED5EED5EED5EEDULL ^ salt, d});
  std::vector<double> v(d);
  for (auto& x : v) x = standard_normal(g);
  return v;
}

inline double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline void project_out_ones(std::span<double> v) {
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  for (auto& x : v) x -= mean;
}

}  // namespace detail

namespace detail {

// Continues power sweeps past the tolerance while the residual keeps
// halving, so that pi is accurate to rounding rather than to stat_tol (the
// mean subtracted in correlation functions depends on it). `next` holds
// pi^T M on entry; returns the number of extra sweeps.
inline std::size_t polish_stationary(const MarkovMatrix& m, std::vector<double>& pi,
                                     std::vector<double>& next, double& r) {
  const std::size_t d = pi.size();
  std::vector<double> cand(d), cand_next(d);
  std::size_t extra = 0;
  while (r > 0.0 && extra < 200) {
    const double s = std::accumulate(next.begin(), next.end(), 0.0);
    for (std::size_t i = 0; i < d; ++i) cand[i] = next[i] / s;
    multiply_left<double>(cand, m.matrix(), cand_next);
    double rc = 0.0;
    for (std::size_t i = 0; i < d; ++i) rc += std::abs(cand_next[i] - cand[i]);
    if (!(rc < 0.5 * r)) break;
    pi.swap(cand);
    next.swap(cand_next);
    r = rc;
    ++extra;
  }
  return extra;
}

}  // namespace detail

//-----------------------------------------------------------------------------

/// Stationary distribution pi^T M = pi^T, sum(pi) = 1. Power iteration on
/// the transpose from the uniform vector; falls back to a direct solve when
/// the iteration has not reached `stat_tol` within `max_power_iterations`.
inline StationaryDistribution stationary(const MarkovMatrix& m, const SpectralOptions& opt = {}) {
  const std::size_t d = m.dim();
  const bool has_zero =
      std::any_of(m.entries().begin(), m.entries().end(), [](double v) { return v <= 0.0; });
  if (has_zero) {
    const std::size_t closed = detail::closed_class_count(m);
    if (closed > 1)
      throw Error(ErrorCode::DegenerateStationary,
                  std::to_string(closed) + " closed classes; eigenvalue 1 is multiple");
  }

  StationaryDistribution out;
  std::vector<double> pi(d, 1.0 / static_cast<double>(d));
  std::vector<double> next(d);
  for (std::size_t it = 1; it <= opt.max_power_iterations; ++it) {
    multiply_left<double>(pi, m.matrix(), next);
    double r = 0.0;
    for (std::size_t i = 0; i < d; ++i) r += std::abs(next[i] - pi[i]);
    if (r <= opt.stat_tol) {
      out.iterations = it + detail::polish_stationary(m, pi, next, r);
      out.pi = std::move(pi);
      out.residual = r;
      out.method = StationaryMethod::power;
      return out;
    }
    const double s = std::accumulate(next.begin(), next.end(), 0.0);
    for (std::size_t i = 0; i < d; ++i) pi[i] = next[i] / s;
  }

  // Direct solve, followed by a few power sweeps to clean up rounding.
  std::vector<double> x = detail::stationary_solve(m);
  for (auto& v : x) {
    if (v < -1e-9) throw Error(ErrorCode::NonConvergent, "direct solve gave a negative weight");
    v = std::max(v, 0.0);
  }
  std::vector<double> scratch;
  for (std::size_t it = 0; it < 64; ++it) {
    const double s = std::accumulate(x.begin(), x.end(), 0.0);
    for (auto& v : x) v /= s;
    double r = detail::l1_residual(x, m, scratch);
    if (r <= opt.stat_tol) {
      out.iterations = opt.max_power_iterations + it + detail::polish_stationary(m, x, scratch, r);
      out.pi = std::move(x);
      out.residual = r;
      out.method = StationaryMethod::linear_solve;
      return out;
    }
    x = scratch;
  }
  throw Error(ErrorCode::NonConvergent,
              "stationary distribution did not reach residual " + std::to_string(opt.stat_tol));
}

/// sqrt of the largest eigenvalue of P M M^T P, P = I - 11^T/d: the
/// largest ||x^T M|| over unit x orthogonal to 1. Every non-Perron left
/// eigenvector is orthogonal to 1, so this bounds |nu| from above.
inline double sigma_bound(const MarkovMatrix& m, const SpectralOptions& opt = {}) {
  const std::size_t d = m.dim();
  if (d == 1) return 0.0;
  std::vector<double> v = detail::start_vector(d, 0xB0B0);
  detail::project_out_ones(v);
  double nv = detail::norm2(v);
  for (auto& x : v) x /= nv;
  std::vector<double> t(d), w(d);
  double prev = -1.0;
  for (std::size_t it = 0; it < opt.bound_max_iterations; ++it) {
    multiply_left<double>(v, m.matrix(), t);  // t = M^T v
    multiply<double>(m.matrix(), t, w);       // w = M M^T v
    detail::project_out_ones(w);
    const double lambda = detail::norm2(w);
    if (lambda <= 1e-300) return 0.0;
    for (std::size_t i = 0; i < d; ++i) v[i] = w[i] / lambda;
    if (std::abs(lambda - prev) <= opt.bound_tol * lambda) return std::sqrt(lambda);
    prev = lambda;
  }
  throw Error(ErrorCode::NonConvergent, "projected power iteration did not converge");
}

inline SpectralSummary summarize_spectrum(std::vector<complex_t> ev, double bound,
                                          const SpectralOptions& opt) {
  detail::sort_spectrum(ev);
  SpectralSummary s;
  s.full = true;
  s.perron = ev.empty() ? complex_t{} : ev[0];
  s.nu = ev.size() > 1 ? ev[1] : complex_t{};
  s.abs_nu = std::abs(s.nu);
  s.sigma_bound = bound;
  s.mixing = s.abs_nu < 1.0 - opt.mix_tol;
  s.eigenvalues = std::move(ev);
  return s;
}

/// Complete spectrum by Hessenberg reduction and Francis QR, sorted by
/// decreasing modulus.
inline SpectralSummary full_spectrum(const MarkovMatrix& m, const SpectralOptions& opt = {}) {
  if (m.dim() > opt.full_spectrum_limit)
    throw Error(ErrorCode::DimensionTooLarge,
                "d=" + std::to_string(m.dim()) + " exceeds full_spectrum_limit=" +
                    std::to_string(opt.full_spectrum_limit));
  auto ev = eigenvalues(m.matrix(), opt.qr);
  return summarize_spectrum(std::move(ev), sigma_bound(m, opt), opt);
}

/// Sorted eigenvalues of an arbitrary real square matrix (for the
/// non-stochastic asymptotic-mode draws).
inline std::vector<complex_t> raw_spectrum(const Matrix<double>& a, const QrOptions& qr = {}) {
  auto ev = eigenvalues(a, qr);
  detail::sort_spectrum(ev);
  return ev;
}

namespace detail {

// Eigenvector of a small complex matrix near `theta` by inverse iteration.
inline std::vector<complex_t> inverse_iteration(const std::vector<std::vector<double>>& h,
                                                std::size_t m, complex_t theta) {
  double hnorm = 0.0;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) hnorm = std::max(hnorm, std::abs(h[i][j]));
  const double tiny = std::max(hnorm, 1e-100) * 1e-14;
  const complex_t shift = theta + complex_t(tiny, tiny);

  std::vector<std::vector<complex_t>> a(m, std::vector<complex_t>(m));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) a[i][j] = h[i][j] - (i == j ? shift : 0.0);
  std::vector<std::size_t> perm(m);
  std::iota(perm.begin(), perm.end(), 0);
  // LU with partial pivoting, in place.
  for (std::size_t k = 0; k < m; ++k) {
    std::size_t piv = k;
    for (std::size_t i = k + 1; i < m; ++i)
      if (std::abs(a[i][k]) > std::abs(a[piv][k])) piv = i;
    std::swap(a[k], a[piv]);
    std::swap(perm[k], perm[piv]);
    if (std::abs(a[k][k]) < tiny) a[k][k] = tiny;
    for (std::size_t i = k + 1; i < m; ++i) {
      const complex_t f = a[i][k] / a[k][k];
      a[i][k] = f;
      for (std::size_t j = k + 1; j < m; ++j) a[i][j] -= f * a[k][j];
    }
  }
  std::vector<complex_t> z(m, complex_t(1.0, 0.0)), b(m);
  for (int sweep = 0; sweep < 3; ++sweep) {
    for (std::size_t i = 0; i < m; ++i) b[i] = z[perm[i]];
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < i; ++j) b[i] -= a[i][j] * b[j];
    for (std::size_t i = m; i-- > 0;) {
      for (std::size_t j = i + 1; j < m; ++j) b[i] -= a[i][j] * b[j];
      b[i] /= a[i][i];
    }
    double n = 0.0;
    for (const auto& c : b) n += std::norm(c);
    n = std::sqrt(n);
    for (std::size_t i = 0; i < m; ++i) z[i] = b[i] / n;
  }
  return z;
}

}  // namespace detail

/// Subdominant eigenvalue by thick-restarted Arnoldi on the deflated
/// operator M' = M - 1 pi^T, whose spectrum is that of M with the Perron
/// root replaced by 0; the dominant eigenvalue of M' is nu.
///
/// Each restart keeps the real span of the leading Ritz vectors (closed
/// under conjugation, hence invariant for the projected matrix) plus the
/// current residual direction, so competitors of nearly equal modulus are
/// never discarded. Convergence is confirmed on the explicit residual
/// ||M' x - theta x|| of the normalized Ritz vector.
inline SpectralSummary subdominant_krylov(const MarkovMatrix& m, const StationaryDistribution& pi,
                                          const SpectralOptions& opt = {}) {
  const std::size_t d = m.dim();
  if (pi.pi.size() != d) throw Error(ErrorCode::DimensionMismatch, "pi has wrong dimension");
  SpectralSummary out;
  out.full = false;
  out.perron = {1.0, 0.0};
  out.sigma_bound = sigma_bound(m, opt);
  if (d == 1) {
    out.eigenvalues = {out.perron};
    return out;
  }

  const std::size_t basis = std::min(std::max<std::size_t>(4, opt.krylov_basis), d);
  const std::size_t keep_target = basis / 2;
  const auto apply = [&](std::span<const double> x, std::span<double> y) {
    multiply<double>(m.matrix(), x, y);
    const double c = detail::dot(pi.pi, x);
    for (auto& v : y) v -= c;
  };

  std::vector<std::vector<double>> w(basis + 1, std::vector<double>(d));
  // Projected matrix, (basis + 1) x basis, dense in the kept block.
  std::vector<std::vector<double>> h(basis + 1, std::vector<double>(basis, 0.0));
  {
    auto s0 = detail::start_vector(d, 0xA4A4);
    const double n0 = detail::norm2(s0);
    for (std::size_t i = 0; i < d; ++i) w[0][i] = s0[i] / n0;
  }
  std::size_t kept = 0;
  std::vector<double> ax(d), axi(d);

  for (std::size_t restart = 0; restart <= opt.krylov_max_restarts; ++restart) {
    std::size_t steps = basis;
    bool breakdown = false;
    for (std::size_t j = kept; j < basis; ++j) {
      auto& next = w[j + 1];
      apply(w[j], next);
      for (std::size_t i = 0; i <= j; ++i) h[i][j] = 0.0;
      for (int pass = 0; pass < 2; ++pass)
        for (std::size_t i = 0; i <= j; ++i) {
          const double c = detail::dot(w[i], next);
          h[i][j] += c;
          for (std::size_t k = 0; k < d; ++k) next[k] -= c * w[i][k];
        }
      const double beta = detail::norm2(next);
      h[j + 1][j] = beta;
      // M' has norm O(1), so an absolute threshold marks an invariant subspace.
      if (beta <= 1e-13 || j + 1 == d) {
        steps = j + 1;
        breakdown = true;
        break;
      }
      for (auto& x : next) x /= beta;
    }

    Matrix<double> hm(steps, steps);
    for (std::size_t i = 0; i < steps; ++i)
      for (std::size_t j = 0; j < steps; ++j) hm(i, j) = h[i][j];
    auto ritz = eigenvalues(std::move(hm), opt.qr);
    detail::sort_spectrum(ritz);
    const complex_t theta = ritz.front();
    const auto y = detail::inverse_iteration(h, steps, theta);

    const double estimate = breakdown ? 0.0 : h[steps][steps - 1] * std::abs(y[steps - 1]);
    if (estimate <= opt.krylov_tol) {
      // Explicit residual of x = W y, complex, as two real vectors.
      std::vector<double> xr(d, 0.0), xi(d, 0.0);
      for (std::size_t j = 0; j < steps; ++j)
        for (std::size_t k = 0; k < d; ++k) {
          xr[k] += y[j].real() * w[j][k];
          xi[k] += y[j].imag() * w[j][k];
        }
      const double xn = std::sqrt(detail::dot(xr, xr) + detail::dot(xi, xi));
      apply(xr, ax);
      apply(xi, axi);
      double r2 = 0.0;
      for (std::size_t k = 0; k < d; ++k) {
        const double re = ax[k] - (theta.real() * xr[k] - theta.imag() * xi[k]);
        const double im = axi[k] - (theta.real() * xi[k] + theta.imag() * xr[k]);
        r2 += re * re + im * im;
      }
      if (std::sqrt(r2) / xn <= opt.krylov_tol) {
        out.nu = theta.imag() < 0.0 ? std::conj(theta) : theta;
        if (std::abs(out.nu.imag()) <= 1e-14 * std::abs(out.nu)) out.nu.imag(0.0);
        out.abs_nu = std::abs(out.nu);
        out.mixing = out.abs_nu < 1.0 - opt.mix_tol;
        out.eigenvalues = {out.perron, out.nu};
        return out;
      }
    }
    if (breakdown)
      throw Error(ErrorCode::KrylovNoConvergence, "invariant subspace found but residual too large");

    // Real orthonormal basis Q (steps x k) of the leading Ritz vectors.
    std::vector<std::vector<double>> q;
    const auto add_column = [&](std::vector<double> c) {
      for (int pass = 0; pass < 2; ++pass)
        for (const auto& e : q) {
          const double p = detail::dot(e, c);
          for (std::size_t i = 0; i < steps; ++i) c[i] -= p * e[i];
        }
      const double n = detail::norm2(c);
      if (n < 1e-10) return;
      for (auto& v : c) v /= n;
      q.push_back(std::move(c));
    };
    for (std::size_t k = 0; k < ritz.size() && q.size() < keep_target; ++k) {
      const complex_t mu = ritz[k];
      if (mu.imag() < 0.0) continue;
      const auto z = k == 0 ? y : detail::inverse_iteration(h, steps, mu);
      std::vector<double> re(steps), im(steps);
      for (std::size_t i = 0; i < steps; ++i) {
        re[i] = z[i].real();
        im[i] = z[i].imag();
      }
      add_column(std::move(re));
      if (mu.imag() > 0.0) add_column(std::move(im));
    }
    const std::size_t k_new = q.size();

    // W' = W Q, keep the residual direction; H' = Q^T H Q with a dense
    // coupling row to the residual direction.
    std::vector<std::vector<double>> w_new(k_new, std::vector<double>(d, 0.0));
    for (std::size_t c = 0; c < k_new; ++c)
      for (std::size_t j = 0; j < steps; ++j) {
        const double f = q[c][j];
        if (f == 0.0) continue;
        for (std::size_t i = 0; i < d; ++i) w_new[c][i] += f * w[j][i];
      }
    std::vector<std::vector<double>> hq(steps, std::vector<double>(k_new, 0.0));
    for (std::size_t i = 0; i < steps; ++i)
      for (std::size_t c = 0; c < k_new; ++c) {
        double s = 0.0;
        for (std::size_t j = 0; j < steps; ++j) s += h[i][j] * q[c][j];
        hq[i][c] = s;
      }
    const double h_last = h[steps][steps - 1];
    std::vector<double> residual_dir = std::move(w[steps]);
    for (auto& row : h) std::fill(row.begin(), row.end(), 0.0);
    for (std::size_t r = 0; r < k_new; ++r)
      for (std::size_t c = 0; c < k_new; ++c) {
        double s = 0.0;
        for (std::size_t i = 0; i < steps; ++i) s += q[r][i] * hq[i][c];
        h[r][c] = s;
      }
    for (std::size_t c = 0; c < k_new; ++c) h[k_new][c] = h_last * q[c][steps - 1];
    for (std::size_t c = 0; c < k_new; ++c) w[c] = std::move(w_new[c]);
    w[k_new] = std::move(residual_dir);
    for (std::size_t j = k_new + 1; j <= basis; ++j) w[j].assign(d, 0.0);
    kept = k_new;
  }
  throw Error(ErrorCode::KrylovNoConvergence,
              "Arnoldi did not reach Ritz residual " + std::to_string(opt.krylov_tol));
}

/// nu for any dimension: full spectrum up to `full_spectrum_limit`, Krylov
/// above it.
inline SpectralSummary subdominant(const MarkovMatrix& m, const StationaryDistribution& pi,
                                   const SpectralOptions& opt = {}) {
  if (m.dim() <= opt.full_spectrum_limit) return full_spectrum(m, opt);
  return subdominant_krylov(m, pi, opt);
}

}  // namespace rmm
