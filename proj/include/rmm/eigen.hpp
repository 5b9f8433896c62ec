#pragma once

// Eigenvalues of real nonsymmetric dense matrices: Householder reduction to
// upper Hessenberg form followed by the Francis implicit double-shift QR
// iteration on the active window (eigenvalues only, no Schur vectors).

#include <cmath>
#include <complex>
#include <concepts>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "rmm/dense.hpp"
#include "rmm/error.hpp"

namespace rmm {

struct QrOptions {
  int max_sweeps_per_eigenvalue = 40;
  int exceptional_shift_every = 10;
};

/// In-place reduction of a square matrix to upper Hessenberg form by
/// Householder similarity transforms. Entries below the subdiagonal are
/// set to zero on exit.
template <std::floating_point T>
void hessenberg_reduce(Matrix<T>& a) {
  const std::size_t n = a.rows();
  if (n < 3) return;
  std::vector<T> v(n), w(n);
  for (std::size_t k = 0; k + 2 < n; ++k) {
    // Householder vector for a(k+1:n, k).
    T scale{0};
    for (std::size_t i = k + 1; i < n; ++i) scale += std::abs(a(i, k));
    if (scale == T{0}) continue;
    T norm2{0};
    for (std::size_t i = k + 1; i < n; ++i) {
      v[i] = a(i, k) / scale;
      norm2 += v[i] * v[i];
    }
    const T x0 = v[k + 1];
    const T alpha = std::copysign(std::sqrt(norm2), x0);
    v[k + 1] += alpha;
    // H = I - v v^T / h with h = v^T v / 2 = |x|^2 + alpha x0.
    const T half_vtv = norm2 + alpha * x0;
    if (half_vtv == T{0}) continue;
    const T beta = T{1} / half_vtv;

    // Left: rows k+1..n-1, columns k..n-1.
    for (std::size_t j = k; j < n; ++j) w[j] = T{0};
    for (std::size_t i = k + 1; i < n; ++i) {
      const T vi = v[i];
      const auto r = a.row(i);
      for (std::size_t j = k; j < n; ++j) w[j] += vi * r[j];
    }
    for (std::size_t i = k + 1; i < n; ++i) {
      const T f = beta * v[i];
      auto r = a.row(i);
      for (std::size_t j = k; j < n; ++j) r[j] -= f * w[j];
    }
    // Right: all rows, columns k+1..n-1.
    for (std::size_t i = 0; i < n; ++i) {
      auto r = a.row(i);
      T s{0};
      for (std::size_t j = k + 1; j < n; ++j) s += r[j] * v[j];
      s *= beta;
      for (std::size_t j = k + 1; j < n; ++j) r[j] -= s * v[j];
    }
    a(k + 1, k) = -alpha * scale;
    for (std::size_t i = k + 2; i < n; ++i) a(i, k) = T{0};
  }
}

/// Eigenvalues of an upper Hessenberg matrix (destroyed). Complex pairs come
/// out as exact conjugates. Throws QRNoConvergence when an eigenvalue needs
/// more than `max_sweeps_per_eigenvalue` sweeps.
template <std::floating_point T>
std::vector<std::complex<T>> hessenberg_eigenvalues(Matrix<T>& a, const QrOptions& opt = {}) {
  using std::abs;
  const int n = static_cast<int>(a.rows());
  std::vector<std::complex<T>> wr(static_cast<std::size_t>(n));
  if (n == 0) return wr;
  const T eps = std::numeric_limits<T>::epsilon();

  T anorm{0};
  for (int i = 0; i < n; ++i)
    for (int j = std::max(i - 1, 0); j < n; ++j) anorm += abs(a(i, j));

  int nn = n - 1;
  int its = 0;
  while (nn >= 0) {
    // Look for a single small subdiagonal element.
    int l = nn;
    for (; l > 0; --l) {
      T s = abs(a(l - 1, l - 1)) + abs(a(l, l));
      if (s == T{0}) s = anorm;
      if (abs(a(l, l - 1)) <= eps * s) {
        a(l, l - 1) = T{0};
        break;
      }
    }
    T x = a(nn, nn);
    if (l == nn) {
      wr[nn] = x;
      --nn;
      its = 0;
      continue;
    }
    T y = a(nn - 1, nn - 1);
    T w = a(nn, nn - 1) * a(nn - 1, nn);
    if (l == nn - 1) {
      const T p = T{0.5} * (y - x);
      const T q = p * p + w;
      T z = std::sqrt(abs(q));
      if (q >= T{0}) {
        z = p + std::copysign(z, p);
        wr[nn - 1] = wr[nn] = x + z;
        if (z != T{0}) wr[nn] = x - w / z;
      } else {
        wr[nn] = std::complex<T>(x + p, -z);
        wr[nn - 1] = std::conj(wr[nn]);
      }
      nn -= 2;
      its = 0;
      continue;
    }

    if (its == opt.max_sweeps_per_eigenvalue)
      throw Error(ErrorCode::QRNoConvergence,
                  "no convergence after " + std::to_string(its) + " sweeps in active block [" +
                      std::to_string(l) + ", " + std::to_string(nn) + "]");

    // Shift pair from the trailing 2x2, or an ad hoc one. Exceptional shifts
    // alternate between the bottom and the top of the active block; the textbook
    // bottom-only choice can cycle on clustered disk spectra.
    T h11, h12, h21, h22;
    const int every = opt.exceptional_shift_every;
    if (its > 0 && every > 0 && its % every == 0) {
      T s;
      if ((its / every) % 2 == 0) {
        s = abs(a(nn, nn - 1)) + abs(a(nn - 1, nn - 2));
        h11 = T{0.75} * s + a(nn, nn);
      } else {
        s = abs(a(l + 1, l)) + abs(a(l + 2, l + 1));
        h11 = T{0.75} * s + a(l, l);
      }
      h12 = T{-0.4375} * s;
      h21 = s;
      h22 = h11;
    } else {
      h11 = y;
      h12 = a(nn - 1, nn);
      h21 = a(nn, nn - 1);
      h22 = x;
    }
    ++its;
    T rt1r{0}, rt1i{0}, rt2r{0}, rt2i{0};
    {
      const T s = abs(h11) + abs(h12) + abs(h21) + abs(h22);
      if (s != T{0}) {
        h11 /= s;
        h12 /= s;
        h21 /= s;
        h22 /= s;
        const T tr = T{0.5} * (h11 + h22);
        const T det = (h11 - tr) * (h22 - tr) - h12 * h21;
        const T rtdisc = std::sqrt(abs(det));
        if (det >= T{0}) {
          rt1r = rt2r = tr * s;
          rt1i = rtdisc * s;
          rt2i = -rt1i;
        } else {
          // Real pair: use the one closer to h22 twice.
          const T r1 = tr + rtdisc, r2 = tr - rtdisc;
          rt1r = rt2r = (abs(r1 - h22) <= abs(r2 - h22) ? r1 : r2) * s;
        }
      }
    }

    // Find two consecutive small subdiagonal elements.
    int m = nn - 2;
    T p{0}, q{0}, r{0}, z{0};
    for (; m >= l; --m) {
      const T amm = a(m, m);
      T s = abs(amm - rt2r) + abs(rt2i) + abs(a(m + 1, m));
      const T h21s = a(m + 1, m) / s;
      p = h21s * a(m, m + 1) + (amm - rt1r) * ((amm - rt2r) / s) - rt1i * (rt2i / s);
      q = h21s * (amm + a(m + 1, m + 1) - rt1r - rt2r);
      r = h21s * a(m + 2, m + 1);
      s = abs(p) + abs(q) + abs(r);
      p /= s;
      q /= s;
      r /= s;
      if (m == l) break;
      const T u = abs(a(m, m - 1)) * (abs(q) + abs(r));
      const T v = abs(p) * (abs(a(m - 1, m - 1)) + abs(amm) + abs(a(m + 1, m + 1)));
      if (u <= eps * v) break;
    }
    for (int i = m; i < nn - 1; ++i) {
      a(i + 2, i) = T{0};
      if (i != m) a(i + 2, i - 1) = T{0};
    }

    // Double QR step on rows l..nn and columns m..nn.
    for (int k = m; k < nn; ++k) {
      if (k != m) {
        p = a(k, k - 1);
        q = a(k + 1, k - 1);
        r = T{0};
        if (k + 1 != nn) r = a(k + 2, k - 1);
        x = abs(p) + abs(q) + abs(r);
        if (x != T{0}) {
          p /= x;
          q /= x;
          r /= x;
        }
      }
      const T s = std::copysign(std::sqrt(p * p + q * q + r * r), p);
      if (s == T{0}) continue;
      if (k == m) {
        if (l != m) a(k, k - 1) = -a(k, k - 1);
      } else {
        a(k, k - 1) = -s * x;
      }
      p += s;
      x = p / s;
      y = q / s;
      z = r / s;
      q /= p;
      r /= p;
      const bool three = (k + 1 != nn);
      {
        auto rk = a.row(static_cast<std::size_t>(k));
        auto rk1 = a.row(static_cast<std::size_t>(k + 1));
        if (three) {
          auto rk2 = a.row(static_cast<std::size_t>(k + 2));
          for (int j = k; j <= nn; ++j) {
            const T pp = rk[j] + q * rk1[j] + r * rk2[j];
            rk2[j] -= pp * z;
            rk1[j] -= pp * y;
            rk[j] -= pp * x;
          }
        } else {
          for (int j = k; j <= nn; ++j) {
            const T pp = rk[j] + q * rk1[j];
            rk1[j] -= pp * y;
            rk[j] -= pp * x;
          }
        }
      }
      const int mmin = nn < k + 3 ? nn : k + 3;
      for (int i = l; i <= mmin; ++i) {
        auto ri = a.row(static_cast<std::size_t>(i));
        T pp = x * ri[k] + y * ri[k + 1];
        if (three) {
          pp += z * ri[k + 2];
          ri[k + 2] -= pp * r;
        }
        ri[k + 1] -= pp * q;
        ri[k] -= pp;
      }
    }
  }
  return wr;
}

/// All eigenvalues of a real square matrix, in no particular order.
template <std::floating_point T>
std::vector<std::complex<T>> eigenvalues(Matrix<T> a, const QrOptions& opt = {}) {
  if (!a.square()) throw Error(ErrorCode::NonSquare, "eigenvalues need a square matrix");
  hessenberg_reduce(a);
  return hessenberg_eigenvalues(a, opt);
}

}  // namespace rmm
