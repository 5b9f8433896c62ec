#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <vector>

#include "rmm/eigen.hpp"
#include "rmm/rng.hpp"
#include "rmm/sampler.hpp"

namespace rmm {
namespace {

using cplx = std::complex<long double>;
using poly = std::vector<long double>;  // coefficients, lowest degree first

poly poly_mul(const poly& a, const poly& b) {
  poly c(a.size() + b.size() - 1, 0.0L);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) c[i + j] += a[i] * b[j];
  return c;
}

// det(lambda I - A) expanded over all permutations.
poly characteristic_polynomial(const Matrix<double>& a) {
  const std::size_t n = a.rows();
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  poly total(n + 1, 0.0L);
  do {
    int inversions = 0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) inversions += perm[i] > perm[j];
    poly term{inversions % 2 ? -1.0L : 1.0L};
    for (std::size_t i = 0; i < n; ++i) {
      poly factor{-static_cast<long double>(a(i, perm[i]))};
      if (perm[i] == i) factor.push_back(1.0L);
      term = poly_mul(term, factor);
    }
    for (std::size_t k = 0; k < term.size(); ++k) total[k] += term[k];
  } while (std::next_permutation(perm.begin(), perm.end()));
  return total;
}

// Durand-Kerner on a monic polynomial.
std::vector<cplx> polynomial_roots(const poly& p) {
  const std::size_t n = p.size() - 1;
  std::vector<cplx> z(n);
  for (std::size_t k = 0; k < n; ++k) z[k] = std::pow(cplx(0.4L, 0.9L), static_cast<int>(k));
  const auto eval = [&](cplx x) {
    cplx v = 0;
    for (std::size_t k = p.size(); k-- > 0;) v = v * x + p[k];
    return v;
  };
  for (int it = 0; it < 2000; ++it) {
    long double change = 0;
    for (std::size_t i = 0; i < n; ++i) {
      cplx den = 1;
      for (std::size_t j = 0; j < n; ++j)
        if (j != i) den *= z[i] - z[j];
      const cplx step = eval(z[i]) / den;
      z[i] -= step;
      change = std::max(change, std::abs(step));
    }
    if (change < 1e-30L) break;
  }
  // Newton polish for (near) multiple roots is unnecessary at these sizes.
  return z;
}

// Largest distance under a greedy one-to-one matching.
double match_error(std::vector<std::complex<double>> got, const std::vector<cplx>& want) {
  EXPECT_EQ(got.size(), want.size());
  double worst = 0.0;
  for (const auto& w : want) {
    auto best = got.begin();
    double bd = 1e300;
    for (auto it = got.begin(); it != got.end(); ++it) {
      const double dist = std::abs(std::complex<double>(static_cast<double>(w.real()),
                                                        static_cast<double>(w.imag())) -
                                   *it);
      if (dist < bd) {
        bd = dist;
        best = it;
      }
    }
    worst = std::max(worst, bd);
    got.erase(best);
  }
  return worst;
}

Matrix<double> random_matrix(std::size_t n, std::uint64_t stream) {
  auto g = make_generator({99, stream});
  Matrix<double> a(n, n);
  for (auto& v : a.data()) v = standard_normal(g);
  return a;
}

TEST(Eigen, CharacteristicPolynomialOracleMarkov) {
  for (std::size_t d = 1; d <= 4; ++d)
    for (std::uint64_t s = 0; s < 50; ++s) {
      const auto m = sample_matrix(d, {17, s});
      const auto roots = polynomial_roots(characteristic_polynomial(m.matrix()));
      EXPECT_LE(match_error(eigenvalues(m.matrix()), roots), 1e-8) << "d=" << d << " s=" << s;
    }
}

TEST(Eigen, CharacteristicPolynomialOracleGeneral) {
  for (std::size_t d = 1; d <= 4; ++d)
    for (std::uint64_t s = 0; s < 50; ++s) {
      const auto a = random_matrix(d, s);
      const auto roots = polynomial_roots(characteristic_polynomial(a));
      EXPECT_LE(match_error(eigenvalues(a), roots), 1e-8) << "d=" << d << " s=" << s;
    }
}

TEST(Eigen, KnownSpectra) {
  Matrix<double> rot(2, 2);
  rot(0, 1) = -1.0;
  rot(1, 0) = 1.0;
  const auto ev = eigenvalues(rot);
  ASSERT_EQ(ev.size(), 2u);
  EXPECT_NEAR(std::abs(ev[0].imag()), 1.0, 1e-14);
  EXPECT_NEAR(ev[0].real(), 0.0, 1e-14);
  EXPECT_NEAR(ev[0].imag(), -ev[1].imag(), 1e-14);

  Matrix<double> tri(4, 4);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = i; j < 4; ++j) tri(i, j) = (i == j) ? static_cast<double>(i + 1) : 0.3;
  auto t = eigenvalues(tri);
  std::sort(t.begin(), t.end(), [](auto a, auto b) { return a.real() < b.real(); });
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(t[i].real(), i + 1.0, 1e-12);

  EXPECT_TRUE(eigenvalues(Matrix<double>(0, 0)).empty());
  EXPECT_THROW((void)eigenvalues(Matrix<double>(2, 3)), Error);
}

TEST(Eigen, HessenbergFormAndSimilarity) {
  const auto a = random_matrix(12, 5);
  auto h = a;
  hessenberg_reduce(h);
  for (std::size_t i = 2; i < 12; ++i)
    for (std::size_t j = 0; j + 1 < i; ++j) EXPECT_EQ(h(i, j), 0.0);
  double tr_a = 0.0, tr_h = 0.0, fa = 0.0, fh = 0.0;
  for (std::size_t i = 0; i < 12; ++i) {
    tr_a += a(i, i);
    tr_h += h(i, i);
  }
  for (double v : a.data()) fa += v * v;
  for (double v : h.data()) fh += v * v;
  EXPECT_NEAR(tr_a, tr_h, 1e-12);
  EXPECT_NEAR(fa, fh, 1e-10 * fa);
}

TEST(Eigen, ConjugateClosureAndTrace) {
  for (std::size_t n : {5u, 30u, 120u}) {
    const auto a = random_matrix(n, n);
    const auto ev = eigenvalues(a);
    std::complex<double> sum = 0;
    for (auto z : ev) {
      sum += z;
      if (std::abs(z.imag()) > 0) {
        const auto partner =
            std::min_element(ev.begin(), ev.end(), [&](auto x, auto y) {
              return std::abs(x - std::conj(z)) < std::abs(y - std::conj(z));
            });
        EXPECT_LE(std::abs(*partner - std::conj(z)), 1e-8);
      }
    }
    double tr = 0.0;
    for (std::size_t i = 0; i < n; ++i) tr += a(i, i);
    EXPECT_NEAR(sum.real(), tr, 1e-9 * n);
    EXPECT_NEAR(sum.imag(), 0.0, 1e-9 * n);
  }
}

// Stagnated past 40 sweeps with bottom-only exceptional shifts.
TEST(Eigen, ClusteredDiskSpectrumConverges) {
  const auto m = sample_matrix(128, {20240501, 39317});
  QrOptions opt;
  opt.max_sweeps_per_eigenvalue = 20;
  const auto ev = eigenvalues(m.matrix(), opt);
  std::complex<double> sum = 0;
  for (auto z : ev) sum += z;
  double tr = 0.0;
  for (std::size_t i = 0; i < 128; ++i) tr += m(i, i);
  EXPECT_NEAR(sum.real(), tr, 1e-10);
  const auto top = std::max_element(ev.begin(), ev.end(),
                                    [](auto x, auto y) { return std::abs(x) < std::abs(y); });
  EXPECT_NEAR(std::abs(*top - 1.0), 0.0, 1e-12);
}

TEST(Eigen, IterationCapReportsStuckBlock) {
  QrOptions opt;
  opt.max_sweeps_per_eigenvalue = 0;
  try {
    (void)eigenvalues(random_matrix(6, 1), opt);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::QRNoConvergence);
    EXPECT_NE(std::string(e.what()).find("block"), std::string::npos);
  }
}

}  // namespace
}  // namespace rmm
