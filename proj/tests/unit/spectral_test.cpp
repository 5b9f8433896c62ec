#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "rmm/sampler.hpp"
#include "rmm/spectral.hpp"

namespace rmm {
namespace {

const MarkovMatrix two_state = MarkovMatrix::from_rows({{0.9, 0.1}, {0.2, 0.8}});

ErrorCode code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no rmm::Error thrown";
  return ErrorCode::NumericalFailure;
}

TEST(Stationary, TwoState) {
  const auto st = stationary(two_state);
  // Stopping on an L1 residual of 1e-12 leaves an error near
  // residual / (1 - |nu|).
  EXPECT_NEAR(st.pi[0], 2.0 / 3.0, 5e-12);
  EXPECT_NEAR(st.pi[1], 1.0 / 3.0, 5e-12);
  EXPECT_LE(st.residual, 1e-12);
}

TEST(Stationary, UniformTakesOneIteration) {
  const auto st = stationary(MarkovMatrix::uniform(7));
  EXPECT_EQ(st.iterations, 1u);
  for (double p : st.pi) EXPECT_NEAR(p, 1.0 / 7.0, 1e-16);
}

TEST(Stationary, IdentityIsDegenerate) {
  EXPECT_EQ(code_of([] { (void)stationary(MarkovMatrix::identity(3)); }),
            ErrorCode::DegenerateStationary);
}

TEST(Stationary, ReducibleIsDegenerate) {
  const auto m = MarkovMatrix::from_rows({{0.5, 0.5, 0, 0}, {0.5, 0.5, 0, 0}, {0, 0, 0.3, 0.7}, {0, 0, 0.6, 0.4}});
  EXPECT_EQ(code_of([&] { (void)stationary(m); }), ErrorCode::DegenerateStationary);
}

TEST(Stationary, PeriodicChainUsesLinearSolve) {
  // Power iteration from uniform is already stationary for a cycle; a
  // non-uniform periodic chain needs the fallback.
  const auto m = MarkovMatrix::from_rows({{0, 1, 0}, {0.5, 0, 0.5}, {0, 1, 0}});
  const auto st = stationary(m);
  EXPECT_NEAR(st.pi[0], 0.25, 1e-12);
  EXPECT_NEAR(st.pi[1], 0.5, 1e-12);
  EXPECT_NEAR(st.pi[2], 0.25, 1e-12);
  EXPECT_EQ(st.method, StationaryMethod::linear_solve);
}

TEST(Stationary, ResidualAndUnitSumOnSamples) {
  for (std::size_t d : {2u, 10u, 100u, 300u}) {
    const auto st = stationary(sample_matrix(d, {4, d}));
    double s = 0.0;
    for (double p : st.pi) {
      EXPECT_GE(p, 0.0);
      s += p;
    }
    EXPECT_NEAR(s, 1.0, 1e-12);
    EXPECT_LE(st.residual, 1e-12);
  }
}

TEST(Stationary, PowersShareStationaryVector) {
  for (std::size_t d : {4u, 16u, 32u}) {
    const auto m = sample_matrix(d, {6, d});
    const auto pi = stationary(m).pi;
    Matrix<double> p = m.matrix();
    for (int t = 2; t <= 8; ++t) {
      p = multiply(p, m.matrix());
      const auto mt = MarkovMatrix::from_matrix(p);
      const auto pit = stationary(mt).pi;
      for (std::size_t i = 0; i < d; ++i) EXPECT_NEAR(pit[i], pi[i], 1e-8);
    }
  }
}

TEST(FullSpectrum, TwoState) {
  const auto s = full_spectrum(two_state);
  ASSERT_EQ(s.eigenvalues.size(), 2u);
  EXPECT_NEAR(s.perron.real(), 1.0, 1e-14);
  EXPECT_NEAR(s.nu.real(), 0.7, 1e-14);
  EXPECT_NEAR(s.abs_nu, 0.7, 1e-14);
  EXPECT_TRUE(s.mixing);
}

TEST(FullSpectrum, UniformIsRankOne) {
  const auto s = full_spectrum(MarkovMatrix::uniform(6));
  EXPECT_NEAR(std::abs(s.perron - complex_t(1.0)), 0.0, 1e-14);
  for (std::size_t k = 1; k < 6; ++k) EXPECT_LE(std::abs(s.eigenvalues[k]), 1e-14);
  EXPECT_LE(s.abs_nu, 1e-14);
}

TEST(FullSpectrum, ThreeCycleIsNonMixing) {
  const std::vector<std::size_t> cyc{1, 2, 0};
  const auto s = full_spectrum(MarkovMatrix::permutation(cyc));
  ASSERT_EQ(s.eigenvalues.size(), 3u);
  EXPECT_NEAR(s.perron.real(), 1.0, 1e-12);
  // Tie on modulus: the positive-imaginary member comes first.
  const complex_t w = std::polar(1.0, 2.0 * std::numbers::pi / 3.0);
  EXPECT_NEAR(std::abs(s.nu - w), 0.0, 1e-12);
  EXPECT_NEAR(std::abs(s.eigenvalues[2] - std::conj(w)), 0.0, 1e-12);
  EXPECT_NEAR(s.abs_nu, 1.0, 1e-12);
  EXPECT_FALSE(s.mixing);
}

TEST(FullSpectrum, DimensionTooLarge) {
  SpectralOptions opt;
  opt.full_spectrum_limit = 8;
  EXPECT_EQ(code_of([&] { (void)full_spectrum(sample_matrix(9, {1, 1}), opt); }),
            ErrorCode::DimensionTooLarge);
}

TEST(FullSpectrum, InvariantsOnSamples) {
  for (std::size_t d : {3u, 8u, 50u, 200u})
    for (std::uint64_t s = 0; s < 5; ++s) {
      const auto m = sample_matrix(d, {21, s});
      const auto sp = full_spectrum(m);
      ASSERT_EQ(sp.eigenvalues.size(), d);
      EXPECT_LE(std::abs(sp.perron - complex_t(1.0)), 1e-8);
      EXPECT_EQ(sp.abs_nu, std::abs(sp.nu));
      EXPECT_LE(sp.abs_nu, sp.sigma_bound + 1e-10);
      for (std::size_t k = 1; k < d; ++k)
        EXPECT_GE(std::abs(sp.eigenvalues[k - 1]) + 1e-12, std::abs(sp.eigenvalues[k]));
      for (const auto& z : sp.eigenvalues) {
        if (z.imag() == 0.0) continue;
        double best = 1e300;
        for (const auto& w : sp.eigenvalues) best = std::min(best, std::abs(w - std::conj(z)));
        EXPECT_LE(best, 1e-8);
      }
    }
}

TEST(SortSpectrum, TieBreaks) {
  std::vector<complex_t> ev{{0.0, -0.5}, {0.5, 0.0}, {-0.5, 0.0}, {0.0, 0.5}, {1.0, 0.0}};
  detail::sort_spectrum(ev);
  const std::vector<complex_t> want{{1.0, 0.0}, {0.5, 0.0}, {0.0, 0.5}, {0.0, -0.5}, {-0.5, 0.0}};
  EXPECT_EQ(ev, want);
}

TEST(Subdominant, TwoStateAndUniform) {
  EXPECT_NEAR(subdominant(two_state, stationary(two_state)).nu.real(), 0.7, 1e-14);
  const auto u = MarkovMatrix::uniform(5);
  EXPECT_LE(subdominant(u, stationary(u)).abs_nu, 1e-14);
}

TEST(Subdominant, KrylovTwoStateAndUniform) {
  const auto k = subdominant_krylov(two_state, stationary(two_state));
  EXPECT_NEAR(k.nu.real(), 0.7, 1e-10);
  EXPECT_FALSE(k.full);
  const auto u = MarkovMatrix::uniform(50);
  EXPECT_LE(subdominant_krylov(u, stationary(u)).abs_nu, 1e-10);
}

TEST(Subdominant, KrylovMatchesFull) {
  for (std::size_t d : {10u, 64u, 150u})
    for (std::uint64_t s = 0; s < 10; ++s) {
      const auto m = sample_matrix(d, {303, s});
      const auto st = stationary(m);
      const auto full = full_spectrum(m);
      const auto kry = subdominant_krylov(m, st);
      EXPECT_LE(std::abs(kry.nu - full.nu), 1e-6) << "d=" << d << " s=" << s;
      EXPECT_NEAR(kry.sigma_bound, full.sigma_bound, 1e-9);
    }
}

TEST(Subdominant, DispatchAboveLimitUsesKrylov) {
  SpectralOptions opt;
  opt.full_spectrum_limit = 32;
  const auto m = sample_matrix(40, {8, 8});
  const auto s = subdominant(m, stationary(m), opt);
  EXPECT_FALSE(s.full);
  EXPECT_LE(std::abs(s.nu - full_spectrum(m).nu), 1e-6);
}

TEST(Subdominant, KrylovNoConvergenceIsReported) {
  SpectralOptions opt;
  opt.krylov_basis = 4;
  opt.krylov_max_restarts = 1;
  opt.krylov_tol = 1e-15;
  const auto m = sample_matrix(200, {1, 2});
  EXPECT_EQ(code_of([&] { (void)subdominant_krylov(m, stationary(m), opt); }),
            ErrorCode::KrylovNoConvergence);
}

TEST(SigmaBound, Examples) {
  EXPECT_NEAR(sigma_bound(MarkovMatrix::uniform(6)), 0.0, 1e-12);
  // P M M^T P restricted to span{(1,-1)}: ((0.7)^2 * 2) / 2 = 0.49.
  EXPECT_NEAR(sigma_bound(two_state), 0.7, 1e-9);
  const std::vector<std::size_t> cyc{1, 2, 0};
  EXPECT_NEAR(sigma_bound(MarkovMatrix::permutation(cyc)), 1.0, 1e-9);
}

TEST(SigmaBound, DominatesNu) {
  for (std::size_t d : {2u, 5u, 32u, 128u})
    for (std::uint64_t s = 0; s < 20; ++s) {
      const auto m = sample_matrix(d, {55, s});
      const auto sp = full_spectrum(m);
      EXPECT_LE(sp.abs_nu, sp.sigma_bound + 1e-10);
    }
}

}  // namespace
}  // namespace rmm
