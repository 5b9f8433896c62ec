#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "rmm/observables.hpp"
#include "rmm/rng.hpp"
#include "rmm/sampler.hpp"
#include "rmm/spectral.hpp"

namespace rmm {
namespace {

const MarkovMatrix two_state = MarkovMatrix::from_rows({{0.9, 0.1}, {0.2, 0.8}});

TEST(RowEntropies, Examples) {
  for (double u : row_entropies(MarkovMatrix::uniform(5))) EXPECT_NEAR(u, std::log(5.0), 1e-15);
  const std::vector<std::size_t> cyc{2, 0, 1};
  for (double u : row_entropies(MarkovMatrix::permutation(cyc))) EXPECT_EQ(u, 0.0);
  const auto u = row_entropies(two_state);
  EXPECT_NEAR(u[0], 0.325083, 5e-7);
  EXPECT_NEAR(u[1], 0.500402, 5e-7);
}

TEST(RowEntropies, TinyEntriesCountAsZero) {
  const auto m = MarkovMatrix::from_rows({{1.0 - 1e-310, 1e-310}, {0.5, 0.5}});
  const auto u = row_entropies(m);
  EXPECT_TRUE(std::isfinite(u[0]));
  EXPECT_NEAR(u[0], 0.0, 1e-15);
}

TEST(EntropyRate, TwoState) {
  const auto r = entropy_rate(two_state, std::vector<double>{2.0 / 3.0, 1.0 / 3.0});
  EXPECT_NEAR(r.h, 0.383523, 5e-7);
  EXPECT_NEAR(r.h, r.h_ave + r.h_osc, 1e-12);
}

TEST(EntropyRate, UniformAndPermutation) {
  const auto u = MarkovMatrix::uniform(9);
  const auto ru = entropy_rate(u, stationary(u).pi);
  EXPECT_NEAR(ru.h, std::log(9.0), 1e-14);
  EXPECT_NEAR(ru.h_osc, 0.0, 1e-15);
  const std::vector<std::size_t> cyc{1, 2, 3, 0};
  const auto p = MarkovMatrix::permutation(cyc);
  EXPECT_EQ(entropy_rate(p, stationary(p).pi).h, 0.0);
}

TEST(EntropyRate, DimensionMismatch) {
  EXPECT_THROW((void)entropy_rate(two_state, std::vector<double>{1.0}), Error);
}

TEST(EntropyRate, BoundsAndDecomposition) {
  for (std::size_t d : {2u, 7u, 64u, 256u})
    for (std::uint64_t s = 0; s < 10; ++s) {
      const auto m = sample_matrix(d, {101, s});
      const auto r = entropy_rate(m, stationary(m).pi);
      EXPECT_GE(r.h, 0.0);
      EXPECT_LE(r.h, std::log(static_cast<double>(d)) + 1e-12);
      EXPECT_NEAR(r.h, r.h_ave + r.h_osc, 1e-12);
      double mean_u = 0.0;
      for (double v : r.u) mean_u += v;
      EXPECT_NEAR(r.h_ave, mean_u / d, 1e-14);
    }
}

TEST(DecayRecordTest, Examples) {
  const auto r = decay_record({0.7, 0.0});
  EXPECT_TRUE(r.defined());
  EXPECT_NEAR(r.tau_inv, 0.356675, 5e-7);
  EXPECT_NEAR(r.tau_c, 2.803673, 5e-7);
  EXPECT_DOUBLE_EQ(r.tau_c, 1.0 / r.tau_inv);

  const auto zero = decay_record({0.0, 0.0});
  EXPECT_EQ(zero.flag, DecayFlag::instant);
  EXPECT_TRUE(std::isnan(zero.tau_inv));

  const auto one = decay_record({0.0, 1.0});
  EXPECT_EQ(one.flag, DecayFlag::non_mixing);
  EXPECT_TRUE(std::isnan(one.tau_c));
  EXPECT_EQ(decay_record({1.0 - 1e-10, 0.0}).flag, DecayFlag::non_mixing);
  EXPECT_TRUE(decay_record({1.0 - 1e-8, 0.0}).defined());
}

TEST(Correlation, UniformIsZeroAfterOneStep) {
  const auto u = MarkovMatrix::uniform(4);
  const std::vector<double> pi(4, 0.25), f{1, -2, 3, 0.5}, g{0, 4, -1, 2};
  const auto c = correlation(u, pi, f, g, 5);
  for (std::size_t t = 1; t <= 5; ++t) EXPECT_EQ(c[t], 0.0);
}

TEST(Correlation, TimeZeroDefinition) {
  const auto m = sample_matrix(5, {3, 3});
  const auto pi = stationary(m).pi;
  const std::vector<double> f{1, 2, 3, 4, 5}, g{-1, 0, 2, 0, 1};
  double fg = 0, mf = 0, mg = 0;
  for (int i = 0; i < 5; ++i) {
    fg += pi[i] * f[i] * g[i];
    mf += pi[i] * f[i];
    mg += pi[i] * g[i];
  }
  EXPECT_NEAR(correlation(m, pi, f, g, 0)[0], fg - mf * mg, 1e-15);
}

TEST(Correlation, TwoStateGeometric) {
  const std::vector<double> pi{2.0 / 3.0, 1.0 / 3.0}, f{1, 0};
  const auto c = correlation(two_state, pi, f, f, 30);
  for (std::size_t t = 0; t <= 30; ++t) EXPECT_NEAR(c[t], c[0] * std::pow(0.7, t), 1e-15);
}

TEST(Correlation, CenteringInvariance) {
  const auto m = sample_matrix(20, {7, 1});
  const auto pi = stationary(m).pi;
  auto g0 = make_generator({7, 2});
  std::vector<double> f(20), g(20);
  for (auto& v : f) v = standard_normal(g0);
  for (auto& v : g) v = standard_normal(g0);
  const auto base = correlation(m, pi, f, g, 12);
  auto fs = f, gs = g;
  for (auto& v : fs) v += 3.5;
  for (auto& v : gs) v -= 11.0;
  const auto shifted = correlation(m, pi, fs, gs, 12);
  for (std::size_t t = 0; t <= 12; ++t) EXPECT_NEAR(std::abs(base[t]), std::abs(shifted[t]), 1e-10);
}

TEST(Correlation, DimensionMismatch) {
  const std::vector<double> pi{0.5, 0.5}, f{1, 2, 3};
  EXPECT_THROW((void)correlation(two_state, pi, f, pi, 3), Error);
}

TEST(DecayFitTest, ExactGeometric) {
  std::vector<double> c(40);
  for (std::size_t t = 0; t < c.size(); ++t) c[t] = std::pow(0.7, t);
  const auto fit = decay_fit(c, 0.7);
  EXPECT_NEAR(fit.slope, std::log(0.7), 1e-12);
  EXPECT_NEAR(fit.relative_error, 0.0, 1e-11);
}

TEST(DecayFitTest, Errors) {
  const std::vector<double> zeros(20, 0.0);
  try {
    (void)decay_fit(zeros, 0.5);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::WindowTooShort);
  }
  std::vector<double> quick{1.0, 0.1, 0.01, 1e-3, 1e-20};
  EXPECT_THROW((void)decay_fit(quick, 0.1), Error);
  EXPECT_THROW((void)decay_fit(zeros, 1.0), Error);
}

TEST(DecayFitTest, RealSubdominantSample) {
  // A sampled chain whose nu is real and well separated from the next
  // eigenvalue in modulus.
  int checked = 0;
  for (std::uint64_t s = 0; s < 200 && checked < 5; ++s) {
    const auto m = sample_matrix(8, {909, s});
    const auto sp = full_spectrum(m);
    if (sp.nu.imag() != 0.0 || std::abs(sp.eigenvalues[2]) > 0.6 * sp.abs_nu) continue;
    const auto pi = stationary(m).pi;
    auto g0 = make_generator({909, 1000 + s});
    std::vector<double> f(8), g(8);
    for (auto& v : f) v = standard_normal(g0);
    for (auto& v : g) v = standard_normal(g0);
    const auto fit = decay_fit(correlation(m, pi, f, g, 60), sp.abs_nu);
    EXPECT_LE(fit.relative_error, 0.05) << "s=" << s;
    ++checked;
  }
  EXPECT_EQ(checked, 5);
}

}  // namespace
}  // namespace rmm
