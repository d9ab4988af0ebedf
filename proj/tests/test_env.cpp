#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "rpl/env.hpp"
#include "rpl/rangelaw.hpp"
#include "rpl/stochproc.hpp"

using namespace rpl;

TEST(Env, GaussianWindowSizeAndMoments) {
  const auto small = generate_environment(Law::gaussian(), -10, 10, 1);
  EXPECT_EQ(small.values.size(), 21u);

  const auto env = generate_environment(Law::gaussian(), 0, 999'999, 1);
  const double m = mean(env.values), v = variance(env.values);
  EXPECT_LE(std::abs(m), 4.0 / 1e3);
  EXPECT_NEAR(v, 1.0, 0.01);
}

TEST(Env, TwoPointSupport) {
  const auto env = generate_environment(Law::two_point(), -500, 500, 7);
  for (double w : env.values) EXPECT_TRUE(w == -1.0 || w == 1.0);
}

TEST(Env, AllLawsCentered) {
  for (const Law& law : {Law::gaussian(), Law::two_point(), Law::uniform(), Law::stable(1.5, 0.5, 0.5),
                         Law::stable(1.7, 0.8, 0.2)}) {
    const auto env = generate_environment(law, 0, 999'999, 11);
    // The stable law has infinite variance, so compare the mean of the
    // draws clipped to [-L, L] with its exact value instead.
    if (law.kind == LawKind::stable) {
      const double L = 100.0;
      std::vector<double> clipped;
      for (double w : env.values)
        if (std::abs(w) <= L) clipped.push_back(w);
      const double k = law.stable_kappa();
      const double exact = -k * (law.p - law.q) * law.alpha / (law.alpha - 1) * std::pow(L, 1 - law.alpha);
      const double frac = static_cast<double>(clipped.size()) / static_cast<double>(env.values.size());
      EXPECT_LE(std::abs(mean(clipped) * frac - exact), 5 * std_error(clipped)) << law.alpha;
    } else {
      EXPECT_LE(std::abs(mean(env.values)), 5 * std_error(env.values)) << to_string(law.kind);
    }
  }
}

TEST(Env, StableTailExact) {
  const Law law = Law::stable(1.5, 0.5, 0.5);
  const double expected = 0.5 * std::pow(10.0, -1.5);
  EXPECT_NEAR(1.0 - law.cdf(10.0), expected, 1e-15);
  const auto env = generate_environment(law, 0, 9'999'999, 3);
  double hits = 0;
  for (double w : env.values) hits += w > 10.0;
  const double p = hits / 1e7, se = std::sqrt(expected * (1 - expected) / 1e7);
  EXPECT_LE(std::abs(p - expected), 3 * se);
}

TEST(Env, StableAsymmetricCoreHasZeroMean) {
  const Law law = Law::stable(1.5, 0.9, 0.1);
  const double k = law.stable_kappa(), c = law.stable_core_center();
  EXPECT_LT(k, 1.0);
  EXPECT_LE(std::abs(c), 1.0);
  // Tail means: p a/(a-1) and -q a/(a-1), each weighted by kappa.
  const double tails = k * (law.p - law.q) * law.alpha / (law.alpha - 1);
  EXPECT_NEAR(tails + (1 - k) * c, 0.0, 1e-14);
  EXPECT_NEAR(law.cdf(-1.0) - law.cdf(-1.0 - 1e-12), 0.0, 1e-9);
  EXPECT_NEAR(law.cdf(1.0), 1 - k * law.p, 1e-15);
}

TEST(Env, StableRejectsBadParameters) {
  EXPECT_THROW(Law::stable(2.0, 0.5, 0.5), std::invalid_argument);
  EXPECT_THROW(Law::stable(1.0, 0.5, 0.5), std::invalid_argument);
  EXPECT_THROW(Law::stable(1.5, 0.5, 0.6), std::invalid_argument);
  EXPECT_THROW(generate_environment(Law::gaussian(), 3, 2, 0), std::invalid_argument);
}

TEST(Env, Determinism) {
  const auto a = generate_environment(Law::uniform(), -100, 100, 42);
  const auto b = generate_environment(Law::uniform(), -100, 100, 42);
  std::ostringstream sa, sb;
  write_env_binary(sa, a);
  write_env_binary(sb, b);
  EXPECT_EQ(sa.str(), sb.str());
  // Nested windows agree on the overlap.
  const auto c = generate_environment(Law::uniform(), -10, 10, 42);
  for (long z = -10; z <= 10; ++z) EXPECT_EQ(c.at(z), a.at(z));
}

TEST(Env, PrefixSums) {
  Environment zero;
  zero.lo = -5;
  zero.hi = 5;
  zero.values.assign(11, 0.0);
  auto ps = prefix_sums(zero);
  for (double v : ps.sigma_plus) EXPECT_EQ(v, 0.0);
  for (double v : ps.sigma_minus) EXPECT_EQ(v, 0.0);

  Environment one = zero;
  one.values.assign(11, 1.0);
  ps = prefix_sums(one);
  for (long j = 0; j <= 5; ++j) {
    EXPECT_EQ(ps.sigma_plus[j], j + 1);
    EXPECT_EQ(ps.sigma_minus[j], j);
  }

  const auto env = generate_environment(Law::gaussian(), -20, 20, 5);
  ps = prefix_sums(env);
  double direct = 0;
  for (long z = 0; z <= 5; ++z) direct += env.at(z);
  EXPECT_DOUBLE_EQ(ps.sigma_plus[5], direct);
  EXPECT_EQ(ps.sigma_minus[0], 0.0);
  for (long j = 1; j <= 20; ++j) EXPECT_NEAR(ps.sigma_plus[j] - ps.sigma_plus[j - 1], env.at(j), 1e-14);
  EXPECT_THROW(env.at(21), std::out_of_range);
}

TEST(Env, FromBrownianTelescopes) {
  const long n = 1'000'000;
  const double step = std::pow(static_cast<double>(n), -1.0 / 3.0);
  const long sites = static_cast<long>(std::ceil(2 * c_h(1.0) / step)) + 1;
  std::vector<double> grid(static_cast<std::size_t>(sites + 1));
  for (std::size_t k = 0; k < grid.size(); ++k) grid[k] = static_cast<double>(k) * step;
  Stream s(9, ModuleId::env, 0);
  const auto x1 = sample_bm(grid, s), x2 = sample_bm(grid, s);
  const auto env = env_from_brownian(n, x1.times, x1.values, x2.times, x2.values);
  EXPECT_EQ(env.at(0), 0.0);
  const auto ps = prefix_sums(env);
  const double sc = std::pow(static_cast<double>(n), 1.0 / 6.0);
  for (long y = 0; y <= env.hi; ++y)
    EXPECT_NEAR(ps.sigma_plus[y] / sc, x2.values[y], 1e-10 * (1 + std::abs(x2.values[y])));
  for (long x = 0; x <= -env.lo; ++x)
    EXPECT_NEAR(ps.sigma_minus[x] / sc, x1.values[x], 1e-10 * (1 + std::abs(x1.values[x])));

  // Zero path gives a zero field.
  const std::vector<double> z(grid.size(), 0.0);
  const auto e0 = env_from_brownian(n, grid, z, grid, z);
  for (double w : e0.values) EXPECT_EQ(w, 0.0);

  auto bad = grid;
  for (auto& t : bad) t *= 1.01;
  EXPECT_THROW(env_from_brownian(n, bad, z, grid, z), std::invalid_argument);
}

TEST(Env, FromBrownianIncrementsStandard) {
  const long n = 1000;
  const double step = 0.1;
  std::vector<double> grid(2001);
  for (std::size_t k = 0; k < grid.size(); ++k) grid[k] = static_cast<double>(k) * step;
  Stream s(10, ModuleId::env, 0);
  const auto x1 = sample_bm(grid, s), x2 = sample_bm(grid, s);
  const auto env = env_from_brownian(n, x1.times, x1.values, x2.times, x2.values);
  std::vector<double> inc(env.values.begin() + 1 + (-env.lo), env.values.end());
  EXPECT_NEAR(variance(inc), 1.0, 0.1);
}

TEST(Env, SerializationRoundTrip) {
  const auto env = generate_environment(Law::stable(1.3, 0.7, 0.3), -7, 9, 123);
  std::stringstream ss;
  write_env_binary(ss, env);
  EXPECT_EQ(ss.str().substr(0, 7), "RPLENV1");
  const auto back = read_env_binary(ss);
  EXPECT_EQ(back.lo, env.lo);
  EXPECT_EQ(back.hi, env.hi);
  EXPECT_EQ(back.seed, env.seed);
  EXPECT_EQ(back.law.kind, env.law.kind);
  EXPECT_EQ(back.values, env.values);
  std::ostringstream csv;
  write_env_csv(csv, env);
  EXPECT_EQ(csv.str().substr(0, 8), "z,omega\n");
  std::istringstream junk("garbage!");
  EXPECT_THROW(read_env_binary(junk), std::runtime_error);
}

TEST(Skorokhod, UnitExitTimeMean) {
  // E[tau] for exit of (-1,1) is 1.
  Stream s(1, ModuleId::env, 0);
  const auto& tau = detail::unit_exit_time();
  std::vector<double> v(200'000);
  for (auto& x : v) x = tau.sample(s);
  EXPECT_NEAR(mean(v), 1.0, 5 * std_error(v));
  EXPECT_NEAR(detail::UnitExitTime::cdf(0.39999) , detail::UnitExitTime::cdf(0.40001), 1e-4);
}

TEST(Skorokhod, TwoPoint) {
  const auto rec = skorokhod_embed(Law::two_point(), 1'000'000, 3);
  double plus = 0;
  for (double v : rec.embedded_values) {
    ASSERT_TRUE(v == 1.0 || v == -1.0);
    plus += v > 0;
  }
  EXPECT_NEAR(plus / 1e6, 0.5, 5 * 0.5 / 1e3);
  EXPECT_NEAR(mean(rec.stop_times), 1.0, 0.01);
}

TEST(Skorokhod, Degenerate) {
  const auto rec = skorokhod_embed(Law::degenerate(), 100, 3);
  for (std::size_t i = 0; i < 100; ++i) {
    EXPECT_EQ(rec.stop_times[i], 0.0);
    EXPECT_EQ(rec.embedded_values[i], 0.0);
  }
}

TEST(Skorokhod, UniformMatchesLaw) {
  const Law law = Law::uniform(1.0);
  const auto rec = skorokhod_embed(law, 100'000, 4);
  const double ks = ks_statistic(rec.embedded_values, [&](double t) { return law.cdf(t); });
  EXPECT_LE(ks, 0.005);
  EXPECT_NEAR(mean(rec.stop_times), law.second_moment(), 5 * std_error(rec.stop_times));
}

TEST(Skorokhod, GaussianAndDiscrete) {
  const auto rec = skorokhod_embed(Law::gaussian(), 50'000, 5);
  EXPECT_LE(ks_two_sample(rec.embedded_values, generate_environment(Law::gaussian(), 0, 49'999, 6).values).statistic,
            0.02);
  EXPECT_NEAR(mean(rec.stop_times), 1.0, 5 * std_error(rec.stop_times));

  const Law d = Law::discrete({-2.0, 0.0, 1.0}, {0.25, 0.25, 0.5});
  const auto r2 = skorokhod_embed(d, 100'000, 8);
  std::map<double, double> freq;
  for (double v : r2.embedded_values) freq[v] += 1e-5;
  EXPECT_NEAR(freq[-2.0], 0.25, 0.01);
  EXPECT_NEAR(freq[0.0], 0.25, 0.01);
  EXPECT_NEAR(freq[1.0], 0.5, 0.01);
  EXPECT_NEAR(mean(r2.stop_times), d.second_moment(), 5 * std_error(r2.stop_times));
}

TEST(Skorokhod, Errors) {
  EXPECT_THROW(skorokhod_embed(Law::discrete({0.0, 1.0}, {0.5, 0.5}), 10, 1), std::invalid_argument);
  EXPECT_THROW(skorokhod_embed(Law::stable(1.5, 0.5, 0.5), 10, 1), std::invalid_argument);
}
