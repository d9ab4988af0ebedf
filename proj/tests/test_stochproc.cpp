#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "rpl/stats.hpp"
#include "rpl/stochproc.hpp"

using namespace rpl;

namespace {

double rayleigh_cdf(double y) { return y <= 0 ? 0.0 : 1.0 - std::exp(-0.5 * y * y); }

// CDF of the standard meander marginal at time t, by quadrature.
double meander_marginal_cdf(double t, double y) { return meander_cdf(t, y); }

}  // namespace

TEST(BM, StartsAtZeroAndIncrementsHaveRightVariance) {
  const auto grid = uniform_grid(10.0, 100'000);
  const auto p = sample_bm(grid, 1);
  EXPECT_EQ(p.values[0], 0.0);
  // Chi-square on standardized increments binned by normal quantiles.
  std::vector<double> obs(20, 0.0), exp(20, 1e5 / 20);
  for (std::size_t i = 1; i < p.size(); ++i) {
    const double z = (p.values[i] - p.values[i - 1]) / std::sqrt(grid[i] - grid[i - 1]);
    obs[std::min<std::size_t>(19, static_cast<std::size_t>(normal_cdf(z) * 20))] += 1;
  }
  EXPECT_GE(chi_square(obs, exp).p_value, 0.01);
  EXPECT_THROW(sample_bm({0.0, 1.0, 0.5}, 1), std::invalid_argument);
}

TEST(BM, RefinementKeepsCoarseValues) {
  Stream s(2, ModuleId::stochproc, 0);
  const auto coarse = sample_bm(uniform_grid(1.0, 10), s);
  const auto fine = refine_bridge(coarse, uniform_grid(1.0, 1000), s);
  EXPECT_EQ(fine.size(), 1001u);
  for (std::size_t i = 0; i < coarse.size(); ++i) {
    const auto j = fine.index_of(coarse.times[i]);
    ASSERT_NE(j, static_cast<std::size_t>(-1));
    EXPECT_EQ(fine.values[j], coarse.values[i]);
  }
  // Extension beyond the end is free Brownian motion.
  const auto ext = refine_bridge(coarse, {1.5, 2.0}, s);
  EXPECT_EQ(ext.times.back(), 2.0);
}

TEST(BM, BridgeMidpointVariance) {
  std::vector<double> mids;
  Stream s(3, ModuleId::stochproc, 0);
  for (int r = 0; r < 20000; ++r) {
    ProcessPath p;
    p.times = {0.0, 1.0};
    p.values = {0.0, 0.0};
    mids.push_back(refine_bridge(p, {0.5}, s).values[1]);
  }
  EXPECT_NEAR(variance(mids), 0.25, 0.01);
}

TEST(Meander, MarginalDensity) {
  for (double y : {0.1, 0.7, 1.5, 3.0}) EXPECT_NEAR(meander_marginal_density(1.0, y), y * std::exp(-y * y / 2), 1e-15);
  EXPECT_EQ(meander_marginal_density(0.5, 0.0), 0.0);
  EXPECT_NEAR(meander_cdf(0.5, 20.0), 1.0, 1e-8);
  EXPECT_NEAR(meander_cdf(0.05, 5.0), 1.0, 1e-8);
  EXPECT_THROW(meander_marginal_density(0.0, 1.0), std::domain_error);
  EXPECT_THROW(meander_marginal_density(1.5, 1.0), std::domain_error);
  // Duration-T scaling.
  EXPECT_NEAR(meander_marginal_density(0.6, 0.8, 2.0), meander_marginal_density(0.3, 0.8 / std::sqrt(2.0)) / std::sqrt(2.0),
              1e-14);
}

TEST(Meander, KernelNormalized) {
  const MeanderKernel K(1.0);
  for (auto [s, x, t] : {std::array<double, 3>{0.1, 0.3, 0.4}, {0.5, 1.2, 0.9}, {0.2, 0.01, 1.0}}) {
    double tot = 0;
    const double hi = x + 12 * std::sqrt(t - s);
    for (int k = 0; k < 400; ++k)
      tot += detail::gauss_legendre([&](double y) { return K.transition_density(s, x, t, y); }, hi * k / 400,
                                    hi * (k + 1) / 400);
    EXPECT_NEAR(tot, 1.0, 1e-6);
  }
}

TEST(Meander, EndpointRayleighAndPositivity) {
  Stream s(4, ModuleId::stochproc, 0);
  const std::vector<double> grid{0.0, 0.3, 0.6, 1.0};
  std::vector<double> ends, mid;
  for (int r = 0; r < 20'000; ++r) {
    const auto p = sample_meander(grid, 1.0, s);
    for (std::size_t i = 1; i < p.size(); ++i) ASSERT_GT(p.values[i], 0.0);
    ends.push_back(p.values.back());
    mid.push_back(p.values[1]);
  }
  EXPECT_LE(ks_statistic(ends, rayleigh_cdf), 0.02);
  // Marginal at t = 0.3 against the density by chi-square.
  std::vector<double> edges;
  for (int k = 0; k <= 20; ++k) edges.push_back(k * 0.1);
  std::vector<double> obs(21, 0.0), exp(21, 0.0);
  for (double v : mid) obs[std::min<std::size_t>(20, static_cast<std::size_t>(v / 0.1))] += 1;
  for (int k = 0; k < 20; ++k) exp[k] = 2e4 * (meander_marginal_cdf(0.3, edges[k + 1]) - meander_marginal_cdf(0.3, edges[k]));
  exp[20] = 2e4 * (1 - meander_marginal_cdf(0.3, 2.0));
  EXPECT_GE(chi_square(obs, exp).p_value, 0.01);
}

TEST(Meander, DurationScaling) {
  Stream s(5, ModuleId::stochproc, 0);
  std::vector<double> a, b;
  for (int r = 0; r < 5000; ++r) {
    a.push_back(sample_meander({0.0, 0.5, 1.0}, 1.0, s).values[1]);
    b.push_back(sample_meander({0.0, 2.0, 4.0}, 4.0, s).values[1] / 2.0);
  }
  EXPECT_GE(ks_two_sample(a, b).p_value, 0.01);
}

TEST(Meander, Determinism) {
  const auto g = uniform_grid(1.0, 8);
  const auto a = sample_meander(g, 1.0, 77), b = sample_meander(g, 1.0, 77);
  EXPECT_EQ(a.values, b.values);
}

TEST(Bessel, PositiveSecondMomentAndScaling) {
  Stream s(6, ModuleId::stochproc, 0);
  const std::vector<double> grid{0.0, 0.5, 1.0, 2.0};
  std::vector<double> sq, b1, b2;
  for (int r = 0; r < 100'000; ++r) {
    const auto p = sample_bessel3(grid, s);
    EXPECT_EQ(p.values[0], 0.0);
    for (std::size_t i = 1; i < p.size(); ++i) ASSERT_GT(p.values[i], 0.0);
    sq.push_back(p.values[2] * p.values[2]);
    b1.push_back(p.values[1]);
    b2.push_back(p.values[3] / 2.0);  // B_2 / sqrt(4) ~ B_{1/2}
  }
  EXPECT_NEAR(mean(sq), 3.0, 0.06);
  EXPECT_GE(ks_two_sample(b1, b2).p_value, 0.01);
  const auto two = sample_two_sided_bessel(grid, s);
  EXPECT_EQ(two.value_at(0.0), 0.0);
  EXPECT_GT(two.value_at(-1.0), 0.0);
}

TEST(Excursion, EndpointsMidpointAndMax) {
  Stream s(7, ModuleId::stochproc, 0);
  const auto grid = uniform_grid(1.0, 16);
  std::vector<double> mids;
  for (int r = 0; r < 100'000; ++r) {
    const auto e = sample_excursion(grid, s);
    ASSERT_EQ(e.values.front(), 0.0);
    ASSERT_EQ(e.values.back(), 0.0);
    ASSERT_GT(*std::max_element(e.values.begin(), e.values.end()), 0.0);
    mids.push_back(e.value_at(0.5));
  }
  EXPECT_LE(ks_statistic(mids, excursion_midpoint_cdf), 0.02);
}

TEST(Excursion, MeanderFromExcursion) {
  Stream s(8, ModuleId::stochproc, 0);
  const auto grid = uniform_grid(1.0, 10);
  std::vector<double> at07, ends;
  for (int r = 0; r < 100'000; ++r) {
    const double U = s.uniform();
    const auto e = sample_excursion(meander_excursion_grid(grid, U), s);
    const auto m = meander_from_excursion(e, U);
    for (std::size_t i = 0; i < m.size(); ++i)
      if (m.times[i] <= U) ASSERT_EQ(m.values[i], e.values[i]);
    // Literal endpoint: e_U + e_{1-(1-U)} = 2 e_U.
    ASSERT_EQ(m.values.back(), e.value_at(U) + e.value_at(U));
    at07.push_back(m.value_at(0.7));
    ends.push_back(m.values.back());
  }
  EXPECT_LE(ks_statistic(at07, [](double y) { return meander_cdf(0.7, y); }), 0.02);
  EXPECT_LE(ks_statistic(ends, rayleigh_cdf), 0.02);
}

TEST(Excursion, KernelAndExcursionMeandersAgree) {
  Stream s(9, ModuleId::stochproc, 0);
  const std::vector<double> grid{0.0, 0.25, 0.5, 0.75, 1.0};
  std::vector<std::vector<double>> a(3), b(3);
  for (int r = 0; r < 20'000; ++r) {
    const auto k = sample_meander(grid, 1.0, s);
    const double U = s.uniform();
    const auto m = meander_from_excursion(sample_excursion(meander_excursion_grid(grid, U), s), U);
    for (int j = 0; j < 3; ++j) {
      a[j].push_back(k.values[j + 1]);
      b[j].push_back(m.value_at(grid[j + 1]));
    }
  }
  for (int j = 0; j < 3; ++j) EXPECT_GE(ks_two_sample(a[j], b[j]).p_value, 0.01) << "t=" << grid[j + 1];
}

TEST(Coupling, BesselExcursionSplice) {
  Stream s(10, ModuleId::stochproc, 0);
  const auto grid = uniform_grid(1.0, 10'000);
  int positive = 0;
  std::vector<double> spliced, plain;
  const int runs = 300;
  for (int r = 0; r < runs; ++r) {
    Stream rs = s.split(static_cast<std::uint64_t>(r));
    const auto c = couple_bessel_excursion(grid, rs);
    positive += c.eps > 0;
    EXPECT_LE(c.match_time, c.eps + 1e-15);
    for (std::size_t i = 0; i < c.excursion.size() && c.excursion.times[i] <= c.match_time; ++i)
      ASSERT_EQ(c.excursion.values[i], c.bessel.values[i]);
    EXPECT_EQ(c.excursion.values.front(), 0.0);
    EXPECT_EQ(c.excursion.values.back(), 0.0);
    spliced.push_back(c.spliced_mid_modulus);
    plain.push_back(sample_excursion(uniform_grid(1.0, 4), rs).value_at(0.25));
  }
  EXPECT_GE(positive, runs * 99 / 100);
  EXPECT_GE(ks_two_sample(spliced, plain).p_value, 0.01);
}

TEST(MaxDecomposition, MeandersFromMax) {
  Stream s(11, ModuleId::stochproc, 0);
  const auto grid = uniform_grid(1.0, 10'000);
  std::vector<double> ends, lf, rf;
  for (int r = 0; r < 3000; ++r) {
    const auto d = decompose_bm_at_max(sample_bm(grid, s));
    EXPECT_EQ(d.left.values.front(), 0.0);
    EXPECT_EQ(d.right.values.front(), 0.0);
    for (double v : d.left.values) ASSERT_GE(v, 0.0);
    for (double v : d.right.values) ASSERT_GE(v, 0.0);
    if (d.at_boundary) continue;
    ends.push_back(rescale_to_unit(d.right).values.back());
    lf.push_back(rescale_to_unit(d.left).values.back());
    rf.push_back(rescale_to_unit(d.right).values.back());
  }
  EXPECT_LE(ks_statistic(ends, rayleigh_cdf), 0.03);
  EXPECT_LE(std::abs(pearson(lf, rf)), 0.05);
}

TEST(MeanderBounds, AllHold) {
  Stream s(12, ModuleId::stochproc, 0);
  const auto grid = uniform_grid(1.0, 64);
  std::vector<ProcessPath> samples;
  for (int r = 0; r < 20'000; ++r) {
    const double U = s.uniform();
    auto m = meander_from_excursion(sample_excursion(meander_excursion_grid(grid, U), s), U);
    ProcessPath q;
    q.kind = PathKind::meander;
    q.duration = 1.0;
    q.times = grid;
    for (double t : grid) q.values.push_back(m.value_at(t));
    samples.push_back(std::move(q));
  }
  const auto rep = meander_bound_checks(samples);
  for (const auto& c : rep.checks) EXPECT_TRUE(c.holds) << c.name << " lhs=" << c.lhs << " rhs=" << c.rhs;
  // The exponential-moment bound at (0.2, 0.5).
  const auto it = std::find_if(rep.checks.begin(), rep.checks.end(), [](const BoundCheck& c) {
    return c.name == "exp_moment" && c.params[0] == 0.2;
  });
  ASSERT_NE(it, rep.checks.end());
  EXPECT_NEAR(it->rhs, std::pow(0.8, -1.5), 1e-12);
}

TEST(PathIO, BinaryRoundTrip) {
  const auto p = sample_bessel3(uniform_grid(1.0, 33), 5);
  std::stringstream ss;
  write_path_binary(ss, p);
  EXPECT_EQ(ss.str().substr(0, 8), "RPLPATH1");
  const auto q = read_path_binary(ss);
  EXPECT_EQ(q.kind, p.kind);
  EXPECT_EQ(q.times, p.times);
  EXPECT_EQ(q.values, p.values);
  std::ostringstream csv;
  write_path_csv(csv, p);
  EXPECT_EQ(csv.str().substr(0, 8), "t,value\n");
}
