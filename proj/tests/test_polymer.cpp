#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <sstream>

#include "rpl/polymer.hpp"

using namespace rpl;

namespace {

// Direct sum over all 2^n paths.
struct Brute {
  double log_z;
  std::map<std::pair<long, long>, double> law;
};

Brute brute_force(const Environment& env, const PolymerParams& p) {
  std::vector<double> w;
  std::vector<std::pair<long, long>> key;
  for (unsigned long bits = 0; bits < (1UL << p.n); ++bits) {
    long s = 0, lo = 0, hi = 0;
    for (long k = 0; k < p.n; ++k) {
      s += (bits >> k) & 1 ? 1 : -1;
      lo = std::min(lo, s);
      hi = std::max(hi, s);
    }
    double sum = 0;
    for (long z = lo; z <= hi; ++z) sum += env.at(z);
    w.push_back(p.beta * sum - p.h * static_cast<double>(hi - lo + 1) - static_cast<double>(p.n) * std::log(2.0));
    key.emplace_back(-lo, hi);
  }
  Brute b;
  b.log_z = log_sum_exp(w);
  for (std::size_t i = 0; i < w.size(); ++i) b.law[key[i]] += std::exp(w[i] - b.log_z);
  return b;
}

double brute_halfline(const Environment& env, const PolymerParams& p) {
  std::vector<double> w;
  for (unsigned long bits = 0; bits < (1UL << p.n); ++bits) {
    long s = 0, hi = 0;
    bool ok = true;
    for (long k = 0; k < p.n && ok; ++k) {
      s += (bits >> k) & 1 ? 1 : -1;
      ok = s >= 0;
      hi = std::max(hi, s);
    }
    if (!ok) continue;
    double sum = 0;
    for (long z = 0; z <= hi; ++z) sum += env.at(z);
    w.push_back(p.beta * sum - p.h * static_cast<double>(hi) - static_cast<double>(p.n) * std::log(2.0));
  }
  return log_sum_exp(w);
}

Environment constant_env(long half, double c) {
  Environment e;
  e.lo = -half;
  e.hi = half;
  e.values.assign(static_cast<std::size_t>(2 * half + 1), c);
  return e;
}

}  // namespace

TEST(Polymer, SmallNClosedForms) {
  const double h = 0.7;
  EXPECT_NEAR(endpoint_marginal(PolymerParams{1, 0.0, h}).log_z, -2 * h, 1e-15);
  const double z2 = 0.5 * std::exp(-2 * h) + 0.5 * std::exp(-3 * h);
  EXPECT_NEAR(endpoint_marginal(PolymerParams{2, 0.0, h}).log_z, std::log(z2), 1e-14);
  const auto env = constant_env(4, 0.0);
  EXPECT_NEAR(halfline_partition(env, PolymerParams{1, 1.0, h}), std::log(0.5 * std::exp(-h)), 1e-15);
}

TEST(Polymer, MatchesPathEnumeration) {
  for (long n = 1; n <= 14; ++n) {
    const auto env = generate_environment(Law::gaussian(), -n - 1, n + 1, 100 + static_cast<std::uint64_t>(n));
    for (double beta : {0.0, 0.8}) {
      const PolymerParams p{n, beta, 1.3};
      const auto b = brute_force(env, p);
      const auto m = endpoint_marginal(env, p);
      EXPECT_NEAR(m.log_z, b.log_z, 1e-12 * std::max(1.0, std::abs(b.log_z))) << n;
      EXPECT_EQ(m.truncation, 0.0);
      double total = 0;
      m.for_each([&](long x, long y, double pr) {
        total += pr;
        const auto it = b.law.find({x, y});
        EXPECT_NEAR(pr, it == b.law.end() ? 0.0 : it->second, 1e-12) << n << ' ' << x << ' ' << y;
      });
      EXPECT_NEAR(total, 1.0, 1e-12);
      EXPECT_NEAR(halfline_partition(env, p), brute_halfline(env, p), 1e-12 * std::max(1.0, std::abs(b.log_z)));
    }
  }
}

TEST(Polymer, ConstantShiftIdentity) {
  const double c = 0.3, beta = 0.9, h = 1.1;
  for (long n : {10L, 1000L, 100000L}) {
    const long half = lattice_sites(n, h);
    const auto shifted = endpoint_marginal(constant_env(half, c), PolymerParams{n, beta, h});
    const auto plain = endpoint_marginal(constant_env(half, 0.0), PolymerParams{n, 0.0, h - beta * c});
    EXPECT_NEAR(shifted.log_z, plain.log_z, 1e-12 * std::abs(plain.log_z)) << n;
  }
}

TEST(Polymer, RestrictedPartitionIsGibbsMass) {
  const long n = 10000;
  const long cap = lattice_sites(n, 1.0);
  const auto env = generate_environment(Law::gaussian(), -cap, cap, 5);
  const auto m = endpoint_marginal(env, PolymerParams{n, 1.0, 1.0});
  const Restriction left = [](long x, long y) { return x > y; };
  const double lz = log_partition(m, left);
  EXPECT_NEAR(std::exp(lz - m.log_z), m.mass(left), 1e-12);
  EXPECT_EQ(log_partition(m, [](long, long) { return false; }), kNegInf);
  EXPECT_EQ(log_partition(m), m.log_z);
  EXPECT_EQ(log_partition(env, PolymerParams{n, 1.0, 1.0}, left), lz);
}

TEST(Polymer, DecreasingInH) {
  const long n = 1000;
  const auto env = generate_environment(Law::uniform(), -200, 200, 9);
  double prev = std::numeric_limits<double>::infinity();
  for (double h : {0.25, 0.5, 1.0, 2.0, 4.0}) {
    const double z = log_partition(env, PolymerParams{n, 1.0, h});
    EXPECT_LT(z, prev) << h;
    prev = z;
  }
}

TEST(Polymer, HomogeneousMarginalIgnoresEnvironment) {
  const long n = 5000;
  const long cap = lattice_sites(n, 1.0);
  std::string first;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto env = generate_environment(Law::two_point(), -cap, cap, seed);
    std::ostringstream os;
    write_marginal_csv(os, endpoint_marginal(env, PolymerParams{n, 0.0, 1.0}));
    if (first.empty())
      first = os.str();
    else
      EXPECT_EQ(os.str(), first);
  }
  EXPECT_EQ(first.substr(0, 9), "x,y,prob\n");
}

TEST(Polymer, TruncationIsCertified) {
  const long n = 100000;
  const long cap = lattice_sites(n, 1.0);
  const auto env = generate_environment(Law::gaussian(), -cap, cap, 21);
  const PolymerParams p{n, 1.0, 1.0};
  const auto m = endpoint_marginal(env, p);
  EXPECT_LT(m.truncation, 1e-10);
  // Three times wider T-range, same caps.
  PolymerWindow wide = m.window;
  const double ts = AsymptoticKernel{1.0, static_cast<double>(n)}.t_star();
  wide.t_lo = std::max(1L, static_cast<long>(ts * (1 - 3 * wide.eps)));
  wide.t_hi = std::min(wide.x_cap + wide.y_cap, static_cast<long>(ts * (1 + 3 * wide.eps)));
  const auto tab = build_table_range(n, wide.t_lo, wide.t_hi, wide.x_cap, wide.y_cap, 1.0);
  const auto ps = prefix_sums(env);
  LogSumExp z;
  tab.for_each([&](long x, long y, double lp) {
    z.add(lp - static_cast<double>(x + y + 1) + ps.sigma_minus[x] + ps.sigma_plus[y]);
  });
  EXPECT_LE(z.value() - m.log_z, m.truncation + 1e-13);
  EXPECT_GE(z.value() - m.log_z, -1e-13);
}

TEST(Polymer, FirstOrderHomogeneous) {
  const long n = 1000000;
  const auto m = endpoint_marginal(PolymerParams{n, 0.0, 1.0});
  EXPECT_NEAR(first_order_constant(1.0), -3.21754, 1e-5);
  EXPECT_LE(std::abs(m.log_z / std::cbrt(1e6) - first_order_constant(1.0)), 0.05 * 3.21754);
  const auto s = m.summary();
  EXPECT_NEAR(s.mean_t, (AsymptoticKernel{1.0, 1e6}.t_star()), 5.0);
  EXPECT_EQ(s.t_quantiles.size(), 5u);
  EXPECT_LE(s.t_quantiles.front(), s.t_quantiles.back());
}

TEST(Polymer, HomogeneousFluctuations) {
  const auto r = homogeneous_fluctuations(1000000, 1.0);
  EXPECT_NEAR(r.a_n, 8.46, 0.01);
  EXPECT_LE(r.tv_sine, 0.05);
  EXPECT_NEAR(r.sd_delta / r.a_n, 1.0, 0.02);
  // The mean of T - T* stays near -2 at every n, so the KS distance to
  // N(0,1) only decays like 1/a_n. The recentred distance is small.
  EXPECT_NEAR(r.mean_delta, -2.15, 0.1);
  EXPECT_LE(r.ks_recentered, 0.05);
  const auto small = homogeneous_fluctuations(1000, 1.0);
  EXPECT_LT(r.ks_normal, small.ks_normal);
  EXPECT_LT(r.tv_sine, small.tv_sine);
  EXPECT_NO_THROW(homogeneous_fluctuations(4, 1.0));
}

TEST(Polymer, ThetaRatioTrend) {
  const auto a = theta_ratio(1000, 1.0), b = theta_ratio(1000000, 1.0);
  EXPECT_LT(std::abs(b.mean_log_ratio), std::abs(a.mean_log_ratio));
  EXPECT_GT(b.covered_mass, 0.99);
}

TEST(Polymer, LocalizationMonotone) {
  const long n = 100000;
  const auto sys = build_coupled_system(n, 3);
  const auto env = env_from_brownian(n, sys.x1.times, sys.x1.values, sys.x2.times, sys.x2.values);
  const auto m = endpoint_marginal(env, PolymerParams{n, 1.0, 1.0});
  const auto w2 = solve_w2(sys, 1.0, 4);
  const auto c = w2_centers(sys, w2);
  const auto r = endpoint_localization(m, sys.u_star, 0.2, c.x, c.y, {0.5, 1, 2, 4, 8});
  EXPECT_TRUE(r.monotone);
  EXPECT_GT(r.first_order_mass, 0.0);
  EXPECT_LE(r.second_order_mass.back(), 1.0 + 1e-12);
  EXPECT_NEAR(mass_near(m, 0, 0, 1e9), 1.0, 1e-12);
}

TEST(Polymer, ExpansionRowAndCsv) {
  const double f1 = first_order_constant(1.0);
  const double lz = f1 * 1e2 + 2.0 * 1e1;  // n = 1e6: n^{1/3} = 100, n^{1/6} = 10
  const auto r = expansion_row(1000000, 3, lz, 1.0, 1.0, 1.5, 0.7);
  EXPECT_NEAR(r.residual2, 2.0, 1e-12);
  EXPECT_NEAR(r.residual3, std::numbers::sqrt2 * (20.0 - 15.0) / std::pow(1e6, 1.0 / 9.0), 1e-12);
  const auto r0 = expansion_row(1000000, 0, lz, 0.0, 1.0, 1.5, 0.7);
  EXPECT_NEAR(r0.residual2, 2.0, 1e-12);
  EXPECT_TRUE(std::isnan(r0.residual3));
  std::ostringstream os;
  write_expansion_csv(os, {r, r0});
  std::string line;
  std::istringstream is(os.str());
  std::getline(is, line);
  EXPECT_EQ(line, "n,replica,logZ,residual2,residual3,ref_sup,ref_w2");
  std::getline(is, line);
  EXPECT_EQ(line.substr(0, 10), "1000000,3,");
}

TEST(Halfline, ThirdOrderAndProbe) {
  const long n = 10000;
  const auto sys = build_halfline_system(n, 17);
  const auto env = halfline_environment(sys);
  EXPECT_EQ(env.lo, 0);
  const auto m = halfline_marginal(env, PolymerParams{n, 1.0, 1.0});
  EXPECT_LT(m.truncation, 1e-10);
  double total = 0;
  for (long T = m.table.t_lo; T <= m.table.t_hi; ++T) total += m.prob(T);
  EXPECT_NEAR(total, 1.0, 1e-12);
  EXPECT_TRUE(std::isfinite(halfline_third_order(sys, 1.0, m.log_z)));

  const auto pr = local_limit_probe(sys, 1.0, 6);
  double theta = 0;
  for (const auto& row : pr.rows) theta += std::exp(row.predicted);
  EXPECT_NEAR(theta, pr.theta, 1e-12 * pr.theta);
  EXPECT_LE(pr.window_mass, 1.0 + 1e-12);
  for (const auto& row : pr.rows) EXPECT_LE(row.predicted, 1e-12);
}

TEST(Polymer, RejectsBadParameters) {
  EXPECT_THROW(PolymerParams({0, 1.0, 1.0}).validate(), std::invalid_argument);
  EXPECT_THROW(PolymerParams({10, -1.0, 1.0}).validate(), std::invalid_argument);
  EXPECT_THROW(PolymerParams({10, 1.0, 0.0}).validate(), std::invalid_argument);
  EXPECT_THROW(endpoint_marginal(PolymerParams{10, 1.0, 1.0}), std::invalid_argument);
  EXPECT_THROW(endpoint_marginal(constant_env(0, 0.0), PolymerParams{100, 1.0, 1.0}), std::invalid_argument);
}

TEST(Polymer, TwoStepMarginal) {
  const auto m = endpoint_marginal(PolymerParams{2, 0.0, 1.0});
  const double z = 0.5 * std::exp(-2.0) + 0.5 * std::exp(-3.0);
  EXPECT_NEAR(m.prob(1, 0), 0.25 * std::exp(-2.0) / z, 1e-15);
  EXPECT_NEAR(m.prob(0, 1), m.prob(1, 0), 1e-15);
  EXPECT_NEAR(m.prob(2, 0), 0.25 * std::exp(-3.0) / z, 1e-15);
  EXPECT_EQ(m.prob(1, 1), 0.0);
}

TEST(Polymer, RandomShiftTriples) {
  Stream s(77, ModuleId::polymer, 0);
  for (int i = 0; i < 20; ++i) {
    const double h = 0.5 + 1.5 * s.uniform(), beta = 2.0 * s.uniform();
    const double c = (s.uniform() - 0.5) * 0.4 / std::max(beta, 0.1);  // keeps h - beta c > 0
    const long n = 50 + static_cast<long>(2000 * s.uniform());
    const long half = lattice_sites(n, std::min(h, h - beta * c));
    const auto a = endpoint_marginal(constant_env(half, c), PolymerParams{n, beta, h});
    const auto b = endpoint_marginal(constant_env(half, 0.0), PolymerParams{n, 0.0, h - beta * c});
    EXPECT_NEAR(a.log_z, b.log_z, 1e-12 * std::abs(b.log_z)) << h << ' ' << beta << ' ' << c;
    const auto ha = halfline_partition(constant_env(half, c), PolymerParams{n, beta, h});
    // Half-line: the field adds beta c (M^+ + 1), so the penalty becomes h - beta c plus a constant.
    const auto hb = halfline_partition(constant_env(half, 0.0), PolymerParams{n, 0.0, h - beta * c}) + beta * c;
    EXPECT_NEAR(ha, hb, 1e-12 * std::abs(hb));
  }
}

TEST(Polymer, ReflectionSymmetricEnvironment) {
  const long n = 3000, half = 100;
  auto env = generate_environment(Law::gaussian(), -half, half, 8);
  for (long z = 1; z <= half; ++z) env.values[static_cast<std::size_t>(-z + half)] = env.at(z);
  const auto m = endpoint_marginal(env, PolymerParams{n, 1.0, 1.0});
  m.for_each([&](long x, long y, double p) { EXPECT_NEAR(p, m.prob(y, x), 1e-12 * std::max(p, 1e-300)); });
}

TEST(Polymer, HomogeneousResidualVanishes) {
  std::vector<ExpansionInput> in;
  for (long n : {1000L, 10000L, 100000L, 1000000L})
    in.push_back({n, 0, endpoint_marginal(PolymerParams{n, 0.0, 1.0}).log_z});
  const auto rep = expansion_report(in, 0.0, 1.0, 2);
  for (const auto& r : rep.rows) {
    const double nd = static_cast<double>(r.n);
    EXPECT_LE(std::abs(r.residual2), 2.0 * std::log(nd) / std::pow(nd, 1.0 / 6.0)) << r.n;
  }
  EXPECT_EQ(rep.f1_n, 1000000);
  EXPECT_NEAR(rep.f1_estimate, -3.21754, 0.05 * 3.21754);
  EXPECT_EQ(rep.eps.size(), 4u);
  EXPECT_THROW(expansion_report(in, 1.0, 1.0, 2), std::invalid_argument);
  EXPECT_NO_THROW(expansion_report(in, 1.0, 1.0, 1));
  in[0].ref_sup = 0.1;
  for (auto& e : in) e.ref_sup = 0.1;
  EXPECT_THROW(expansion_report(in, 1.0, 1.0, 3), std::invalid_argument);
}

TEST(Polymer, FullLocalizationWindow) {
  const long n = 10000;
  const auto sys = build_coupled_system(n, 4);
  const auto env = env_from_brownian(n, sys.x1.times, sys.x1.values, sys.x2.times, sys.x2.values);
  const auto m = endpoint_marginal(env, PolymerParams{n, 1.0, 1.0});
  // The environment reaches 2 c_h n^{1/3} on both sides, so eps = c_h
  // leaves a thin far tail; eps = 3 c_h covers the whole window.
  const auto r = endpoint_localization(m, sys.u_star, sys.ch, 0, 0, {});
  EXPECT_GE(r.first_order_mass, 1.0 - 1e-6);
  const auto all = endpoint_localization(m, sys.u_star, 3 * sys.ch, 0, 0, {});
  EXPECT_GE(all.first_order_mass, 1.0 - m.truncation - 1e-12);
}

TEST(Halfline, FirstOrderHomogeneous) {
  const long n = 1000000;
  const auto env = constant_env(lattice_sites(n, 1.0), 0.0);
  const double lz = halfline_partition(env, PolymerParams{n, 0.0, 1.0});
  EXPECT_LE(std::abs(lz / 100.0 - first_order_constant(1.0)), 0.05 * 3.21754);
}
