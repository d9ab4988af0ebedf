#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "rpl/rangelaw.hpp"

using namespace rpl;

TEST(StayProbability, SmallCases) {
  EXPECT_NEAR(stay_probability(1, 1, 1), 0.0, 1e-15);
  EXPECT_NEAR(stay_probability(2, 0, 1), std::log(0.25), 1e-13);
  EXPECT_NEAR(stay_probability(4, 1, 1), std::log(0.25), 1e-13);
}

TEST(ExactRangeLaw, SmallCases) {
  EXPECT_NEAR(exact_range_law(4, 0, 1), std::log(1.0 / 16), 1e-13);
  EXPECT_NEAR(exact_range_law(1, 1, 0), std::log(0.5), 1e-13);
  EXPECT_EQ(exact_range_law(2, 0, 0), kNegInf);
}

TEST(ExactRangeLaw, MatchesEnumeration) {
  for (int n = 1; n <= 14; ++n) {
    const auto c = enumerate_range_counts(n);
    for (int x = 0; x <= n; ++x)
      for (int y = 0; y <= n; ++y) {
        const double p = std::ldexp(static_cast<double>(c[x][y]), -n);
        const double lp = exact_range_law(n, x, y);
        if (c[x][y] == 0) {
          EXPECT_EQ(lp, kNegInf) << n << ' ' << x << ' ' << y;
        } else {
          EXPECT_NEAR(std::exp(lp), p, 1e-12) << n << ' ' << x << ' ' << y;
        }
      }
  }
}

TEST(StayProbability, SpectralAgreesWithDp) {
  for (long n : {1L, 2L, 7L, 50L, 333L, 1000L})
    for (long K = 1; K <= 61; K += 3) {
      const auto sp = stay_probability_all(n, K), dp = dp_stay_probability_all(n, K);
      for (long o = 0; o < K; ++o) {
        const double a = sp[static_cast<std::size_t>(o)], b = dp[static_cast<std::size_t>(o)];
        if (b == kNegInf) {
          EXPECT_EQ(a, kNegInf);
          continue;
        }
        EXPECT_LE(std::abs(std::expm1(a - b)), 1e-10) << n << ' ' << K << ' ' << o;
      }
    }
}

TEST(StayProbability, DecaysInNAndObeysEigenBound) {
  for (long x : {0L, 3L, 10L})
    for (long y : {1L, 5L, 20L}) {
      double prev = 0;
      for (long n = 1; n <= 400; n += 13) {
        const double v = stay_probability(n, x, y);
        EXPECT_LE(v, prev + 1e-15);
        EXPECT_LE(v, detail::log_stay_bound(n, x + y + 1) + 1e-12);
        prev = v;
      }
    }
}

TEST(ExactRangeLaw, AgreesWithDpUpToT60) {
  for (long n : {10L, 100L, 500L, 1000L})
    for (long T = 1; T <= 60; ++T) {
      const auto dp = dp_range_law_all(n, T + 1);
      for (long x = 0; x <= T; ++x) {
        const double a = exact_range_law(n, x, T - x), b = dp[static_cast<std::size_t>(std::min(x, T - x))];
        if (b == kNegInf) {
          EXPECT_EQ(a, kNegInf) << n << ' ' << x << ' ' << T;
          continue;
        }
        EXPECT_LE(std::abs(std::expm1(a - b)), 1e-10) << n << ' ' << x << ' ' << T;
      }
    }
}

TEST(ExactRangeLaw, SymmetricAndInfeasible) {
  for (long n : {5L, 64L, 999L})
    for (long x = 0; x <= 30; ++x)
      for (long y = 0; y <= 30; ++y) EXPECT_EQ(exact_range_law(n, x, y), exact_range_law(n, y, x));
  EXPECT_EQ(exact_range_law(5, 4, 3), kNegInf);  // x+y > n
  EXPECT_EQ(exact_range_law(5, 2, 2), kNegInf);  // cover time 6 > 5
  EXPECT_GT(exact_range_law(6, 2, 2), kNegInf);
}

TEST(HalflineRangeLaw, SmallCases) {
  EXPECT_NEAR(halfline_range_law(1, 1), std::log(0.5), 1e-14);
  EXPECT_NEAR(halfline_range_law(2, 1), std::log(0.25), 1e-14);
  EXPECT_NEAR(halfline_range_law(3, 1), std::log(0.125), 1e-14);
  EXPECT_EQ(halfline_range_law(3, 4), kNegInf);
  // Enumeration for n <= 14.
  for (int n = 1; n <= 14; ++n) {
    std::vector<double> count(static_cast<std::size_t>(n + 1), 0.0);
    for (unsigned bits = 0; bits < (1u << n); ++bits) {
      int s = 0, hi = 0;
      bool ok = true;
      for (int k = 0; k < n && ok; ++k) {
        s += (bits >> k) & 1 ? 1 : -1;
        ok = s >= 0;
        hi = std::max(hi, s);
      }
      if (ok) count[static_cast<std::size_t>(hi)] += 1;
    }
    for (int T = 1; T <= n; ++T) {
      const double lp = halfline_range_law(n, T);
      if (count[static_cast<std::size_t>(T)] == 0)
        EXPECT_EQ(lp, kNegInf);
      else
        EXPECT_NEAR(std::exp(lp), std::ldexp(count[static_cast<std::size_t>(T)], -n), 1e-12) << n << ' ' << T;
    }
  }
}

TEST(BuildTable, FullWindowNormalizedAndMatchesEnumeration) {
  const auto t10 = build_table(10, WindowPolicy::full_window());
  EXPECT_NEAR(t10.total_mass(), 1.0, 1e-12);
  EXPECT_LE(t10.truncation_error, 1e-12);

  const auto t12 = build_table(12, WindowPolicy::full_window());
  const auto counts = enumerate_range_counts(12);
  t12.for_each([&](long x, long y, double lp) {
    const auto c = counts[static_cast<std::size_t>(x)][static_cast<std::size_t>(y)];
    if (c == 0)
      EXPECT_EQ(lp, kNegInf);
    else
      EXPECT_NEAR(std::exp(lp), std::ldexp(static_cast<double>(c), -12), 1e-12);
  });
  WindowPolicy enumerate;
  enumerate.mode = TableMode::enumeration;
  const auto te = build_table(12, enumerate);
  WindowPolicy dp;
  dp.mode = TableMode::exact_dp;
  const auto td = build_table(12, dp);
  ASSERT_EQ(te.size(), t12.size());
  for (std::size_t i = 0; i < te.size(); ++i) {
    if (te.logp[i] == kNegInf) {
      EXPECT_EQ(t12.logp[i], kNegInf);
      EXPECT_EQ(td.logp[i], kNegInf);
    } else {
      EXPECT_NEAR(std::exp(t12.logp[i]), std::exp(te.logp[i]), 1e-12);
      EXPECT_NEAR(std::exp(td.logp[i]), std::exp(te.logp[i]), 1e-12);
    }
  }
  t12.for_each([&](long x, long y, double lp) { EXPECT_EQ(lp, t12.at(y, x)); });
}

TEST(BuildTable, TiltedWindowCertifiedAgainstWiderWindow) {
  const long n = 1000000;
  const auto tab = build_table(n, WindowPolicy::tilted(1.0, 1e-10));
  const double rel = tilted_relative_truncation(tab);
  EXPECT_LE(rel, 1e-10);
  const double ts = AsymptoticKernel{1.0, static_cast<double>(n)}.t_star();
  EXPECT_LT(tab.t_lo, ts);
  EXPECT_GT(tab.t_hi, ts);
  const long w = std::max(tab.t_hi - static_cast<long>(ts), static_cast<long>(ts) - tab.t_lo);
  const auto wide = build_table_range(n, static_cast<long>(ts) - 3 * w, static_cast<long>(ts) + 3 * w, n, n, 1.0);
  LogSumExp in, all;
  tab.for_each([&](long x, long y, double lp) { in.add(lp - static_cast<double>(x + y + 1)); });
  wide.for_each([&](long x, long y, double lp) { all.add(lp - static_cast<double>(x + y + 1)); });
  EXPECT_GE(all.value(), in.value());
  EXPECT_LE(std::expm1(all.value() - in.value()), rel);
}

TEST(BuildTable, BinaryAndCsvRoundTrip) {
  const auto tab = build_table(40, WindowPolicy::range(5, 20, 1.0));
  std::stringstream ss;
  write_table_binary(ss, tab);
  EXPECT_EQ(ss.str().substr(0, 7), "RPLTAB1");
  const auto back = read_table_binary(ss);
  EXPECT_EQ(back.n, tab.n);
  EXPECT_EQ(back.t_lo, tab.t_lo);
  EXPECT_EQ(back.t_hi, tab.t_hi);
  EXPECT_EQ(back.logp, tab.logp);
  EXPECT_EQ(back.row_xmin, tab.row_xmin);
  EXPECT_EQ(back.log_tail_bound, tab.log_tail_bound);
  std::ostringstream csv;
  write_table_csv(csv, tab);
  EXPECT_EQ(csv.str().substr(0, 9), "x,y,logp\n");
  std::istringstream junk("RPLTAB0 nope");
  EXPECT_THROW(read_table_binary(junk), std::runtime_error);
}

TEST(AsymptoticKernel, Identities) {
  EXPECT_NEAR(AsymptoticKernel::g(3), std::log(2.0), 1e-15);
  EXPECT_NEAR(c_h(1.0), 2.14503, 1e-5);
  const AsymptoticKernel ak{1.0, 1e6};
  EXPECT_NEAR(ak.phi(ak.t_star()), 1.5 * ak.t_star(), 1e-9 * ak.t_star());
  EXPECT_NEAR(ak.dphi(ak.t_star()), 0.0, 1e-12);
  for (double T = 2.5; T < 500; T *= 1.7)
    EXPECT_GE(AsymptoticKernel::g(T), std::numbers::pi * std::numbers::pi / (2 * T * T));
  EXPECT_THROW(theta_asymptotic(1000, 1.0, 0, 10), std::domain_error);
  EXPECT_THROW(theta_asymptotic(1000, 1.0, 1, 1), std::domain_error);
  EXPECT_TRUE(std::isfinite(theta_asymptotic(1000, 1.0, 10, 12)));
}
