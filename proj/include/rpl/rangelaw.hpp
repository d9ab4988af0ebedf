#ifndef RPL_RANGELAW_HPP
#define RPL_RANGELAW_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <istream>
#include <fstream>
#include <numbers>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "rpl/stats.hpp"

namespace rpl {

inline double c_h(double h) { return std::cbrt(std::numbers::pi * std::numbers::pi / h); }

// Deterministic ingredients of the large-n range asymptotics.
struct AsymptoticKernel {
  double h = 1.0;
  double n = 1.0;

  double ch() const { return c_h(h); }
  double t_star() const { return ch() * std::cbrt(n); }
  static double g(double T) { return -std::log(std::cos(std::numbers::pi / T)); }
  double phi(double T) const { return h * T + n * std::numbers::pi * std::numbers::pi / (2.0 * T * T); }
  double dphi(double T) const { return h - n * std::numbers::pi * std::numbers::pi / (T * T * T); }
  double psi() const {
    const double em1 = std::expm1(h);
    return std::exp(-h) * (4.0 / std::numbers::pi) * em1 * em1;
  }
  // Standard deviation scale of T_n around T_n* in the homogeneous model.
  double a_n() const {
    return std::pow(n * std::numbers::pi * std::numbers::pi / (h * h * h * h), 1.0 / 6.0) / std::sqrt(3.0);
  }
};

// Fewest steps needed to visit exactly the interval [-x, y]: sweep the
// shorter side first, then cross to the far end.
inline long min_cover_steps(long x, long y) { return x + y + std::min(x, y); }

// A range [-x,y] with x+y >= 1 is realized by some n-step path iff n
// reaches the cover time; extra steps are absorbed by bouncing inside.
inline bool range_feasible(long n, long x, long y) {
  if (x < 0 || y < 0) return false;
  if (n == 0) return x == 0 && y == 0;
  return x + y >= 1 && n >= min_cover_steps(x, y);
}

namespace detail {

struct Mode {
  double log_mag;  // n log|lambda_j| + log|c_j|
  double sign;     // sign of lambda_j^n * c_j
  double theta;    // j*pi/(K+1)
};

// Odd modes of the Dirichlet walk on K sites, sorted by weight and
// truncated once their combined contribution drops below 1e-18 of the
// leading one.
inline std::vector<Mode> stay_modes(long n, long K) {
  std::vector<Mode> modes;
  const double kp1 = static_cast<double>(K + 1);
  for (long j = 1; j <= K; j += 2) {
    const long jr = std::min(j, K + 1 - j);
    if (2 * jr == K + 1) continue;  // zero eigenvalue
    const double a = static_cast<double>(jr) * std::numbers::pi / kp1;
    const double s = std::sin(0.5 * a);
    const double log_lam = std::log1p(-2.0 * s * s);
    const double theta = static_cast<double>(j) * std::numbers::pi / kp1;
    const double c = 2.0 / kp1 / std::tan(0.5 * theta);
    const bool negative = (j != jr) && (n % 2 == 1);
    modes.push_back({static_cast<double>(n) * log_lam + std::log(c), negative ? -1.0 : 1.0, theta});
  }
  std::sort(modes.begin(), modes.end(), [](const Mode& a, const Mode& b) { return a.log_mag > b.log_mag; });
  if (!modes.empty()) {
    const double cut = modes.front().log_mag + std::log(1e-18) - std::log(static_cast<double>(K));
    auto it = std::find_if(modes.begin(), modes.end(), [cut](const Mode& m) { return m.log_mag < cut; });
    modes.erase(it, modes.end());
  }
  return modes;
}

inline double stay_from_modes(const std::vector<Mode>& modes, long origin) {
  if (modes.empty()) return kNegInf;
  const double L = modes.front().log_mag;
  CompensatedSum s;
  for (const Mode& m : modes)
    s.add(m.sign * std::exp(m.log_mag - L) * std::sin(m.theta * static_cast<double>(origin + 1)));
  const double v = s.value();
  return v > 0 ? L + std::log(v) : kNegInf;
}

struct Combined {
  double logp;
  double kappa;  // sum of |terms| / |result|: the cancellation factor
};

// Signed combination of log-magnitude terms.
inline Combined combine_signed(const double* logs, const double* signs, int count) {
  double L = kNegInf;
  for (int i = 0; i < count; ++i) L = std::max(L, logs[i]);
  if (L == kNegInf) return {kNegInf, 1.0};
  CompensatedSum s;
  double abs_sum = 0;
  for (int i = 0; i < count; ++i) {
    if (logs[i] == kNegInf) continue;
    const double e = std::exp(logs[i] - L);
    s.add(signs[i] * e);
    abs_sum += e;
  }
  const double v = s.value();
  if (!(v > 0)) return {kNegInf, std::numeric_limits<double>::infinity()};
  return {L + std::log(v), abs_sum / v};
}

// Rescale a probability vector in place, moving the scale into log_scale.
inline void renormalize(std::vector<double>& v, double& log_scale) {
  double m = 0;
  for (double x : v) m = std::max(m, x);
  if (m > 0 && m < 1e-200) {
    for (double& x : v) x /= m;
    log_scale += std::log(m);
  }
}

}  // namespace detail

// log P(-x <= min S_k, max S_k <= y, k <= n) for the simple random walk.
inline double stay_probability(long n, long x, long y) {
  if (x < 0 || y < 0) return kNegInf;
  if (n == 0) return 0.0;
  const long K = x + y + 1;
  const long origin = std::min(x, y);  // sine overlaps are symmetric for odd modes
  return detail::stay_from_modes(detail::stay_modes(n, K), origin);
}

// All origins at once for K sites.
inline std::vector<double> stay_probability_all(long n, long K) {
  std::vector<double> out(static_cast<std::size_t>(K), 0.0);
  if (n == 0) return out;
  const auto modes = detail::stay_modes(n, K);
  for (long o = 0; o < K; ++o) {
    const long m = std::min(o, K - 1 - o);
    out[static_cast<std::size_t>(o)] = o <= K - 1 - o ? detail::stay_from_modes(modes, m)
                                                      : out[static_cast<std::size_t>(m)];
  }
  return out;
}

// Vector-iteration oracle for the stay probabilities of all origins.
inline std::vector<double> dp_stay_probability_all(long n, long K) {
  std::vector<double> u(static_cast<std::size_t>(K), 1.0), w(u.size());
  double log_scale = 0;
  for (long k = 0; k < n; ++k) {
    for (long i = 0; i < K; ++i) {
      const double l = i > 0 ? u[i - 1] : 0.0;
      const double r = i + 1 < K ? u[i + 1] : 0.0;
      w[i] = 0.5 * (l + r);
    }
    u.swap(w);
    detail::renormalize(u, log_scale);
  }
  std::vector<double> out(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) out[i] = u[i] > 0 ? log_scale + std::log(u[i]) : kNegInf;
  return out;
}

// Backward DP over (site, visited-left, visited-right): out[o] is
// log P(R_n = [-o, K-1-o]). Only non-negative terms are ever added, so
// deep-tail entries keep full relative precision.
inline std::vector<double> dp_range_law_all(long n, long K) {
  const auto sz = static_cast<std::size_t>(K);
  // f[flags][i], flags = 2*left + right
  std::vector<std::vector<double>> f(4, std::vector<double>(sz, 0.0)), g = f;
  for (auto& v : f[3]) v = 1.0;
  double log_scale = 0;
  for (long k = 0; k < n; ++k) {
    for (int fl = 0; fl < 4; ++fl) {
      const int a = fl >> 1, b = fl & 1;
      for (long i = 0; i < K; ++i) {
        double s = 0;
        if (i > 0) {
          const long t = i - 1;
          s += f[(a | (t == 0)) * 2 + (b | (t == K - 1))][t];
        }
        if (i + 1 < K) {
          const long t = i + 1;
          s += f[(a | (t == 0)) * 2 + (b | (t == K - 1))][t];
        }
        g[fl][i] = 0.5 * s;
      }
    }
    f.swap(g);
    double m = 0;
    for (const auto& v : f)
      for (double x : v) m = std::max(m, x);
    if (m > 0 && m < 1e-200) {
      for (auto& v : f)
        for (double& x : v) x /= m;
      log_scale += std::log(m);
    }
  }
  std::vector<double> out(sz);
  for (long o = 0; o < K; ++o) {
    const int fl = (o == 0) * 2 + (o == K - 1);
    const double v = f[fl][o];
    out[o] = v > 0 ? log_scale + std::log(v) : kNegInf;
  }
  return out;
}

// Exhaustive 2^n enumeration; counts[x][y] = #paths with range [-x,y].
inline std::vector<std::vector<std::uint64_t>> enumerate_range_counts(int n) {
  if (n < 0 || n > 30) throw std::invalid_argument("enumeration limited to n <= 30");
  std::vector<std::vector<std::uint64_t>> c(n + 1, std::vector<std::uint64_t>(n + 1, 0));
  const std::uint64_t total = 1ULL << n;
  for (std::uint64_t bits = 0; bits < total; ++bits) {
    int s = 0, lo = 0, hi = 0;
    for (int k = 0; k < n; ++k) {
      s += ((bits >> k) & 1) ? 1 : -1;
      lo = std::min(lo, s);
      hi = std::max(hi, s);
    }
    ++c[-lo][hi];
  }
  return c;
}

inline constexpr double kIllConditioned = 1e3;
inline constexpr double kDpBudget = 2e8;

// log P(R_n = [-x,y]) by inclusion-exclusion on stay probabilities, with a
// switch to the positive DP when the four terms cancel badly.
inline double exact_range_law(long n, long x, long y) {
  if (n < 1) throw std::invalid_argument("exact_range_law: n >= 1 required");
  if (x > y) std::swap(x, y);
  if (!range_feasible(n, x, y)) return kNegInf;
  const double logs[4] = {stay_probability(n, x, y), stay_probability(n, x - 1, y),
                          stay_probability(n, x, y - 1), stay_probability(n, x - 1, y - 1)};
  const double signs[4] = {1, -1, -1, 1};
  const auto r = detail::combine_signed(logs, signs, 4);
  const long K = x + y + 1;
  if (r.kappa > kIllConditioned && 4.0 * static_cast<double>(n) * static_cast<double>(K) <= kDpBudget)
    return dp_range_law_all(n, K)[static_cast<std::size_t>(x)];
  return r.logp;
}

// log P(S_k >= 0 for k <= n and max S_k = T).
inline double halfline_range_law(long n, long T) {
  if (n < 1 || T < 1) throw std::invalid_argument("halfline_range_law: n, T >= 1 required");
  if (T > n) return kNegInf;
  const double logs[2] = {stay_probability(n, 0, T), stay_probability(n, 0, T - 1)};
  const double signs[2] = {1, -1};
  const auto r = detail::combine_signed(logs, signs, 2);
  if (r.kappa > kIllConditioned && 4.0 * static_cast<double>(n) * static_cast<double>(T + 1) <= kDpBudget)
    return dp_range_law_all(n, T + 1)[0];
  return r.logp;
}

// The large-n approximation of P(R_n = [-x,y]) in its printed form,
// including the h-dependent factors.
inline double theta_asymptotic(long n, double h, long x, long y) {
  const long T = x + y;
  if (T < 3) throw std::domain_error("theta_asymptotic: T >= 3 required");
  if (x <= 0 || x >= T) throw std::domain_error("theta_asymptotic: boundary x (sine factor vanishes)");
  const double pi = std::numbers::pi;
  const double Td = static_cast<double>(T);
  const double bracket = std::exp(h) * std::sin(pi * static_cast<double>(x + 1) / Td) -
                         std::sin(pi * static_cast<double>(x) / Td);
  if (!(bracket > 0)) throw std::domain_error("theta_asymptotic: non-positive bracket");
  return std::log(4.0 / pi * std::expm1(h) * bracket) - AsymptoticKernel::g(Td) * static_cast<double>(n);
}

enum class TableMode { exact_spectral, exact_dp, enumeration };

inline const char* to_string(TableMode m) {
  switch (m) {
    case TableMode::exact_spectral: return "exact_spectral";
    case TableMode::exact_dp: return "exact_dp";
    case TableMode::enumeration: return "enumeration";
  }
  return "?";
}

struct WindowPolicy {
  enum class Kind { full, explicit_range, tilted };
  Kind kind = Kind::full;
  long t_min = 1, t_max = 1;  // explicit_range
  double h = 0.0;             // tilt used to certify the truncation (0: none)
  double tolerance = 1e-10;   // tilted: relative tilted mass allowed outside
  long x_cap = -1, y_cap = -1;
  TableMode mode = TableMode::exact_spectral;

  static WindowPolicy full_window() { return {}; }
  static WindowPolicy tilted(double h, double tol) {
    WindowPolicy p;
    p.kind = Kind::tilted;
    p.h = h;
    p.tolerance = tol;
    return p;
  }
  static WindowPolicy range(long lo, long hi, double h = 0.0) {
    WindowPolicy p;
    p.kind = Kind::explicit_range;
    p.t_min = lo;
    p.t_max = hi;
    p.h = h;
    return p;
  }
};

// Exact log P(R_n = [-x,y]) over all (x,y) with t_lo <= x+y <= t_hi,
// x <= x_cap, y <= y_cap.
struct RangeLawTable {
  long n = 0;
  long t_lo = 1, t_hi = 0;
  long x_cap = 0, y_cap = 0;
  TableMode mode = TableMode::exact_spectral;
  std::vector<std::size_t> row_offset;  // per T
  std::vector<long> row_xmin;
  std::vector<long> row_xmax;
  std::vector<double> logp;
  double truncation_error = 0;  // raw probability mass outside the table
  double tilt_h = 0;
  double log_tail_bound = kNegInf;  // log bound on sum_{outside} e^{-h(T+1)} P
  std::size_t dp_rows = 0;          // rows recomputed by the positive DP
  double max_rel_error = 0;         // estimated, spectral rows only

  bool contains(long x, long y) const {
    const long T = x + y;
    if (x < 0 || y < 0 || T < t_lo || T > t_hi) return false;
    const auto r = static_cast<std::size_t>(T - t_lo);
    return x >= row_xmin[r] && x <= row_xmax[r];
  }
  double at(long x, long y) const {
    if (!contains(x, y)) throw std::out_of_range("RangeLawTable: (x,y) outside window");
    const auto r = static_cast<std::size_t>(x + y - t_lo);
    return logp[row_offset[r] + static_cast<std::size_t>(x - row_xmin[r])];
  }
  template <class F>
  void for_each(F&& f) const {
    for (long T = t_lo; T <= t_hi; ++T) {
      const auto r = static_cast<std::size_t>(T - t_lo);
      for (long x = row_xmin[r]; x <= row_xmax[r]; ++x)
        f(x, T - x, logp[row_offset[r] + static_cast<std::size_t>(x - row_xmin[r])]);
    }
  }
  std::size_t size() const { return logp.size(); }
  double total_mass() const {
    CompensatedSum s;
    for (double v : logp)
      if (v > kNegInf) s.add(std::exp(v));
    return s.value();
  }
};

namespace detail {

inline double log_stay_bound(long n, long K) {
  if (K <= 0) return kNegInf;
  if (K == 1) return n == 0 ? 0.0 : kNegInf;
  const double a = std::numbers::pi / static_cast<double>(K + 1);
  const double s = std::sin(0.5 * a);
  const double b = static_cast<double>(n) * std::log1p(-2.0 * s * s) +
                   std::log(4.0 / std::numbers::pi * (1.0 + std::log(static_cast<double>(K))));
  return std::min(0.0, b);
}

inline long cap_or(long cap, long fallback) { return cap < 0 ? fallback : cap; }

inline double log_lower_tail(long n, double h, long t_lo) {
  LogSumExp acc;
  for (long T = 1; T < t_lo; ++T)
    acc.add(-h * static_cast<double>(T + 1) + std::log(static_cast<double>(T + 1)) + log_stay_bound(n, T + 1));
  return acc.value();
}

// Bound on sum over T in [1, t_lo) and T > t_hi of e^{-h(T+1)} P(T_n = T),
// plus entries inside the T-range excluded by the caps.
inline double log_tilted_tail(long n, double h, long t_lo, long t_hi, long x_cap, long y_cap) {
  LogSumExp acc;
  acc.add(log_lower_tail(n, h, t_lo));
  if (t_hi < n) acc.add(-h * static_cast<double>(t_hi + 2));
  if (x_cap < t_hi || y_cap < t_hi) {
    for (long T = t_lo; T <= t_hi; ++T) {
      const long inside = std::max(0L, std::min(T, x_cap) - std::max(0L, T - y_cap) + 1);
      const long excluded = (T + 1) - inside;
      if (excluded > 0)
        acc.add(-h * static_cast<double>(T + 1) + std::log(static_cast<double>(excluded)) +
                log_stay_bound(n, T + 1));
    }
  }
  return acc.value();
}

}  // namespace detail

inline RangeLawTable build_table_range(long n, long t_lo, long t_hi, long x_cap, long y_cap, double tilt_h) {
  RangeLawTable tab;
  tab.n = n;
  t_lo = std::max(1L, t_lo);
  t_hi = std::min(n, t_hi);
  tab.t_lo = t_lo;
  tab.t_hi = t_hi;
  tab.x_cap = x_cap;
  tab.y_cap = y_cap;
  tab.tilt_h = tilt_h;

  // Stay probabilities for K sites, all origins; K in [t_lo-1, t_hi+1].
  const long k_lo = std::max(1L, t_lo - 1), k_hi = t_hi + 1;
  std::vector<std::vector<double>> Q(static_cast<std::size_t>(k_hi - k_lo + 1));
  for (long K = k_lo; K <= k_hi; ++K) Q[static_cast<std::size_t>(K - k_lo)] = stay_probability_all(n, K);
  auto q = [&](long K, long o) -> double {
    if (K < 1 || o < 0 || o >= K) return kNegInf;
    return Q[static_cast<std::size_t>(K - k_lo)][static_cast<std::size_t>(o)];
  };

  double dp_budget = kDpBudget;
  for (long T = t_lo; T <= t_hi; ++T) {
    const long xmin = std::max(0L, T - y_cap), xmax = std::min(T, x_cap);
    tab.row_offset.push_back(tab.logp.size());
    tab.row_xmin.push_back(xmin);
    tab.row_xmax.push_back(std::max(xmin - 1, xmax));
    bool ill = false;
    double row_kappa = 1.0;
    const std::size_t start = tab.logp.size();
    for (long x = xmin; x <= xmax; ++x) {
      const long y = T - x;
      if (!range_feasible(n, x, y)) {
        tab.logp.push_back(kNegInf);
        continue;
      }
      const long a = std::min(x, y);  // canonical orientation for exact symmetry
      const double logs[4] = {q(T + 1, a), q(T, a - 1), q(T, a), q(T - 1, a - 1)};
      const double signs[4] = {1, -1, -1, 1};
      const auto r = detail::combine_signed(logs, signs, 4);
      if (r.kappa > kIllConditioned) ill = true;
      row_kappa = std::max(row_kappa, r.kappa);
      tab.logp.push_back(r.logp);
    }
    const double cost = 4.0 * static_cast<double>(n) * static_cast<double>(T + 1);
    if (ill && cost <= dp_budget) {
      dp_budget -= cost;
      const auto exact = dp_range_law_all(n, T + 1);
      for (long x = xmin; x <= xmax; ++x)
        tab.logp[start + static_cast<std::size_t>(x - xmin)] = exact[static_cast<std::size_t>(std::min(x, T - x))];
      ++tab.dp_rows;
    } else {
      tab.max_rel_error = std::max(tab.max_rel_error, 8.0 * 2.2e-16 * row_kappa);
    }
  }
  tab.truncation_error = std::max(0.0, 1.0 - tab.total_mass());
  if (tilt_h > 0) tab.log_tail_bound = detail::log_tilted_tail(n, tilt_h, t_lo, t_hi, x_cap, y_cap);
  return tab;
}

inline RangeLawTable build_table(long n, const WindowPolicy& pol) {
  if (n < 1) throw std::invalid_argument("build_table: n >= 1 required");
  const long x_cap = detail::cap_or(pol.x_cap, n), y_cap = detail::cap_or(pol.y_cap, n);
  if (pol.mode == TableMode::exact_dp || pol.mode == TableMode::enumeration) {
    if (pol.kind != WindowPolicy::Kind::full) throw std::invalid_argument("dp/enumeration tables are full-window only");
    RangeLawTable tab;
    tab.n = n;
    tab.t_lo = 1;
    tab.t_hi = n;
    tab.x_cap = x_cap;
    tab.y_cap = y_cap;
    tab.mode = pol.mode;
    std::vector<std::vector<std::uint64_t>> counts;
    if (pol.mode == TableMode::enumeration) counts = enumerate_range_counts(static_cast<int>(n));
    for (long T = 1; T <= n; ++T) {
      const long xmin = std::max(0L, T - y_cap), xmax = std::min(T, x_cap);
      tab.row_offset.push_back(tab.logp.size());
      tab.row_xmin.push_back(xmin);
      tab.row_xmax.push_back(std::max(xmin - 1, xmax));
      std::vector<double> dp;
      if (pol.mode == TableMode::exact_dp) dp = dp_range_law_all(n, T + 1);
      for (long x = xmin; x <= xmax; ++x) {
        if (pol.mode == TableMode::exact_dp) {
          tab.logp.push_back(dp[static_cast<std::size_t>(x)]);
        } else {
          const auto c = counts[static_cast<std::size_t>(x)][static_cast<std::size_t>(T - x)];
          tab.logp.push_back(c ? std::log(static_cast<double>(c)) - static_cast<double>(n) * std::numbers::ln2
                               : kNegInf);
        }
      }
    }
    tab.truncation_error = std::max(0.0, 1.0 - tab.total_mass());
    return tab;
  }

  switch (pol.kind) {
    case WindowPolicy::Kind::full: {
      if (n > 4000) throw std::invalid_argument("build_table: full window too large; use a tilted policy");
      return build_table_range(n, 1, n, x_cap, y_cap, pol.h);
    }
    case WindowPolicy::Kind::explicit_range:
      return build_table_range(n, pol.t_min, pol.t_max, x_cap, y_cap, pol.h);
    case WindowPolicy::Kind::tilted: {
      const AsymptoticKernel ak{pol.h, static_cast<double>(n)};
      const long t0 = std::clamp(std::lround(ak.t_star()), 1L, n);
      // Reference mass at T = t0 (a lower bound on the in-window tilted mass).
      LogSumExp ref;
      for (long x = std::max(0L, t0 - y_cap); x <= std::min(t0, x_cap); ++x)
        ref.add(-pol.h * static_cast<double>(t0 + 1) + exact_range_law(n, x, t0 - x));
      const double budget = ref.value() + std::log(0.5 * pol.tolerance);
      long lo = t0;
      while (lo > 1 && detail::log_lower_tail(n, pol.h, lo) > budget) --lo;
      long hi = t0;
      while (hi < n && -pol.h * static_cast<double>(hi + 2) > budget) ++hi;
      if (detail::log_tilted_tail(n, pol.h, lo, hi, n, n) > ref.value() + std::log(pol.tolerance)) {
        if (n > 4000) throw std::runtime_error("build_table: tolerance unachievable");
        return build_table_range(n, 1, n, x_cap, y_cap, pol.h);
      }
      auto tab = build_table_range(n, lo, hi, x_cap, y_cap, pol.h);
      return tab;
    }
  }
  throw std::logic_error("unreachable");
}

// Relative certified bound: tail bound divided by the tilted in-window mass.
inline double tilted_relative_truncation(const RangeLawTable& tab) {
  if (tab.tilt_h <= 0) return std::numeric_limits<double>::quiet_NaN();
  LogSumExp in;
  tab.for_each([&](long x, long y, double lp) { in.add(-tab.tilt_h * static_cast<double>(x + y + 1) + lp); });
  return std::exp(tab.log_tail_bound - in.value());
}

// Log P(max = T, S >= 0) over T in [t_lo, t_hi].
struct HalflineTable {
  long n = 0;
  long t_lo = 1, t_hi = 0;
  std::vector<double> logp;
  double tilt_h = 0;
  double log_tail_bound = kNegInf;  // bound on sum_{outside} e^{-hT} P

  double at(long T) const {
    if (T < t_lo || T > t_hi) throw std::out_of_range("HalflineTable: T outside window");
    return logp[static_cast<std::size_t>(T - t_lo)];
  }
};

inline HalflineTable build_halfline_table(long n, long t_lo, long t_hi, double tilt_h) {
  HalflineTable tab;
  tab.n = n;
  tab.t_lo = std::max(1L, t_lo);
  tab.t_hi = std::min(n, t_hi);
  tab.tilt_h = tilt_h;
  for (long T = tab.t_lo; T <= tab.t_hi; ++T) tab.logp.push_back(halfline_range_law(n, T));
  if (tilt_h > 0) {
    LogSumExp acc;
    for (long T = 1; T < tab.t_lo; ++T) acc.add(-tilt_h * static_cast<double>(T) + detail::log_stay_bound(n, T + 1));
    if (tab.t_hi < n) acc.add(-tilt_h * static_cast<double>(tab.t_hi + 1) - std::log(-std::expm1(-tilt_h)));
    tab.log_tail_bound = acc.value();
  }
  return tab;
}

inline void write_table_csv(std::ostream& os, const RangeLawTable& tab) {
  os << "x,y,logp\n";
  char buf[64];
  tab.for_each([&](long x, long y, double lp) {
    if (lp == kNegInf)
      os << x << ',' << y << ",-inf\n";
    else {
      std::snprintf(buf, sizeof buf, "%.17g", lp);
      os << x << ',' << y << ',' << buf << '\n';
    }
  });
}

// Binary cache: magic "RPLTAB1", then n, t_lo, t_hi, x_cap, y_cap, mode as
// u64, tilt_h, log_tail_bound, truncation_error as f64, then per row
// (xmin, xmax) and the row's log-probabilities. Everything little-endian.
namespace detail {
inline void tab_put(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}
inline void tab_put(std::ostream& os, double d) {
  std::uint64_t v;
  std::memcpy(&v, &d, 8);
  tab_put(os, v);
}
inline std::uint64_t tab_get(std::istream& is) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8)) throw std::runtime_error("RPLTAB1: truncated stream");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}
inline double tab_get_f(std::istream& is) {
  const std::uint64_t v = tab_get(is);
  double d;
  std::memcpy(&d, &v, 8);
  return d;
}
}  // namespace detail

inline void write_table_binary(std::ostream& os, const RangeLawTable& tab) {
  os.write("RPLTAB1", 8);
  for (long v : {tab.n, tab.t_lo, tab.t_hi, tab.x_cap, tab.y_cap, static_cast<long>(tab.mode)})
    detail::tab_put(os, static_cast<std::uint64_t>(v));
  detail::tab_put(os, tab.tilt_h);
  detail::tab_put(os, tab.log_tail_bound);
  detail::tab_put(os, tab.truncation_error);
  for (std::size_t r = 0; r < tab.row_xmin.size(); ++r) {
    detail::tab_put(os, static_cast<std::uint64_t>(tab.row_xmin[r]));
    detail::tab_put(os, static_cast<std::uint64_t>(tab.row_xmax[r]));
    for (long x = tab.row_xmin[r]; x <= tab.row_xmax[r]; ++x)
      detail::tab_put(os, tab.logp[tab.row_offset[r] + static_cast<std::size_t>(x - tab.row_xmin[r])]);
  }
}

inline RangeLawTable read_table_binary(std::istream& is) {
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, "RPLTAB1", 8) != 0) throw std::runtime_error("not an RPLTAB1 file");
  RangeLawTable tab;
  long* fields[] = {&tab.n, &tab.t_lo, &tab.t_hi, &tab.x_cap, &tab.y_cap};
  for (long* f : fields) *f = static_cast<long>(detail::tab_get(is));
  tab.mode = static_cast<TableMode>(detail::tab_get(is));
  tab.tilt_h = detail::tab_get_f(is);
  tab.log_tail_bound = detail::tab_get_f(is);
  tab.truncation_error = detail::tab_get_f(is);
  for (long T = tab.t_lo; T <= tab.t_hi; ++T) {
    const long xmin = static_cast<long>(detail::tab_get(is)), xmax = static_cast<long>(detail::tab_get(is));
    if (xmax < xmin - 1 || xmax - xmin > T) throw std::runtime_error("RPLTAB1: malformed row");
    tab.row_offset.push_back(tab.logp.size());
    tab.row_xmin.push_back(xmin);
    tab.row_xmax.push_back(xmax);
    for (long x = xmin; x <= xmax; ++x) tab.logp.push_back(detail::tab_get_f(is));
  }
  return tab;
}

}  // namespace rpl

#endif  // RPL_RANGELAW_HPP
