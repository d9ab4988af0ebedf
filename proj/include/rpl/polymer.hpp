#ifndef RPL_POLYMER_HPP
#define RPL_POLYMER_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <ostream>
#include <stdexcept>
#include <tuple>
#include <vector>

#include "rpl/env.hpp"
#include "rpl/rangelaw.hpp"
#include "rpl/stats.hpp"
#include "rpl/varprob.hpp"

namespace rpl {

struct PolymerParams {
  long n = 1;
  double beta = 1.0;
  double h = 1.0;

  void validate() const {
    if (n < 1) throw std::invalid_argument("PolymerParams: n >= 1 required");
    if (!(h > 0) || !std::isfinite(h)) throw std::invalid_argument("PolymerParams: h > 0 required");
    if (!(beta >= 0) || !std::isfinite(beta)) throw std::invalid_argument("PolymerParams: beta >= 0 required");
  }
};

// Relative half-width of the range window around T* used for every exact sum.
inline double eps_schedule(long n) {
  const double nd = static_cast<double>(n);
  return std::max(std::pow(nd, -1.0 / 9.0) * std::log(nd), 20.0 * std::pow(nd, -1.0 / 3.0));
}

struct PolymerWindow {
  long t_lo = 1, t_hi = 1;
  long x_cap = 0, y_cap = 0;
  double eps = 0;
};

inline PolymerWindow polymer_window(long n, double h, long x_cap, long y_cap) {
  PolymerWindow w;
  w.eps = eps_schedule(n);
  const double ts = AsymptoticKernel{h, static_cast<double>(n)}.t_star();
  w.x_cap = std::min(x_cap, n);
  w.y_cap = std::min(y_cap, n);
  w.t_lo = std::max(1L, static_cast<long>(std::floor((1 - w.eps) * ts)));
  w.t_hi = std::min({n, static_cast<long>(std::ceil((1 + w.eps) * ts)), w.x_cap + w.y_cap});
  if (w.t_hi < w.t_lo) throw std::invalid_argument("polymer_window: environment window too small for n");
  return w;
}

// The range-law table only depends on (n, window, caps, tilt), so every
// replica at the same n shares one copy.
inline std::shared_ptr<const RangeLawTable> cached_range_table(long n, const PolymerWindow& w, double h) {
  using Key = std::tuple<long, long, long, long, long, double>;
  static std::mutex mu;
  static std::map<Key, std::shared_ptr<const RangeLawTable>> cache;
  const Key key{n, w.t_lo, w.t_hi, w.x_cap, w.y_cap, h};
  {
    std::lock_guard<std::mutex> lk(mu);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
  }
  auto tab = std::make_shared<const RangeLawTable>(build_table_range(n, w.t_lo, w.t_hi, w.x_cap, w.y_cap, h));
  std::lock_guard<std::mutex> lk(mu);
  return cache.emplace(key, std::move(tab)).first->second;
}

using Restriction = std::function<bool(long x, long y)>;

struct EndpointSummary {
  long mode_x = 0, mode_y = 0;
  double mean_x = 0, mean_y = 0, mean_t = 0, mean_delta = 0;
  double sd_t = 0;
  std::vector<double> t_quantile_levels{0.05, 0.25, 0.5, 0.75, 0.95};
  std::vector<long> t_quantiles;
};

// Polymer law of (x, y) = (|M^-|, M^+) on the exact window.
struct EndpointMarginal {
  PolymerParams params;
  PolymerWindow window;
  std::shared_ptr<const RangeLawTable> table;
  std::vector<double> logw;  // parallel to table->logp
  double log_z = kNegInf;
  double truncation = 0;  // certified relative bound on the missing mass

  double prob(long x, long y) const {
    if (!table->contains(x, y)) return 0.0;
    const auto r = static_cast<std::size_t>(x + y - table->t_lo);
    return std::exp(logw[table->row_offset[r] + static_cast<std::size_t>(x - table->row_xmin[r])] - log_z);
  }
  template <class F>
  void for_each(F&& f) const {
    std::size_t i = 0;
    table->for_each([&](long x, long y, double) { f(x, y, std::exp(logw[i++] - log_z)); });
  }
  // P(x + y = T) for T in [t_lo, t_hi].
  std::vector<double> t_law() const {
    std::vector<double> out(static_cast<std::size_t>(table->t_hi - table->t_lo + 1), 0.0);
    for_each([&](long x, long y, double p) { out[static_cast<std::size_t>(x + y - table->t_lo)] += p; });
    return out;
  }
  double mass(const Restriction& keep) const {
    CompensatedSum s;
    for_each([&](long x, long y, double p) {
      if (keep(x, y)) s.add(p);
    });
    return s.value();
  }
  EndpointSummary summary() const {
    EndpointSummary s;
    double best = -1, m2 = 0;
    const double ts = AsymptoticKernel{params.h, static_cast<double>(params.n)}.t_star();
    for_each([&](long x, long y, double p) {
      if (p > best) {
        best = p;
        s.mode_x = x;
        s.mode_y = y;
      }
      s.mean_x += p * static_cast<double>(x);
      s.mean_y += p * static_cast<double>(y);
      s.mean_t += p * static_cast<double>(x + y);
      m2 += p * static_cast<double>(x + y) * static_cast<double>(x + y);
    });
    s.mean_delta = s.mean_t - ts;
    s.sd_t = std::sqrt(std::max(0.0, m2 - s.mean_t * s.mean_t));
    const auto law = t_law();
    for (double level : s.t_quantile_levels) {
      double acc = 0;
      long T = table->t_lo;
      for (std::size_t i = 0; i < law.size(); ++i) {
        acc += law[i];
        T = table->t_lo + static_cast<long>(i);
        if (acc >= level) break;
      }
      s.t_quantiles.push_back(T);
    }
    return s;
  }
};

namespace detail {

inline EndpointMarginal weigh(const PolymerParams& p, const PolymerWindow& w, const PrefixSums* ps) {
  EndpointMarginal m;
  m.params = p;
  m.window = w;
  m.table = cached_range_table(p.n, w, p.h);
  m.logw.reserve(m.table->size());
  LogSumExp z;
  const bool disorder = ps && p.beta != 0;
  m.table->for_each([&](long x, long y, double lp) {
    double v = lp - p.h * static_cast<double>(x + y + 1);
    if (disorder) v += p.beta * (ps->sigma_minus[x] + ps->sigma_plus[y]);
    m.logw.push_back(v);
    z.add(v);
  });
  m.log_z = z.value();
  if (m.log_z == kNegInf) throw std::runtime_error("endpoint_marginal: empty window");
  // Missing mass: tail bound over the ranges inside the environment window
  // with T outside [t_lo, t_hi], times the largest possible disorder factor.
  double max_disorder = 0;
  if (disorder) {
    const double mm = *std::max_element(ps->sigma_minus.begin(), ps->sigma_minus.begin() + w.x_cap + 1);
    const double mp = *std::max_element(ps->sigma_plus.begin(), ps->sigma_plus.begin() + w.y_cap + 1);
    max_disorder = p.beta * (mm + mp);
  }
  LogSumExp tail_acc;
  tail_acc.add(log_lower_tail(p.n, p.h, w.t_lo));
  if (w.t_hi < std::min(p.n, w.x_cap + w.y_cap)) tail_acc.add(-p.h * static_cast<double>(w.t_hi + 2));
  const double tail = tail_acc.value();
  m.truncation = tail == kNegInf ? 0.0 : std::exp(tail + max_disorder - m.log_z);
  return m;
}

}  // namespace detail

inline EndpointMarginal endpoint_marginal(const Environment& env, const PolymerParams& p) {
  p.validate();
  if (env.lo > 0 || env.hi < 0) throw std::invalid_argument("endpoint_marginal: window must contain 0");
  const auto w = polymer_window(p.n, p.h, env.x_max(), env.y_max());
  const auto ps = prefix_sums(env);
  return detail::weigh(p, w, &ps);
}

// Homogeneous model: no environment, every range is allowed.
inline EndpointMarginal endpoint_marginal(const PolymerParams& p) {
  p.validate();
  if (p.beta != 0) throw std::invalid_argument("endpoint_marginal: beta > 0 needs an environment");
  return detail::weigh(p, polymer_window(p.n, p.h, p.n, p.n), nullptr);
}

inline double log_partition(const EndpointMarginal& m, const Restriction& keep = {}) {
  if (!keep) return m.log_z;
  LogSumExp z;
  std::size_t i = 0;
  m.table->for_each([&](long x, long y, double) {
    const double v = m.logw[i++];
    if (keep(x, y)) z.add(v);
  });
  return z.value();
}

inline double log_partition(const Environment& env, const PolymerParams& p, const Restriction& keep = {}) {
  return log_partition(endpoint_marginal(env, p), keep);
}

// Box |x - cx| <= r, |y - cy| <= r.
inline double mass_near(const EndpointMarginal& m, double cx, double cy, double r) {
  return m.mass([&](long x, long y) {
    return std::abs(static_cast<double>(x) - cx) <= r && std::abs(static_cast<double>(y) - cy) <= r;
  });
}

struct LocalizationReport {
  double eps = 0;
  double first_order_mass = 0;
  std::vector<double> K;
  std::vector<double> second_order_mass;
  bool monotone = true;
};

// First order: |M^- + u* n^{1/3}| <= eps n^{1/3} and |T - T*| <= eps n^{1/3}.
// Second order: mass of the box of half-width K n^{2/9} around (cx, cy).
inline LocalizationReport endpoint_localization(const EndpointMarginal& m, double u_star, double eps, double cx,
                                                double cy, const std::vector<double>& Ks) {
  LocalizationReport r;
  r.eps = eps;
  const double n13 = std::cbrt(static_cast<double>(m.params.n));
  const double n29 = std::pow(static_cast<double>(m.params.n), 2.0 / 9.0);
  const double ts = AsymptoticKernel{m.params.h, static_cast<double>(m.params.n)}.t_star();
  r.first_order_mass = m.mass([&](long x, long y) {
    return std::abs(static_cast<double>(x) - u_star * n13) <= eps * n13 &&
           std::abs(static_cast<double>(x + y) - ts) <= eps * n13;
  });
  for (double K : Ks) {
    r.K.push_back(K);
    r.second_order_mass.push_back(mass_near(m, cx, cy, K * n29));
    if (r.second_order_mass.size() > 1 &&
        r.second_order_mass.back() < r.second_order_mass[r.second_order_mass.size() - 2] - 1e-12)
      r.monotone = false;
  }
  return r;
}

// ---------------------------------------------------------------------------
// Homogeneous fluctuations.

struct HomogeneousReport {
  long n = 0;
  double h = 1.0;
  double t_star = 0, a_n = 0;
  double ks_normal = 0;  // sup over atoms of |F - Phi| for (T - T*)/a_n
  double ks_recentered = 0;  // same with the exact mean and sd, diagnostic only
  double tv_sine = 0;    // left endpoint x/T* against the sine density on [0,1]
  double truncation = 0;
  double mean_delta = 0, sd_delta = 0;
};

// TV between the law of x/T* on cells [(x-1/2)/T*, (x+1/2)/T*) and the
// density (pi/2) sin(pi v) integrated over the same cells.
inline double sine_tv(const EndpointMarginal& m, double ts) {
  std::map<long, double> px;
  m.for_each([&](long x, long, double p) { px[x] += p; });
  const long xmax = std::max(px.empty() ? 0L : px.rbegin()->first, static_cast<long>(std::ceil(ts)) + 1);
  auto F = [](double v) { return 0.5 * (1 - std::cos(std::numbers::pi * std::clamp(v, 0.0, 1.0))); };
  double tv = 0;
  for (long x = 0; x <= xmax; ++x) {
    const double lo = x == 0 ? -1.0 : (static_cast<double>(x) - 0.5) / ts;
    const double q = F((static_cast<double>(x) + 0.5) / ts) - F(lo);
    const auto it = px.find(x);
    tv += std::abs((it == px.end() ? 0.0 : it->second) - q);
  }
  return 0.5 * tv;
}

inline HomogeneousReport homogeneous_fluctuations(long n, double h) {
  const auto m = endpoint_marginal(PolymerParams{n, 0.0, h});
  const AsymptoticKernel ak{h, static_cast<double>(n)};
  HomogeneousReport r;
  r.n = n;
  r.h = h;
  r.t_star = ak.t_star();
  r.a_n = ak.a_n();
  r.truncation = m.truncation;
  const auto law = m.t_law();
  double F = 0, ks = 0, m1 = 0, m2 = 0;
  for (std::size_t i = 0; i < law.size(); ++i) {
    const double d = static_cast<double>(m.table->t_lo + static_cast<long>(i)) - r.t_star;
    const double phi = normal_cdf(d / r.a_n);
    ks = std::max(ks, std::abs(F - phi));
    F += law[i];
    ks = std::max(ks, std::abs(F - phi));
    m1 += law[i] * d;
    m2 += law[i] * d * d;
  }
  r.ks_normal = ks;
  r.mean_delta = m1;
  r.sd_delta = std::sqrt(std::max(0.0, m2 - m1 * m1));
  F = 0;
  for (std::size_t i = 0; i < law.size(); ++i) {
    const double d = static_cast<double>(m.table->t_lo + static_cast<long>(i)) - r.t_star;
    const double phi = normal_cdf((d - r.mean_delta) / r.sd_delta);
    r.ks_recentered = std::max(r.ks_recentered, std::abs(F - phi));
    F += law[i];
    r.ks_recentered = std::max(r.ks_recentered, std::abs(F - phi));
  }
  r.tv_sine = sine_tv(m, r.t_star);
  return r;
}

// Ratio of the exact range law to its large-n approximation under the
// homogeneous polymer law, over the entries where the approximation is
// defined. Near x = T the approximation's bracket vanishes and the ratio
// explodes, so the weighted median and the weighted mean of the log ratio
// are reported instead of a plain weighted mean.
struct ThetaRatioReport {
  long n = 0;
  double h = 1.0;
  double median_ratio = 0;
  double mean_log_ratio = 0;
  double covered_mass = 0;
};

inline ThetaRatioReport theta_ratio(long n, double h) {
  const auto m = endpoint_marginal(PolymerParams{n, 0.0, h});
  ThetaRatioReport r;
  r.n = n;
  r.h = h;
  std::vector<std::pair<double, double>> lr;  // (log ratio, weight)
  std::size_t i = 0;
  m.table->for_each([&](long x, long y, double lp) {
    const double p = std::exp(m.logw[i++] - m.log_z);
    if (lp == kNegInf || x <= 0 || y <= 0 || x + y < 3) return;
    try {
      lr.emplace_back(lp - theta_asymptotic(n, h, x, y), p);
    } catch (const std::domain_error&) {
    }
  });
  double acc = 0;
  for (const auto& [l, p] : lr) {
    acc += p * l;
    r.covered_mass += p;
  }
  if (r.covered_mass <= 0) {
    r.median_ratio = r.mean_log_ratio = std::numeric_limits<double>::quiet_NaN();
    return r;
  }
  r.mean_log_ratio = acc / r.covered_mass;
  std::sort(lr.begin(), lr.end());
  double cum = 0;
  for (const auto& [l, p] : lr) {
    cum += p;
    if (cum >= 0.5 * r.covered_mass) {
      r.median_ratio = std::exp(l);
      break;
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// Expansion of log Z.

inline double first_order_constant(double h) { return -1.5 * h * c_h(h); }

struct ExpansionRow {
  long n = 0;
  long replica = 0;
  double beta = 1.0, h = 1.0;
  double log_z = 0;
  double first_order = 0;  // n^{-1/3} log Z
  double residual2 = 0;    // (log Z - f1 n^{1/3}) / (beta n^{1/6})
  double residual3 = std::numeric_limits<double>::quiet_NaN();
  double ref_sup = std::numeric_limits<double>::quiet_NaN();  // X at u*
  double ref_w2 = std::numeric_limits<double>::quiet_NaN();
};

// residual3 needs the coupled reference X_{u*}; pass NaN to skip it.
inline ExpansionRow expansion_row(long n, long replica, double log_z, double beta, double h, double ref_sup,
                                  double ref_w2) {
  ExpansionRow r;
  r.n = n;
  r.replica = replica;
  r.beta = beta;
  r.h = h;
  r.log_z = log_z;
  r.ref_sup = ref_sup;
  r.ref_w2 = ref_w2;
  const double nd = static_cast<double>(n);
  const double centred = log_z - first_order_constant(h) * std::cbrt(nd);
  r.first_order = log_z / std::cbrt(nd);
  r.residual2 = centred / ((beta > 0 ? beta : 1.0) * std::pow(nd, 1.0 / 6.0));
  if (beta > 0 && std::isfinite(ref_sup))
    r.residual3 = std::numbers::sqrt2 * (centred - beta * std::pow(nd, 1.0 / 6.0) * ref_sup) /
                  (beta * std::pow(nd, 1.0 / 9.0));
  return r;
}

struct ExpansionInput {
  long n = 0;
  long replica = 0;
  double log_z = 0;
  double ref_sup = std::numeric_limits<double>::quiet_NaN();
  double ref_w2 = std::numeric_limits<double>::quiet_NaN();
};

struct ExpansionReport {
  double beta = 1.0, h = 1.0;
  int order = 1;
  std::vector<ExpansionRow> rows;
  std::map<long, double> eps;  // window schedule per n
  long f1_n = 0;
  double f1_estimate = std::numeric_limits<double>::quiet_NaN();  // mean n^{-1/3} log Z at the largest n
};

// order 2 needs X_{u*} and order 3 also needs W2 whenever beta > 0.
inline ExpansionReport expansion_report(const std::vector<ExpansionInput>& in, double beta, double h, int order) {
  if (order < 1 || order > 3) throw std::invalid_argument("expansion_report: order must be 1, 2 or 3");
  ExpansionReport rep;
  rep.beta = beta;
  rep.h = h;
  rep.order = order;
  for (const auto& e : in) {
    if (beta > 0 && order >= 2 && !std::isfinite(e.ref_sup))
      throw std::invalid_argument("expansion_report: missing sup reference");
    if (beta > 0 && order >= 3 && !std::isfinite(e.ref_w2))
      throw std::invalid_argument("expansion_report: missing W2 reference");
    rep.rows.push_back(expansion_row(e.n, e.replica, e.log_z, beta, h, e.ref_sup, e.ref_w2));
    rep.eps[e.n] = eps_schedule(e.n);
    rep.f1_n = std::max(rep.f1_n, e.n);
  }
  double acc = 0;
  int cnt = 0;
  for (const auto& r : rep.rows)
    if (r.n == rep.f1_n) {
      acc += r.first_order;
      ++cnt;
    }
  if (cnt) rep.f1_estimate = acc / cnt;
  return rep;
}

inline void write_expansion_csv(std::ostream& os, const std::vector<ExpansionRow>& rows) {
  os << "n,replica,logZ,residual2,residual3,ref_sup,ref_w2\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%ld,%ld,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.n, r.replica, r.log_z, r.residual2,
                  r.residual3, r.ref_sup, r.ref_w2);
    os << buf;
  }
}

inline void write_marginal_csv(std::ostream& os, const EndpointMarginal& m) {
  os << "x,y,prob\n";
  char buf[96];
  m.for_each([&](long x, long y, double p) {
    std::snprintf(buf, sizeof buf, "%ld,%ld,%.17g\n", x, y, p);
    os << buf;
  });
}

// ---------------------------------------------------------------------------
// Half-line model: walks kept on [0, inf), weight exp(-h M^+ + beta Sigma+_{M^+}).

struct HalflineMarginal {
  PolymerParams params;
  HalflineTable table;
  std::vector<double> logw;
  double log_z = kNegInf;
  double truncation = 0;

  double prob(long T) const {
    if (T < table.t_lo || T > table.t_hi) return 0.0;
    return std::exp(logw[static_cast<std::size_t>(T - table.t_lo)] - log_z);
  }
};

inline HalflineMarginal halfline_marginal(const Environment& env, const PolymerParams& p) {
  p.validate();
  if (env.lo > 0 || env.hi < 1) throw std::invalid_argument("halfline_marginal: window must contain [0,1]");
  const auto w = polymer_window(p.n, p.h, 0, env.y_max());
  HalflineMarginal m;
  m.params = p;
  m.table = build_halfline_table(p.n, w.t_lo, std::min(w.t_hi, env.y_max()), p.h);
  const auto ps = prefix_sums(env);
  LogSumExp z;
  for (long T = m.table.t_lo; T <= m.table.t_hi; ++T) {
    double v = m.table.at(T) - p.h * static_cast<double>(T);
    if (p.beta != 0) v += p.beta * ps.sigma_plus[static_cast<std::size_t>(T)];
    m.logw.push_back(v);
    z.add(v);
  }
  m.log_z = z.value();
  if (m.log_z == kNegInf) throw std::runtime_error("halfline_marginal: empty window");
  const double mx = p.beta != 0 ? p.beta * *std::max_element(ps.sigma_plus.begin(), ps.sigma_plus.end()) : 0.0;
  // Same certificate as the free model: T beyond the environment window is
  // outside the model.
  LogSumExp tail;
  for (long T = 1; T < m.table.t_lo; ++T)
    tail.add(-p.h * static_cast<double>(T) + detail::log_stay_bound(p.n, T + 1));
  if (m.table.t_hi < std::min(p.n, env.y_max()))
    tail.add(-p.h * static_cast<double>(m.table.t_hi + 1) - std::log(-std::expm1(-p.h)));
  m.truncation = tail.value() == kNegInf ? 0.0 : std::exp(tail.value() + mx - m.log_z);
  return m;
}

inline double halfline_partition(const Environment& env, const PolymerParams& p) {
  return halfline_marginal(env, p).log_z;
}

// Environment whose Sigma+ follows the lattice path of a half-line system.
inline Environment halfline_environment(const HalflineSystem& sys) {
  return env_from_brownian(sys.n, {0.0}, {0.0}, sys.x.times, sys.x.values, sys.seed);
}

inline double halfline_third_order(const HalflineSystem& sys, double beta, double log_z) {
  const double nd = static_cast<double>(sys.n);
  return (log_z - first_order_constant(sys.h) * std::cbrt(nd) - beta * std::pow(nd, 1.0 / 6.0) * sys.x_ch) /
         (beta * std::pow(nd, 1.0 / 9.0));
}

struct LocalLimitRow {
  long k = 0, T = 0;
  double s = 0;
  double log_pmf = kNegInf;
  double predicted = 0;  // beta n^{1/9} (Y_s - Y_{s*}), before normalization
};

struct LocalLimitProbe {
  double s_star = 0;
  double chernoff_value = 0;
  double theta = 0;  // sum of exp(predicted) over the rows
  double correlation = std::numeric_limits<double>::quiet_NaN();
  double window_mass = 0;
  double truncation = 0;
  std::vector<LocalLimitRow> rows;
};

// Compares the half-line polymer pmf near its predicted location with the
// weights implied by the drifted Brownian functional. Reported only.
inline LocalLimitProbe local_limit_probe(const HalflineSystem& sys, double beta, long k_window) {
  const PolymerParams p{sys.n, beta, sys.h};
  const auto env = halfline_environment(sys);
  const auto m = halfline_marginal(env, p);
  const double c = chernoff_drift(beta > 0 ? beta : 1.0, sys.h);
  const auto sol = solve_chernoff(sys.w, c);
  LocalLimitProbe pr;
  pr.s_star = sol.argmax;
  pr.chernoff_value = sol.value;
  pr.truncation = m.truncation;
  const double nd = static_cast<double>(sys.n);
  const double n13 = std::cbrt(nd), n29 = std::pow(nd, 2.0 / 9.0), n19 = std::pow(nd, 1.0 / 9.0);
  const long t0 = std::lround(sys.ch * n13) + static_cast<long>(std::floor(sol.argmax * n29));
  auto y_at = [&](double s) { return sys.w.value_at(s) - c * s * s; };
  const double y_star = y_at(sol.argmax);
  std::vector<double> a, b;
  for (long k = -k_window; k <= k_window; ++k) {
    LocalLimitRow r;
    r.k = k;
    r.T = t0 + k;
    if (r.T < 1) continue;
    r.s = (static_cast<double>(r.T) - sys.ch * n13) / n29;
    const double pv = m.prob(r.T);
    r.log_pmf = pv > 0 ? std::log(pv) : kNegInf;
    pr.window_mass += pv;
    double yv;
    try {
      yv = y_at(r.s);
    } catch (const std::exception&) {
      continue;
    }
    r.predicted = (beta > 0 ? beta : 1.0) * n19 * (yv - y_star);
    pr.theta += std::exp(r.predicted);
    if (r.log_pmf > kNegInf) {
      a.push_back(r.log_pmf);
      b.push_back(r.predicted);
    }
    pr.rows.push_back(r);
  }
  if (a.size() >= 3) pr.correlation = pearson(a, b);
  return pr;
}

}  // namespace rpl

#endif  // RPL_POLYMER_HPP
