#ifndef RPL_ENV_HPP
#define RPL_ENV_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <istream>
#include <numbers>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/math/tools/roots.hpp>

#include "rpl/rng.hpp"
#include "rpl/stats.hpp"

namespace rpl {

enum class LawKind : std::uint32_t {
  gaussian = 0,
  coupled_gaussian = 1,
  two_point = 2,
  uniform = 3,
  stable = 4,
  degenerate = 5,
  discrete = 6,
};

inline const char* to_string(LawKind k) {
  switch (k) {
    case LawKind::gaussian: return "gaussian";
    case LawKind::coupled_gaussian: return "coupled_gaussian";
    case LawKind::two_point: return "two_point";
    case LawKind::uniform: return "uniform";
    case LawKind::stable: return "stable";
    case LawKind::degenerate: return "degenerate";
    case LawKind::discrete: return "discrete";
  }
  return "?";
}

// Law of a single site variable.
//
// The stable family has exact power tails: P(w > t) = kappa p t^-alpha and
// P(w < -t) = kappa q t^-alpha for t >= 1, with a uniform core carrying the
// remaining mass 1 - kappa and centred so the mean is zero. kappa = 1 (no
// core) whenever p = q.
struct Law {
  LawKind kind = LawKind::gaussian;
  double alpha = 1.5, p = 0.5, q = 0.5;
  double half_width = std::numbers::sqrt3;  // uniform on [-a, a]
  std::vector<double> atoms, weights;       // discrete

  static Law gaussian() { return {}; }
  static Law coupled_gaussian() {
    Law l;
    l.kind = LawKind::coupled_gaussian;
    return l;
  }
  static Law two_point() {
    Law l;
    l.kind = LawKind::two_point;
    return l;
  }
  static Law uniform(double a = std::numbers::sqrt3) {
    Law l;
    l.kind = LawKind::uniform;
    l.half_width = a;
    return l;
  }
  static Law stable(double alpha, double p, double q) {
    Law l;
    l.kind = LawKind::stable;
    l.alpha = alpha;
    l.p = p;
    l.q = q;
    l.validate();
    return l;
  }
  static Law degenerate() {
    Law l;
    l.kind = LawKind::degenerate;
    return l;
  }
  static Law discrete(std::vector<double> atoms, std::vector<double> weights) {
    Law l;
    l.kind = LawKind::discrete;
    l.atoms = std::move(atoms);
    l.weights = std::move(weights);
    l.validate();
    return l;
  }

  void validate() const {
    if (kind == LawKind::stable) {
      if (!(alpha > 1.0 && alpha < 2.0)) throw std::invalid_argument("stable law: alpha must lie in (1,2)");
      if (p < 0 || q < 0 || std::abs(p + q - 1.0) > 1e-12) throw std::invalid_argument("stable law: p+q must be 1");
    }
    if (kind == LawKind::uniform && !(half_width > 0)) throw std::invalid_argument("uniform law: half_width > 0");
    if (kind == LawKind::discrete) {
      if (atoms.empty() || atoms.size() != weights.size()) throw std::invalid_argument("discrete law: bad atoms");
      double s = 0;
      for (double w : weights) {
        if (w < 0) throw std::invalid_argument("discrete law: negative weight");
        s += w;
      }
      if (std::abs(s - 1.0) > 1e-12) throw std::invalid_argument("discrete law: weights must sum to 1");
    }
  }

  // Stable-law core parameters.
  double stable_kappa() const {
    return 1.0 / (1.0 + 2.0 * std::abs(p - q) * alpha / (alpha - 1.0));
  }
  double stable_core_center() const {
    const double k = stable_kappa();
    if (k >= 1.0) return 0.0;
    return -k * (p - q) * alpha / ((alpha - 1.0) * (1.0 - k));
  }

  double mean() const {
    if (kind == LawKind::discrete) {
      double m = 0;
      for (std::size_t i = 0; i < atoms.size(); ++i) m += atoms[i] * weights[i];
      return m;
    }
    return 0.0;
  }

  double second_moment() const {
    switch (kind) {
      case LawKind::gaussian:
      case LawKind::coupled_gaussian:
      case LawKind::two_point: return 1.0;
      case LawKind::uniform: return half_width * half_width / 3.0;
      case LawKind::stable: return std::numeric_limits<double>::infinity();
      case LawKind::degenerate: return 0.0;
      case LawKind::discrete: {
        double m = 0;
        for (std::size_t i = 0; i < atoms.size(); ++i) m += atoms[i] * atoms[i] * weights[i];
        return m;
      }
    }
    return 0.0;
  }

  double cdf(double t) const {
    switch (kind) {
      case LawKind::gaussian:
      case LawKind::coupled_gaussian: return normal_cdf(t);
      case LawKind::two_point: return t < -1 ? 0.0 : (t < 1 ? 0.5 : 1.0);
      case LawKind::uniform: return std::clamp((t + half_width) / (2 * half_width), 0.0, 1.0);
      case LawKind::degenerate: return t < 0 ? 0.0 : 1.0;
      case LawKind::discrete: {
        double s = 0;
        for (std::size_t i = 0; i < atoms.size(); ++i)
          if (atoms[i] <= t) s += weights[i];
        return s;
      }
      case LawKind::stable: {
        const double k = stable_kappa();
        if (t <= -1) return k * q * std::pow(-t, -alpha);
        if (t >= 1) return 1.0 - k * p * std::pow(t, -alpha);
        const double c = stable_core_center(), r = 1.0 - std::abs(c);
        const double core = k < 1.0 ? std::clamp((t - (c - r)) / (2 * r), 0.0, 1.0) : 0.0;
        // Mass between the tails is all core mass.
        return k * q + (1.0 - k) * core;
      }
    }
    return 0.0;
  }

  double sample(Stream& s) const {
    switch (kind) {
      case LawKind::gaussian:
      case LawKind::coupled_gaussian: return s.normal();
      case LawKind::two_point: return s.uniform() < 0.5 ? -1.0 : 1.0;
      case LawKind::uniform: return s.uniform(-half_width, half_width);
      case LawKind::degenerate: return 0.0;
      case LawKind::discrete: {
        const double u = s.uniform();
        double c = 0;
        for (std::size_t i = 0; i < atoms.size(); ++i) {
          c += weights[i];
          if (u < c) return atoms[i];
        }
        return atoms.back();
      }
      case LawKind::stable: {
        const double k = stable_kappa();
        const double u = s.uniform();
        const double v = s.uniform();
        if (u < k * p) return std::pow(v, -1.0 / alpha);
        if (u < k) return -std::pow(v, -1.0 / alpha);
        const double c = stable_core_center(), r = 1.0 - std::abs(c);
        return c - r + 2 * r * v;
      }
    }
    return 0.0;
  }
};

// Disorder field on the integer window [lo, hi] (both inclusive).
struct Environment {
  long lo = 0, hi = -1;
  std::vector<double> values;
  Law law;
  std::uint64_t seed = 0;

  long size() const { return hi - lo + 1; }
  bool empty() const { return values.empty(); }
  bool covers(long a, long b) const { return a >= lo && b <= hi; }
  double at(long z) const {
    if (z < lo || z > hi) throw std::out_of_range("Environment: site outside window");
    return values[static_cast<std::size_t>(z - lo)];
  }
  // Largest x with -x inside the window; largest y inside the window.
  long x_max() const { return -lo; }
  long y_max() const { return hi; }
};

struct PrefixSums {
  std::vector<double> sigma_minus;  // sigma_minus[j] = sum_{z=1}^{j} w_{-z}
  std::vector<double> sigma_plus;   // sigma_plus[j] = sum_{z=0}^{j} w_z
};

inline PrefixSums prefix_sums(const Environment& env) {
  if (env.lo > 0 || env.hi < 0) throw std::out_of_range("prefix_sums: window must contain 0");
  PrefixSums ps;
  ps.sigma_minus.assign(static_cast<std::size_t>(-env.lo + 1), 0.0);
  for (long j = 1; j <= -env.lo; ++j) ps.sigma_minus[j] = ps.sigma_minus[j - 1] + env.at(-j);
  ps.sigma_plus.assign(static_cast<std::size_t>(env.hi + 1), 0.0);
  ps.sigma_plus[0] = env.at(0);
  for (long j = 1; j <= env.hi; ++j) ps.sigma_plus[j] = ps.sigma_plus[j - 1] + env.at(j);
  return ps;
}

// Each site draws from its own counter stream, so nested windows with the
// same seed agree on their overlap.
inline Environment generate_environment(const Law& law, long lo, long hi, std::uint64_t seed) {
  if (hi < lo) throw std::invalid_argument("generate_environment: empty window");
  law.validate();
  if (law.kind == LawKind::coupled_gaussian)
    throw std::invalid_argument("generate_environment: coupled_gaussian comes from env_from_brownian");
  Environment env;
  env.lo = lo;
  env.hi = hi;
  env.law = law;
  env.seed = seed;
  env.values.resize(static_cast<std::size_t>(hi - lo + 1));
  const Stream base(seed, ModuleId::env, 0);
  for (long z = lo; z <= hi; ++z) {
    Stream s = base.split(static_cast<std::uint64_t>(z));
    env.values[static_cast<std::size_t>(z - lo)] = law.sample(s);
  }
  return env;
}

// Builds w from two grid Brownian paths sampled at k n^{-1/3}: the
// negative side from x1, the non-negative side from x2, so that
// sigma_plus[y] = n^{1/6} x2(y n^{-1/3}) and sigma_minus[x] = n^{1/6} x1(x n^{-1/3}).
// Since x2(0) = 0 the site w_0 is identically zero.
inline Environment env_from_brownian(long n, const std::vector<double>& x1_times, const std::vector<double>& x1,
                                     const std::vector<double>& x2_times, const std::vector<double>& x2,
                                     std::uint64_t seed = 0) {
  const double step = std::pow(static_cast<double>(n), -1.0 / 3.0);
  auto check = [step](const std::vector<double>& t, const std::vector<double>& v) {
    if (t.size() != v.size() || t.empty()) throw std::invalid_argument("env_from_brownian: malformed path");
    for (std::size_t k = 0; k < t.size(); ++k)
      if (std::abs(t[k] - static_cast<double>(k) * step) > 1e-9 * std::max(1.0, t[k]))
        throw std::invalid_argument("env_from_brownian: grid step mismatch");
    if (v[0] != 0.0) throw std::invalid_argument("env_from_brownian: path must start at 0");
  };
  check(x1_times, x1);
  check(x2_times, x2);
  const double s = std::pow(static_cast<double>(n), 1.0 / 6.0);
  Environment env;
  env.lo = -static_cast<long>(x1.size() - 1);
  env.hi = static_cast<long>(x2.size() - 1);
  env.law = Law::coupled_gaussian();
  env.seed = seed;
  env.values.resize(static_cast<std::size_t>(env.hi - env.lo + 1));
  for (long z = 1; z <= -env.lo; ++z) env.values[static_cast<std::size_t>(-z - env.lo)] = s * (x1[z] - x1[z - 1]);
  env.values[static_cast<std::size_t>(-env.lo)] = s * x2[0];
  for (long y = 1; y <= env.hi; ++y) env.values[static_cast<std::size_t>(y - env.lo)] = s * (x2[y] - x2[y - 1]);
  return env;
}

// ---------------------------------------------------------------------------
// Skorokhod embedding by randomized interval exit.

namespace detail {

// Exit time of standard Brownian motion from (-1,1) started at 0.
class UnitExitTime {
 public:
  UnitExitTime() {
    grid_.resize(kN + 1);
    grid_[0] = 0.0;
    grid_[kN] = std::numeric_limits<double>::infinity();
    double lo = 1e-3;
    for (int i = 1; i < kN; ++i) {
      grid_[i] = invert(static_cast<double>(i) / kN, lo, 60.0);
      lo = grid_[i];
    }
  }

  static double cdf(double t) {
    if (t <= 0) return 0.0;
    if (t < 0.4) {
      double s = 0;
      for (int k = 0; k < 6; ++k) s += (k % 2 ? -1.0 : 1.0) * std::erfc((2 * k + 1) / std::sqrt(2 * t));
      return 2 * s;
    }
    return 1.0 - sf_spectral(t);
  }
  static double sf(double t) { return t < 0.4 ? 1.0 - cdf(t) : sf_spectral(t); }

  double sample(Stream& s) const {
    const double u = s.uniform();
    const int i = std::min(kN - 1, static_cast<int>(u * kN));
    double lo = grid_[i], hi = grid_[i + 1];
    if (i == 0) lo = 1e-4;
    if (i == kN - 1) hi = 8.0 / (std::numbers::pi * std::numbers::pi) * std::log(4.0 / (std::numbers::pi * (1 - u))) + 1.0;
    return invert(u, lo, hi);
  }

 private:
  static constexpr int kN = 512;
  std::vector<double> grid_;

  static double sf_spectral(double t) {
    double s = 0;
    const double c = std::numbers::pi * std::numbers::pi / 8.0;
    for (int k = 0; k < 40; ++k) {
      const double m = 2 * k + 1;
      const double term = std::exp(-m * m * c * t) / m;
      s += (k % 2 ? -1.0 : 1.0) * term;
      if (term < 1e-18) break;
    }
    return 4.0 / std::numbers::pi * s;
  }

  static double invert(double u, double lo, double hi) {
    // Work with the survival function in the upper tail to keep precision.
    auto f = [u](double t) { return u < 0.5 ? cdf(t) - u : (1.0 - u) - sf(t); };
    while (f(lo) > 0 && lo > 1e-12) lo *= 0.5;
    while (f(hi) < 0) hi *= 2.0;
    std::uintmax_t it = 100;
    auto r = boost::math::tools::toms748_solve(f, lo, hi, boost::math::tools::eps_tolerance<double>(50), it);
    return 0.5 * (r.first + r.second);
  }
};

inline const UnitExitTime& unit_exit_time() {
  static const UnitExitTime s;
  return s;
}

struct SignedParts {
  double mass_neg = 0, mass_pos = 0, mass_zero = 0;
};

inline SignedParts signed_parts(const Law& law) {
  switch (law.kind) {
    case LawKind::gaussian:
    case LawKind::coupled_gaussian:
    case LawKind::two_point:
    case LawKind::uniform: return {0.5, 0.5, 0.0};
    case LawKind::degenerate: return {0.0, 0.0, 1.0};
    case LawKind::discrete: {
      SignedParts p;
      for (std::size_t i = 0; i < law.atoms.size(); ++i) {
        if (law.atoms[i] < 0) p.mass_neg += law.weights[i];
        else if (law.atoms[i] > 0) p.mass_pos += law.weights[i];
        else p.mass_zero += law.weights[i];
      }
      return p;
    }
    case LawKind::stable: break;
  }
  throw std::invalid_argument("skorokhod_embed: target law needs a finite second moment");
}

// |xi| given xi > 0 (or < 0 when negative=true), optionally size-biased by |xi|.
inline double sample_half(const Law& law, bool negative, bool size_biased, Stream& s) {
  switch (law.kind) {
    case LawKind::gaussian:
    case LawKind::coupled_gaussian:
      return size_biased ? std::sqrt(-2.0 * std::log(s.uniform())) : std::abs(s.normal());
    case LawKind::two_point: return 1.0;
    case LawKind::uniform: return law.half_width * (size_biased ? std::sqrt(s.uniform()) : s.uniform());
    case LawKind::discrete: {
      double tot = 0;
      for (std::size_t i = 0; i < law.atoms.size(); ++i)
        if (negative ? law.atoms[i] < 0 : law.atoms[i] > 0)
          tot += law.weights[i] * (size_biased ? std::abs(law.atoms[i]) : 1.0);
      const double u = s.uniform() * tot;
      double c = 0;
      double last = 0;
      for (std::size_t i = 0; i < law.atoms.size(); ++i)
        if (negative ? law.atoms[i] < 0 : law.atoms[i] > 0) {
          c += law.weights[i] * (size_biased ? std::abs(law.atoms[i]) : 1.0);
          last = std::abs(law.atoms[i]);
          if (u < c) return last;
        }
      return last;
    }
    default: break;
  }
  throw std::invalid_argument("skorokhod_embed: unsupported law");
}

}  // namespace detail

struct EmbeddingRecord {
  std::vector<double> stop_times;
  std::vector<double> embedded_values;
  Law target_law;
  std::size_t max_moves = 0;  // longest walk-on-intervals chain observed
};

struct ExitResult {
  double value;
  double time;
  std::size_t moves;
};

// Brownian motion from 0 until it leaves (a,b), a < 0 < b. Each move runs
// until exit of the largest symmetric interval around the current point,
// which is exact in both exit place and exit time; one of the two
// endpoints is always a or b, so the chain ends after a geometric number
// of moves.
inline ExitResult brownian_exit(double a, double b, Stream& s, std::size_t max_moves = 4096) {
  const auto& tau = detail::unit_exit_time();
  double x = 0, t = 0;
  for (std::size_t m = 1; m <= max_moves; ++m) {
    const double dl = x - a, dr = b - x;
    const double r = std::min(dl, dr);
    t += r * r * tau.sample(s);
    const bool up = s.uniform() < 0.5;
    if (up && dr <= dl) return {b, t, m};
    if (!up && dl <= dr) return {a, t, m};
    x = up ? x + r : x - r;
  }
  throw std::runtime_error("brownian_exit: move budget exceeded");
}

inline EmbeddingRecord skorokhod_embed(const Law& law, std::size_t count, std::uint64_t seed) {
  law.validate();
  if (std::abs(law.mean()) > 1e-12) throw std::invalid_argument("skorokhod_embed: target law must be centered");
  const auto parts = detail::signed_parts(law);
  EmbeddingRecord rec;
  rec.target_law = law;
  rec.stop_times.reserve(count);
  rec.embedded_values.reserve(count);
  Stream s(seed, ModuleId::env, 0x5c0c0dULL);
  const double nonzero = parts.mass_neg + parts.mass_pos;
  for (std::size_t k = 0; k < count; ++k) {
    if (s.uniform() < parts.mass_zero || nonzero == 0) {
      rec.stop_times.push_back(0.0);
      rec.embedded_values.push_back(0.0);
      continue;
    }
    // (b - a) mu(da) mu(db) splits into a size-biased b with plain a, or
    // a size-biased a with plain b, in proportion mu(-) : mu(+).
    double a, b;
    if (s.uniform() < parts.mass_neg / nonzero) {
      b = detail::sample_half(law, false, true, s);
      a = -detail::sample_half(law, true, false, s);
    } else {
      a = -detail::sample_half(law, true, true, s);
      b = detail::sample_half(law, false, false, s);
    }
    const auto r = brownian_exit(a, b, s);
    rec.stop_times.push_back(r.time);
    rec.embedded_values.push_back(r.value);
    rec.max_moves = std::max(rec.max_moves, r.moves);
  }
  return rec;
}

// ---------------------------------------------------------------------------
// Serialization.

namespace detail {

inline void put_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}
inline void put_f64(std::ostream& os, double d) {
  std::uint64_t v;
  std::memcpy(&v, &d, 8);
  put_u64(os, v);
}
inline std::uint64_t get_u64(std::istream& is) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8)) throw std::runtime_error("unexpected end of binary stream");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}
inline double get_f64(std::istream& is) {
  const std::uint64_t v = get_u64(is);
  double d;
  std::memcpy(&d, &v, 8);
  return d;
}

}  // namespace detail

inline constexpr char kEnvMagic[8] = {'R', 'P', 'L', 'E', 'N', 'V', '1', '\0'};

inline void write_env_binary(std::ostream& os, const Environment& env) {
  os.write(kEnvMagic, 8);
  detail::put_u64(os, static_cast<std::uint64_t>(env.law.kind));
  detail::put_f64(os, env.law.alpha);
  detail::put_f64(os, env.law.p);
  detail::put_f64(os, env.law.q);
  detail::put_f64(os, env.law.half_width);
  detail::put_u64(os, static_cast<std::uint64_t>(env.lo));
  detail::put_u64(os, static_cast<std::uint64_t>(env.hi));
  detail::put_u64(os, env.seed);
  for (double v : env.values) detail::put_f64(os, v);
}

inline Environment read_env_binary(std::istream& is) {
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, kEnvMagic, 8) != 0) throw std::runtime_error("not an RPLENV1 file");
  Environment env;
  env.law.kind = static_cast<LawKind>(detail::get_u64(is));
  env.law.alpha = detail::get_f64(is);
  env.law.p = detail::get_f64(is);
  env.law.q = detail::get_f64(is);
  env.law.half_width = detail::get_f64(is);
  env.lo = static_cast<long>(detail::get_u64(is));
  env.hi = static_cast<long>(detail::get_u64(is));
  env.seed = detail::get_u64(is);
  if (env.hi < env.lo) throw std::runtime_error("RPLENV1: bad window");
  env.values.resize(static_cast<std::size_t>(env.hi - env.lo + 1));
  for (double& v : env.values) v = detail::get_f64(is);
  return env;
}

inline void write_env_csv(std::ostream& os, const Environment& env) {
  os << "z,omega\n";
  char buf[64];
  for (long z = env.lo; z <= env.hi; ++z) {
    std::snprintf(buf, sizeof buf, "%.17g", env.at(z));
    os << z << ',' << buf << '\n';
  }
}

}  // namespace rpl

#endif  // RPL_ENV_HPP
