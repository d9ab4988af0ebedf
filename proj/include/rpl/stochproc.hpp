#ifndef RPL_STOCHPROC_HPP
#define RPL_STOCHPROC_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/tools/roots.hpp>

#include "rpl/rng.hpp"
#include "rpl/stats.hpp"

namespace rpl {

enum class PathKind : std::uint32_t {
  bm = 0,
  meander = 1,
  bessel3 = 2,
  two_sided_bessel = 3,
  excursion = 4,
  bm_two_sided = 5,
};

inline const char* to_string(PathKind k) {
  switch (k) {
    case PathKind::bm: return "bm";
    case PathKind::meander: return "meander";
    case PathKind::bessel3: return "bessel3";
    case PathKind::two_sided_bessel: return "two_sided_bessel";
    case PathKind::excursion: return "excursion";
    case PathKind::bm_two_sided: return "bm_two_sided";
  }
  return "?";
}

struct ProcessPath {
  std::vector<double> times;
  std::vector<double> values;
  PathKind kind = PathKind::bm;
  double duration = 0.0;

  std::size_t size() const { return times.size(); }

  // Index of the grid point equal to t (within 1e-12 relative), or npos.
  std::size_t index_of(double t) const {
    auto it = std::lower_bound(times.begin(), times.end(), t - 1e-12 * std::max(1.0, std::abs(t)));
    if (it != times.end() && std::abs(*it - t) <= 1e-12 * std::max(1.0, std::abs(t)))
      return static_cast<std::size_t>(it - times.begin());
    return static_cast<std::size_t>(-1);
  }

  // Grid value when t is a grid point, linear interpolation otherwise.
  double value_at(double t) const {
    if (times.empty()) throw std::out_of_range("ProcessPath: empty");
    if (t < times.front() || t > times.back() + 1e-12 * std::max(1.0, std::abs(t)))
      throw std::out_of_range("ProcessPath: time outside grid");
    const std::size_t i = index_of(t);
    if (i != static_cast<std::size_t>(-1)) return values[i];
    const auto hi = static_cast<std::size_t>(std::upper_bound(times.begin(), times.end(), t) - times.begin());
    const std::size_t lo = hi - 1;
    const double w = (t - times[lo]) / (times[hi] - times[lo]);
    return values[lo] + w * (values[hi] - values[lo]);
  }
};

// Path indexed by the whole line: pos on [0, L+], neg(s) = path at -s.
struct TwoSidedPath {
  ProcessPath pos, neg;
  PathKind kind = PathKind::bm_two_sided;
  double value_at(double s) const { return s >= 0 ? pos.value_at(s) : neg.value_at(-s); }
};

inline void validate_grid(const std::vector<double>& g) {
  if (g.empty() || g.front() != 0.0) throw std::invalid_argument("grid must start at 0");
  for (std::size_t i = 1; i < g.size(); ++i)
    if (!(g[i] > g[i - 1])) throw std::invalid_argument("grid must be strictly increasing");
}

inline std::vector<double> uniform_grid(double T, std::size_t steps) {
  std::vector<double> g(steps + 1);
  for (std::size_t i = 0; i <= steps; ++i) g[i] = T * static_cast<double>(i) / static_cast<double>(steps);
  g.back() = T;
  return g;
}

// Sorted union of grids; points closer than tol collapse to the first one.
inline std::vector<double> merge_grids(std::vector<double> a, const std::vector<double>& b, double tol = 1e-13) {
  a.insert(a.end(), b.begin(), b.end());
  std::sort(a.begin(), a.end());
  std::vector<double> out;
  for (double t : a)
    if (out.empty() || t - out.back() > tol * std::max(1.0, std::abs(t))) out.push_back(t);
  return out;
}

// ---------------------------------------------------------------------------
// Brownian motion.

inline ProcessPath sample_bm(const std::vector<double>& grid, Stream& s) {
  validate_grid(grid);
  ProcessPath p;
  p.kind = PathKind::bm;
  p.times = grid;
  p.duration = grid.back();
  p.values.resize(grid.size());
  p.values[0] = 0.0;
  for (std::size_t i = 1; i < grid.size(); ++i)
    p.values[i] = p.values[i - 1] + std::sqrt(grid[i] - grid[i - 1]) * s.normal();
  return p;
}

inline ProcessPath sample_bm(const std::vector<double>& grid, std::uint64_t seed) {
  Stream s(seed, ModuleId::stochproc, 0);
  return sample_bm(grid, s);
}

inline TwoSidedPath sample_two_sided_bm(const std::vector<double>& grid, Stream& s) {
  TwoSidedPath p;
  p.kind = PathKind::bm_two_sided;
  p.pos = sample_bm(grid, s);
  p.neg = sample_bm(grid, s);
  p.pos.kind = p.neg.kind = PathKind::bm_two_sided;
  return p;
}

// Inserts new_points (those not already on the grid) using the Brownian
// bridge law between neighbours, and extends freely past the last time.
// Existing values are copied, never recomputed.
inline ProcessPath refine_bridge(const ProcessPath& path, std::vector<double> new_points, Stream& s) {
  validate_grid(path.times);
  std::sort(new_points.begin(), new_points.end());
  for (double t : new_points)
    if (t < 0) throw std::invalid_argument("refine_bridge: negative time");
  ProcessPath out;
  out.kind = path.kind;
  out.times.reserve(path.size() + new_points.size());
  out.values.reserve(path.size() + new_points.size());
  std::size_t j = 0;
  for (std::size_t i = 0; i < path.size(); ++i) {
    if (i > 0) {
      // New points strictly inside (t_{i-1}, t_i): sequential bridge draws.
      const double tr = path.times[i], vr = path.values[i];
      while (j < new_points.size() && new_points[j] < tr) {
        const double t = new_points[j++];
        const double tl = out.times.back(), vl = out.values.back();
        if (t - tl <= 1e-13 * std::max(1.0, t)) continue;
        if (tr - t <= 1e-13 * std::max(1.0, t)) continue;
        const double w = (t - tl) / (tr - tl);
        const double var = (t - tl) * (tr - t) / (tr - tl);
        out.times.push_back(t);
        out.values.push_back(vl + w * (vr - vl) + std::sqrt(var) * s.normal());
      }
      while (j < new_points.size() && new_points[j] <= tr) ++j;
    } else {
      while (j < new_points.size() && new_points[j] <= path.times[0]) ++j;
    }
    out.times.push_back(path.times[i]);
    out.values.push_back(path.values[i]);
  }
  for (; j < new_points.size(); ++j) {
    const double t = new_points[j];
    if (t - out.times.back() <= 1e-13 * std::max(1.0, t)) continue;
    out.values.push_back(out.values.back() + std::sqrt(t - out.times.back()) * s.normal());
    out.times.push_back(t);
  }
  out.duration = std::max(path.duration, out.times.back());
  return out;
}

// ---------------------------------------------------------------------------
// Three-dimensional paths and their moduli.

using Vec3 = std::array<double, 3>;

inline double norm3(const Vec3& v) { return std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]); }

inline std::vector<Vec3> sample_bm3(const std::vector<double>& grid, Stream& s) {
  std::vector<Vec3> w(grid.size(), Vec3{0, 0, 0});
  for (std::size_t i = 1; i < grid.size(); ++i) {
    const double sd = std::sqrt(grid[i] - grid[i - 1]);
    for (int c = 0; c < 3; ++c) w[i][c] = w[i - 1][c] + sd * s.normal();
  }
  return w;
}

// 3D bridge from `from` at grid[0] to `to` at grid.back().
inline std::vector<Vec3> sample_bridge3(const std::vector<double>& grid, const Vec3& from, const Vec3& to, Stream& s) {
  auto w = sample_bm3(grid, s);
  const double L = grid.back() - grid.front();
  const Vec3 end = w.back();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double r = (grid[i] - grid.front()) / L;
    for (int c = 0; c < 3; ++c) w[i][c] = from[c] + (w[i][c] - r * end[c]) + r * (to[c] - from[c]);
  }
  w.front() = from;
  w.back() = to;
  return w;
}

inline Vec3 uniform_on_sphere(double radius, Stream& s) {
  Vec3 v{s.normal(), s.normal(), s.normal()};
  const double r = norm3(v);
  for (double& c : v) c *= radius / r;
  return v;
}

inline ProcessPath sample_bessel3(const std::vector<double>& grid, Stream& s) {
  validate_grid(grid);
  const auto w = sample_bm3(grid, s);
  ProcessPath p;
  p.kind = PathKind::bessel3;
  p.times = grid;
  p.duration = grid.back();
  p.values.resize(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) p.values[i] = norm3(w[i]);
  return p;
}

inline ProcessPath sample_bessel3(const std::vector<double>& grid, std::uint64_t seed) {
  Stream s(seed, ModuleId::stochproc, 1);
  return sample_bessel3(grid, s);
}

inline TwoSidedPath sample_two_sided_bessel(const std::vector<double>& grid, Stream& s) {
  TwoSidedPath p;
  p.kind = PathKind::two_sided_bessel;
  p.pos = sample_bessel3(grid, s);
  p.neg = sample_bessel3(grid, s);
  p.pos.kind = p.neg.kind = PathKind::two_sided_bessel;
  return p;
}

// ---------------------------------------------------------------------------
// Meander densities and kernel sampler.

namespace detail {

// Phi_r(y) = int_0^y phi_r, with the r -> 0 limit 1/2 for y > 0.
inline double meander_Phi(double r, double y) {
  if (y <= 0) return 0.0;
  if (r <= 0) return 0.5;
  return 0.5 * std::erf(y / std::sqrt(2.0 * r));
}

inline constexpr std::array<double, 8> kGLx = {-0.9602898564975363, -0.7966664774136267, -0.5255324099163290,
                                               -0.1834346424956498, 0.1834346424956498,  0.5255324099163290,
                                               0.7966664774136267,  0.9602898564975363};
inline constexpr std::array<double, 8> kGLw = {0.1012285362903763, 0.2223810344533745, 0.3137066458778873,
                                               0.3626837833783620, 0.3626837833783620, 0.3137066458778873,
                                               0.2223810344533745, 0.1012285362903763};

template <class F>
double gauss_legendre(F&& f, double a, double b) {
  const double m = 0.5 * (a + b), r = 0.5 * (b - a);
  double s = 0;
  for (int i = 0; i < 8; ++i) s += kGLw[i] * f(m + r * kGLx[i]);
  return s * r;
}

}  // namespace detail

// Marginal density of the duration-T meander at time t.
inline double meander_marginal_density(double t, double y, double T = 1.0) {
  if (!(t > 0 && t <= T)) throw std::domain_error("meander_marginal_density: t outside (0,T]");
  if (y <= 0) return 0.0;
  return 2.0 * std::sqrt(T) * y * std::pow(t, -1.5) * std::exp(-y * y / (2 * t)) * detail::meander_Phi(T - t, y);
}

inline std::vector<double> meander_marginal_density(double t, const std::vector<double>& ys, double T = 1.0) {
  std::vector<double> out(ys.size());
  for (std::size_t i = 0; i < ys.size(); ++i) out[i] = meander_marginal_density(t, ys[i], T);
  return out;
}

// Transition kernel of the duration-T meander.
class MeanderKernel {
 public:
  explicit MeanderKernel(double T = 1.0) : T_(T) {
    if (!(T > 0)) throw std::invalid_argument("MeanderKernel: duration must be positive");
  }
  double duration() const { return T_; }

  double transition_density(double s, double x, double t, double y) const {
    if (!(s >= 0 && t > s && t <= T_)) throw std::domain_error("MeanderKernel: need 0 <= s < t <= T");
    if (y <= 0) return 0.0;
    if (x <= 0) {
      if (s > 0) throw std::domain_error("MeanderKernel: the meander is positive after time 0");
      return meander_marginal_density(t, y, T_);
    }
    const double d = t - s;
    const double g = std::exp(-(x - y) * (x - y) / (2 * d)) * -std::expm1(-2 * x * y / d) / std::sqrt(2 * std::numbers::pi * d);
    return g * detail::meander_Phi(T_ - t, y) / detail::meander_Phi(T_ - s, x);
  }

  double marginal_density(double t, double y) const { return meander_marginal_density(t, y, T_); }

  // Draws the value at t given value x at s (x = 0 only when s = 0) by
  // inverting the numerically normalized CDF.
  double sample(double s, double x, double t, Stream& st) const {
    if (!(s >= 0 && t > s && t <= T_ * (1 + 1e-14))) throw std::domain_error("MeanderKernel::sample: need 0 <= s < t <= T");
    const double d = t - s, r = std::max(0.0, T_ - t);
    const double sd = std::sqrt(d);
    auto f = [&](double y) -> double {
      if (y <= 0) return 0.0;
      double g;
      if (x <= 0)
        g = y * std::exp(-y * y / (2 * d));
      else
        g = std::exp(-(x - y) * (x - y) / (2 * d)) * -std::expm1(-2 * x * y / d);
      return g * (r > 0 ? std::erf(y / std::sqrt(2 * r)) : 1.0);
    };
    const double lo = std::max(0.0, x - 9 * sd), hi = x + 9 * sd;
    constexpr int P = 32;
    std::array<double, P + 1> edge{}, cum{};
    for (int k = 0; k <= P; ++k) edge[k] = lo + (hi - lo) * k / P;
    cum[0] = 0;
    for (int k = 0; k < P; ++k) cum[k + 1] = cum[k] + detail::gauss_legendre(f, edge[k], edge[k + 1]);
    if (!(cum[P] > 0) || !std::isfinite(cum[P]))
      throw std::runtime_error("MeanderKernel::sample: degenerate kernel normalization");
    const double target = st.uniform() * cum[P];
    int k = static_cast<int>(std::upper_bound(cum.begin(), cum.end(), target) - cum.begin()) - 1;
    k = std::clamp(k, 0, P - 1);
    const double a = edge[k], base = cum[k];
    auto F = [&](double y) { return base + detail::gauss_legendre(f, a, y) - target; };
    double fa = base - target, fb = cum[k + 1] - target;
    if (fa >= 0) return std::max(a, std::numeric_limits<double>::min());
    if (fb <= 0) return edge[k + 1];
    std::uintmax_t it = 200;
    const auto root = boost::math::tools::toms748_solve(F, a, edge[k + 1], fa, fb,
                                                        boost::math::tools::eps_tolerance<double>(45), it);
    if (it >= 200) throw std::runtime_error("MeanderKernel::sample: CDF inversion did not converge");
    const double y = 0.5 * (root.first + root.second);
    return y > 0 ? y : std::numeric_limits<double>::min();
  }

 private:
  double T_;
};

// Meander of duration T on grid (grid[0] = 0, grid.back() <= T). When
// start_time > 0 the path starts from start_value at that time instead, and
// the grid must begin at start_time.
inline ProcessPath sample_meander_from(const std::vector<double>& grid, double T, double start_time,
                                       double start_value, Stream& s) {
  if (grid.empty() || grid.front() != start_time) throw std::invalid_argument("sample_meander_from: grid must start at start_time");
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (!(grid[i] > grid[i - 1])) throw std::invalid_argument("sample_meander_from: grid not increasing");
  if (grid.back() > T * (1 + 1e-12)) throw std::invalid_argument("sample_meander_from: grid exceeds duration");
  if (start_time > 0 && !(start_value > 0)) throw std::invalid_argument("sample_meander_from: interior start must be positive");
  const MeanderKernel K(T);
  ProcessPath p;
  p.kind = PathKind::meander;
  p.duration = T;
  p.times = grid;
  p.values.resize(grid.size());
  p.values[0] = start_time > 0 ? start_value : 0.0;
  for (std::size_t i = 1; i < grid.size(); ++i)
    p.values[i] = K.sample(grid[i - 1], p.values[i - 1], std::min(grid[i], T), s);
  return p;
}

inline ProcessPath sample_meander(const std::vector<double>& grid, double T, Stream& s) {
  validate_grid(grid);
  return sample_meander_from(grid, T, 0.0, 0.0, s);
}

inline ProcessPath sample_meander(const std::vector<double>& grid, double T, std::uint64_t seed) {
  Stream s(seed, ModuleId::stochproc, 2);
  return sample_meander(grid, T, s);
}

// ---------------------------------------------------------------------------
// Excursion and its couplings.

// Midpoint of the standard excursion: density 16/sqrt(2 pi) v^2 e^{-2 v^2},
// i.e. 4V^2 is chi-square with 3 degrees of freedom.
inline double excursion_midpoint_cdf(double v) {
  return v <= 0 ? 0.0 : boost::math::gamma_p(1.5, 2.0 * v * v);
}
inline double sample_excursion_midpoint(Stream& s) {
  return std::sqrt(0.5 * boost::math::gamma_p_inv(1.5, s.uniform()));
}

namespace detail {
// Adds 1/2 to a grid on [0,1]; returns its index.
inline std::vector<double> with_half(const std::vector<double>& grid, std::size_t& half) {
  validate_grid(grid);
  if (grid.back() > 1.0 + 1e-12) throw std::invalid_argument("excursion grid must lie in [0,1]");
  auto g = merge_grids(grid, {0.5, 1.0});
  g.back() = 1.0;
  half = static_cast<std::size_t>(std::lower_bound(g.begin(), g.end(), 0.5 - 1e-13) - g.begin());
  g[half] = 0.5;
  return g;
}
// Reversed clock s = 1/2 - t for grid points t <= 1/2 (s increasing), or
// s = t - 1/2 reflected around the end for t >= 1/2 (s = 1 - t).
inline std::vector<double> half_clock(const std::vector<double>& g, std::size_t half, bool first) {
  std::vector<double> s;
  if (first)
    for (std::size_t i = half + 1; i-- > 0;) s.push_back(0.5 - g[i]);
  else
    for (std::size_t i = g.size(); i-- > half;) s.push_back(1.0 - g[i]);
  s.front() = 0.0;
  s.back() = 0.5;
  return s;
}
}  // namespace detail

// Excursion on [0,1] from two 3D bridges of duration 1/2 that start at 0
// and meet at a common point of modulus V; the returned grid is the input
// grid plus 1/2 and 1.
inline ProcessPath sample_excursion(const std::vector<double>& grid, Stream& s) {
  std::size_t half;
  const auto g = detail::with_half(grid, half);
  const double V = sample_excursion_midpoint(s);
  const Vec3 mid = uniform_on_sphere(V, s);
  const Vec3 zero{0, 0, 0};
  ProcessPath p;
  p.kind = PathKind::excursion;
  p.duration = 1.0;
  p.times = g;
  p.values.assign(g.size(), 0.0);
  // First half on the forward clock (t from 0 to 1/2).
  std::vector<double> g1(g.begin(), g.begin() + static_cast<long>(half) + 1);
  const auto z1 = sample_bridge3(g1, zero, mid, s);
  for (std::size_t i = 0; i <= half; ++i) p.values[i] = norm3(z1[i]);
  // Second half run backwards from t = 1.
  const auto s2 = detail::half_clock(g, half, false);
  const auto z2 = sample_bridge3(s2, zero, mid, s);
  for (std::size_t k = 0; k < s2.size(); ++k) p.values[g.size() - 1 - k] = norm3(z2[k]);
  p.values[half] = V;
  p.values[0] = 0.0;
  p.values.back() = 0.0;
  return p;
}

inline ProcessPath sample_excursion(const std::vector<double>& grid, std::uint64_t seed) {
  Stream s(seed, ModuleId::stochproc, 3);
  return sample_excursion(grid, s);
}

// Grid on which meander_from_excursion can evaluate every needed point:
// the input grid, U, and the reflections 1 + U - t of points t > U.
inline std::vector<double> meander_excursion_grid(const std::vector<double>& grid, double U) {
  std::vector<double> extra{U, 1.0};
  for (double t : grid)
    if (t > U) extra.push_back(1.0 + U - t);
  auto g = merge_grids(grid, extra);
  g.back() = 1.0;
  return g;
}

// M_t = e_t for t <= U and e_U + e_{1-(t-U)} for t > U, evaluated
// literally on the excursion's own grid.
inline ProcessPath meander_from_excursion(const ProcessPath& exc, double U) {
  if (exc.kind != PathKind::excursion) throw std::invalid_argument("meander_from_excursion: need an excursion");
  if (!(U >= 0 && U <= 1)) throw std::invalid_argument("meander_from_excursion: U outside [0,1]");
  ProcessPath m;
  m.kind = PathKind::meander;
  m.duration = 1.0;
  m.times = exc.times;
  m.values.resize(exc.size());
  const double eU = exc.value_at(U);
  for (std::size_t i = 0; i < exc.size(); ++i) {
    const double t = exc.times[i];
    m.values[i] = t <= U ? exc.values[i] : eU + exc.value_at(std::clamp(1.0 - (t - U), 0.0, 1.0));
  }
  return m;
}

struct BesselExcursionCoupling {
  ProcessPath excursion;
  ProcessPath bessel;
  double eps = 0;           // 1/2 - tau, tau refined by bisection
  double match_time = 0;    // largest grid time up to which the paths agree bit-exactly
  double tau_bracket = 0;   // width of the grid cell containing tau
  std::size_t resamples = 0;
  Vec3 spliced_start{};     // start point of the spliced bridge
  double spliced_mid_modulus = 0;  // |Y-hat| at s = 1/4 (or the nearest grid point)
};

// Bessel-3 path B = |W| on [0,1] and excursion e on [0,1] with e = B on
// [0, 1/2 - tau]. X_s = W_{1/2-s} is a 3D bridge to 0; Y is an independent
// bridge from a uniform point of modulus V; after their moduli meet at tau
// the first half of e follows |X|. The second half of e is an independent
// bridge, W continues freely after 1/2.
inline BesselExcursionCoupling couple_bessel_excursion(const std::vector<double>& grid, Stream& s,
                                                       std::size_t max_resamples = 100) {
  std::size_t half;
  const auto g = detail::with_half(grid, half);
  const auto sclock = detail::half_clock(g, half, true);  // s_k = 1/2 - g[half - k]
  const std::size_t m = sclock.size();
  BesselExcursionCoupling out;
  for (std::size_t attempt = 0; attempt <= max_resamples; ++attempt) {
    Stream st = s.split(attempt);
    const auto W = sample_bm3(g, st);
    const double V = sample_excursion_midpoint(st);
    const Vec3 y0 = uniform_on_sphere(V, st);
    const auto Y = sample_bridge3(sclock, y0, Vec3{0, 0, 0}, st);
    auto X = [&](std::size_t k) -> const Vec3& { return W[half - k]; };
    auto diff = [&](std::size_t k) { return norm3(X(k)) - norm3(Y[k]); };
    // First sign change strictly before the terminal point s = 1/2.
    std::size_t hit = 0;
    const double d0 = diff(0);
    for (std::size_t k = 1; k + 1 < m; ++k) {
      const double dk = diff(k);
      if (dk == 0 || (dk > 0) != (d0 > 0)) {
        hit = k;
        break;
      }
    }
    if (hit == 0) {
      ++out.resamples;
      continue;
    }
    // Bisection on the linear interpolation of the moduli difference.
    double a = sclock[hit - 1], b = sclock[hit];
    const double fa = diff(hit - 1), fb = diff(hit);
    double lo = a, hi = b;
    for (int it = 0; it < 60; ++it) {
      const double mid = 0.5 * (lo + hi);
      const double fm = fa + (fb - fa) * (mid - a) / (b - a);
      if ((fm > 0) == (fa > 0)) lo = mid;
      else hi = mid;
    }
    const double tau = hi;
    out.eps = 0.5 - tau;
    out.tau_bracket = b - a;
    out.match_time = 0.5 - sclock[hit];

    out.bessel.kind = PathKind::bessel3;
    out.bessel.duration = 1.0;
    out.bessel.times = g;
    out.bessel.values.resize(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) out.bessel.values[i] = norm3(W[i]);

    out.excursion.kind = PathKind::excursion;
    out.excursion.duration = 1.0;
    out.excursion.times = g;
    out.excursion.values.assign(g.size(), 0.0);
    // Rotation taking the direction of X at the splice to that of Y.
    const Vec3 xa = X(hit), ya = Y[hit];
    const double nx = norm3(xa), ny = norm3(ya);
    Vec3 u{xa[0] / nx, xa[1] / nx, xa[2] / nx}, v{ya[0] / ny, ya[1] / ny, ya[2] / ny};
    const Vec3 axis{u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]};
    const double c = u[0] * v[0] + u[1] * v[1] + u[2] * v[2];
    auto rotate = [&](const Vec3& p) {
      // Rodrigues: R p = p c + (axis x p) + axis (axis . p) / (1 + c).
      const Vec3 kx{axis[1] * p[2] - axis[2] * p[1], axis[2] * p[0] - axis[0] * p[2], axis[0] * p[1] - axis[1] * p[0]};
      const double kd = axis[0] * p[0] + axis[1] * p[1] + axis[2] * p[2];
      const double f = c > -1 + 1e-15 ? kd / (1 + c) : 0.0;
      return Vec3{p[0] * c + kx[0] + axis[0] * f, p[1] * c + kx[1] + axis[1] * f, p[2] * c + kx[2] + axis[2] * f};
    };
    std::size_t quarter = 0;
    for (std::size_t k = 0; k < m; ++k)
      if (std::abs(sclock[k] - 0.25) < std::abs(sclock[quarter] - 0.25)) quarter = k;
    for (std::size_t k = 0; k < m; ++k) {
      const std::size_t i = half - k;  // grid index of t = 1/2 - s_k
      if (k >= hit) {
        out.excursion.values[i] = out.bessel.values[i];
        if (k == quarter) out.spliced_mid_modulus = norm3(rotate(X(k)));
      } else {
        out.excursion.values[i] = norm3(Y[k]);
        if (k == quarter) out.spliced_mid_modulus = norm3(Y[k]);
      }
    }
    out.spliced_start = y0;
    out.excursion.values[half] = V;
    // Second half: independent bridge from modulus V back to 0 at t = 1.
    const auto s2 = detail::half_clock(g, half, false);
    const auto Z = sample_bridge3(s2, Vec3{0, 0, 0}, uniform_on_sphere(V, st), st);
    for (std::size_t k = 0; k + 1 < s2.size(); ++k) out.excursion.values[g.size() - 1 - k] = norm3(Z[k]);
    out.excursion.values.back() = 0.0;
    return out;
  }
  throw std::runtime_error("couple_bessel_excursion: no crossing before 1/2 after resampling");
}

inline BesselExcursionCoupling couple_bessel_excursion(const std::vector<double>& grid, std::uint64_t seed) {
  Stream s(seed, ModuleId::stochproc, 4);
  return couple_bessel_excursion(grid, s);
}

// ---------------------------------------------------------------------------
// Brownian motion seen from its maximum.

struct MaxDecomposition {
  double sigma = 0;
  std::size_t sigma_index = 0;
  bool at_boundary = false;
  ProcessPath left;   // W_sigma - W_{sigma - s}, duration sigma
  ProcessPath right;  // W_sigma - W_{sigma + s}, duration T - sigma
};

inline MaxDecomposition decompose_bm_at_max(const ProcessPath& bm) {
  validate_grid(bm.times);
  MaxDecomposition d;
  const auto it = std::max_element(bm.values.begin(), bm.values.end());  // first maximum
  d.sigma_index = static_cast<std::size_t>(it - bm.values.begin());
  d.sigma = bm.times[d.sigma_index];
  d.at_boundary = d.sigma_index == 0 || d.sigma_index + 1 == bm.size();
  const double top = *it;
  const double T = bm.times.back();
  d.left.kind = d.right.kind = PathKind::meander;
  d.left.duration = d.sigma;
  d.right.duration = T - d.sigma;
  for (std::size_t k = 0; k <= d.sigma_index; ++k) {
    const std::size_t i = d.sigma_index - k;
    d.left.times.push_back(d.sigma - bm.times[i]);
    d.left.values.push_back(top - bm.values[i]);
  }
  for (std::size_t i = d.sigma_index; i < bm.size(); ++i) {
    d.right.times.push_back(bm.times[i] - d.sigma);
    d.right.values.push_back(top - bm.values[i]);
  }
  d.left.times.front() = d.right.times.front() = 0.0;
  return d;
}

// Duration-T meander mapped to unit duration: t -> t/T, x -> x/sqrt(T).
inline ProcessPath rescale_to_unit(const ProcessPath& p) {
  if (!(p.duration > 0)) throw std::invalid_argument("rescale_to_unit: zero duration");
  ProcessPath q = p;
  const double r = std::sqrt(p.duration);
  for (auto& t : q.times) t /= p.duration;
  for (auto& v : q.values) v /= r;
  q.duration = 1.0;
  return q;
}

// ---------------------------------------------------------------------------
// Monte Carlo checks of the meander inequalities.

struct BoundCheck {
  std::string name;
  std::vector<double> params;
  double lhs = 0, lhs_se = 0;
  double rhs = 0, rhs_se = 0;  // rhs_se = 0 for closed-form right-hand sides
  bool holds = false;
};

struct MeanderBoundReport {
  std::size_t samples = 0;
  std::vector<BoundCheck> checks;
  bool all_hold() const {
    return std::all_of(checks.begin(), checks.end(), [](const BoundCheck& c) { return c.holds; });
  }
};

// Closed form P(M_t <= a) for the standard meander by quadrature.
inline double meander_cdf(double t, double a) {
  if (a <= 0) return 0.0;
  const int P = 64;
  double s = 0;
  for (int k = 0; k < P; ++k)
    s += detail::gauss_legendre([t](double y) { return meander_marginal_density(t, y); }, a * k / P, a * (k + 1) / P);
  return s;
}

// All samples are unit-duration meanders on a common grid.
inline MeanderBoundReport meander_bound_checks(const std::vector<ProcessPath>& samples) {
  MeanderBoundReport rep;
  rep.samples = samples.size();
  if (samples.empty()) return rep;
  const auto& grid = samples.front().times;
  const double N = static_cast<double>(samples.size());
  auto idx = [&](double t) {
    const auto i = static_cast<std::size_t>(std::lower_bound(grid.begin(), grid.end(), t - 1e-12) - grid.begin());
    return std::min(i, grid.size() - 1);
  };
  auto prop = [N](double count) { return std::pair{count / N, std::sqrt(std::max(count / N * (1 - count / N), 1.0 / N) / N)}; };
  auto finish = [&](BoundCheck c) {
    c.holds = c.lhs <= c.rhs + 3.0 * std::hypot(c.lhs_se, c.rhs_se);
    rep.checks.push_back(std::move(c));
  };

  // sup_{r<=t} M_r >= b  versus  2 P(M_t >= b).
  for (double t : {0.25, 0.5, 1.0})
    for (double b : {0.5, 1.0, 1.5}) {
      const std::size_t it = idx(t);
      double cs = 0, ce = 0;
      for (const auto& p : samples) {
        const double sup = *std::max_element(p.values.begin(), p.values.begin() + static_cast<long>(it) + 1);
        cs += sup >= b;
        ce += p.values[it] >= b;
      }
      BoundCheck c{"reflection_sup", {t, b}};
      std::tie(c.lhs, c.lhs_se) = prop(cs);
      auto [r, rs] = prop(ce);
      c.rhs = 2 * r;
      c.rhs_se = 2 * rs;
      finish(c);
    }
  // sup_{s<=r<=t} |M_r - M_s| >= b  versus  4 P(M_t - M_s >= b).
  for (auto [s0, t, b] : {std::array<double, 3>{0.2, 0.6, 0.5}, {0.1, 0.4, 0.3}, {0.5, 1.0, 0.7}}) {
    const std::size_t is = idx(s0), it = idx(t);
    double cs = 0, ce = 0;
    for (const auto& p : samples) {
      double sup = 0;
      for (std::size_t i = is; i <= it; ++i) sup = std::max(sup, std::abs(p.values[i] - p.values[is]));
      cs += sup >= b;
      ce += p.values[it] - p.values[is] >= b;
    }
    BoundCheck c{"reflection_increment", {s0, t, b}};
    std::tie(c.lhs, c.lhs_se) = prop(cs);
    auto [r, rs] = prop(ce);
    c.rhs = 4 * r;
    c.rhs_se = 4 * rs;
    finish(c);
  }
  // inf_{s<=r<=t} M_r <= a versus its three-term upper bound.
  for (auto [s0, t, a, lam] : {std::array<double, 4>{0.1, 0.3, 0.2, 2.0}, {0.2, 0.4, 0.1, 3.0}, {0.05, 0.45, 0.3, 1.5}}) {
    const std::size_t is = idx(s0), it = idx(t);
    double cl = 0, c1 = 0, c2 = 0;
    for (const auto& p : samples) {
      const double inf = *std::min_element(p.values.begin() + static_cast<long>(is), p.values.begin() + static_cast<long>(it) + 1);
      cl += inf <= a;
      c1 += p.values[is] <= lam * a;
      c2 += p.values[it] <= lam * a;
    }
    BoundCheck c{"meander_inf", {s0, t, a, lam}};
    std::tie(c.lhs, c.lhs_se) = prop(cl);
    auto [p1, s1] = prop(c1);
    auto [p2, s2] = prop(c2);
    const double d = t - s0;
    const double extra = 4 * a * std::sqrt(2 * t) / d * std::exp(-2 / d * a * a * (lam - 1) * (lam - 1)) /
                         (1 - std::exp(-2 / d * a * a * lam * lam));
    c.rhs = p1 + p2 + extra;
    c.rhs_se = std::hypot(s1, s2);
    finish(c);
  }
  // P(M_t <= a) <= 4a/sqrt(pi t) (1 ^ a^2/2t): empirical and quadrature LHS.
  for (auto [t, a] : {std::array<double, 2>{0.4, 0.1}, {0.2, 0.3}, {0.45, 0.5}}) {
    const std::size_t it = idx(t);
    double cnt = 0;
    for (const auto& p : samples) cnt += p.values[it] <= a;
    const double bound = 4 * a / std::sqrt(std::numbers::pi * t) * std::min(1.0, a * a / (2 * t));
    BoundCheck c{"small_ball", {t, a}};
    std::tie(c.lhs, c.lhs_se) = prop(cnt);
    c.rhs = bound;
    finish(c);
    BoundCheck q{"small_ball_quadrature", {t, a}};
    q.lhs = meander_cdf(t, a);
    q.rhs = bound;
    finish(q);
  }
  // E[exp(a M_r^2)] <= (1 - 2ra)^{-3/2}.
  for (auto [a, r] : {std::array<double, 2>{0.2, 0.5}, {0.5, 0.4}, {0.3, 0.8}}) {
    const std::size_t ir = idx(r);
    std::vector<double> v;
    v.reserve(samples.size());
    for (const auto& p : samples) v.push_back(std::exp(a * p.values[ir] * p.values[ir]));
    BoundCheck c{"exp_moment", {a, r}};
    c.lhs = mean(v);
    c.lhs_se = std_error(v);
    c.rhs = std::pow(1 - 2 * r * a, -1.5);
    finish(c);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Path I/O.

inline void write_path_csv(std::ostream& os, const ProcessPath& p) {
  os << "t,value\n";
  char buf[80];
  for (std::size_t i = 0; i < p.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", p.times[i], p.values[i]);
    os << buf;
  }
}

namespace detail {
inline void path_put(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}
inline void path_put_f(std::ostream& os, double d) {
  std::uint64_t v;
  std::memcpy(&v, &d, 8);
  path_put(os, v);
}
inline std::uint64_t path_get(std::istream& is) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8)) throw std::runtime_error("RPLPATH1: truncated stream");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}
inline double path_get_f(std::istream& is) {
  const auto v = path_get(is);
  double d;
  std::memcpy(&d, &v, 8);
  return d;
}
}  // namespace detail

inline void write_path_binary(std::ostream& os, const ProcessPath& p) {
  os.write("RPLPATH1", 8);
  detail::path_put(os, static_cast<std::uint64_t>(p.kind));
  detail::path_put_f(os, p.duration);
  detail::path_put(os, p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    detail::path_put_f(os, p.times[i]);
    detail::path_put_f(os, p.values[i]);
  }
}

inline ProcessPath read_path_binary(std::istream& is) {
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, "RPLPATH1", 8) != 0) throw std::runtime_error("not an RPLPATH1 file");
  ProcessPath p;
  p.kind = static_cast<PathKind>(detail::path_get(is));
  p.duration = detail::path_get_f(is);
  const auto len = detail::path_get(is);
  if (len > (1ULL << 34)) throw std::runtime_error("RPLPATH1: implausible length");
  p.times.resize(len);
  p.values.resize(len);
  for (std::size_t i = 0; i < len; ++i) {
    p.times[i] = detail::path_get_f(is);
    p.values[i] = detail::path_get_f(is);
  }
  return p;
}

}  // namespace rpl

#endif  // RPL_STOCHPROC_HPP
