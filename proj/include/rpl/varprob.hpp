#ifndef RPL_VARPROB_HPP
#define RPL_VARPROB_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "rpl/rangelaw.hpp"
#include "rpl/rng.hpp"
#include "rpl/stochproc.hpp"

namespace rpl {

// Result of a grid argmax. Single-variable problems leave argmax2 as NaN.
struct VariationalSolution {
  double value = kNegInf;
  double argmax = std::numeric_limits<double>::quiet_NaN();
  double argmax2 = std::numeric_limits<double>::quiet_NaN();
  double grid_resolution = 0;
  int refinement_depth = 0;
  bool at_boundary = false;
  bool stabilized = true;
  double window = 0;  // K for the second-order problem, L for Chernoff
  std::vector<double> level_argmax;
  std::vector<double> level_value;
  std::vector<double> level_resolution;
  std::vector<double> level_window;  // Chernoff window doubling
};

inline nlohmann::json to_json(const VariationalSolution& s) {
  nlohmann::json j;
  j["value"] = s.value;
  if (std::isnan(s.argmax2))
    j["argmax"] = s.argmax;
  else
    j["argmax"] = {s.argmax, s.argmax2};
  j["grid_resolution"] = s.grid_resolution;
  j["refinement_depth"] = s.refinement_depth;
  j["at_boundary"] = s.at_boundary;
  j["stabilized"] = s.stabilized;
  j["window"] = s.window;
  j["levels"] = nlohmann::json::array();
  for (std::size_t i = 0; i < s.level_value.size(); ++i) {
    nlohmann::json l{{"value", s.level_value[i]}};
    if (i < s.level_resolution.size()) l["resolution"] = s.level_resolution[i];
    if (i < s.level_window.size()) l["window"] = s.level_window[i];
    if (s.level_argmax.size() == 2 * s.level_value.size())
      l["argmax"] = {s.level_argmax[2 * i], s.level_argmax[2 * i + 1]};
    else if (i < s.level_argmax.size())
      l["argmax"] = s.level_argmax[i];
    j["levels"].push_back(l);
  }
  return j;
}

namespace detail {

// FNV-1a over the value bytes; keys refinement noise to the path itself so
// a path is refined identically whichever role it plays.
inline std::uint64_t path_hash(const ProcessPath& p) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (double v : p.values) {
    unsigned char b[sizeof(double)];
    std::memcpy(b, &v, sizeof b);
    for (unsigned char c : b) h = (h ^ c) * 0x100000001b3ULL;
  }
  return h;
}

inline bool is_flat(const ProcessPath& p) {
  return std::all_of(p.values.begin(), p.values.end(), [&](double v) { return v == p.values.front(); });
}

inline double value_on_grid(const ProcessPath& p, double t) {
  const std::size_t i = p.index_of(t);
  if (i == static_cast<std::size_t>(-1)) throw std::logic_error("value_on_grid: time not on grid");
  return p.values[i];
}

inline double local_cell(const std::vector<double>& g, std::size_t i) {
  double w = 0;
  if (i > 0) w = std::max(w, g[i] - g[i - 1]);
  if (i + 1 < g.size()) w = std::max(w, g[i + 1] - g[i]);
  return w;
}

}  // namespace detail

struct UstarOptions {
  int refine_levels = 2;
  int refine_factor = 8;
  std::uint64_t seed = 0;
};

// argmax over u in [0, c_h] of x1(u) + x2(c_h - u). The evaluation grid is
// the union of x1's times and the reflected times of x2; each refinement
// level inserts refine_factor times finer points around the current argmax
// by Brownian-bridge interpolation of both paths.
inline VariationalSolution solve_ustar(const ProcessPath& x1, const ProcessPath& x2, double ch,
                                       const UstarOptions& opt = {}) {
  if (x1.times.empty() || x2.times.empty()) throw std::invalid_argument("solve_ustar: empty path");
  if (x1.times.back() < ch * (1 - 1e-12) || x2.times.back() < ch * (1 - 1e-12))
    throw std::invalid_argument("solve_ustar: paths must cover [0, c_h]");

  ProcessPath p1 = x1, p2 = x2;
  std::vector<double> grid;
  for (double t : x1.times)
    if (t <= ch) grid.push_back(t);
  for (double t : x2.times)
    if (t <= ch) grid.push_back(ch - t);
  grid.push_back(ch);
  grid = merge_grids(grid, {0.0});

  Stream s1(detail::path_hash(x1), ModuleId::varprob, 1), s2(detail::path_hash(x2), ModuleId::varprob, 1);
  s1 = s1.split(opt.seed);
  s2 = s2.split(opt.seed);
  auto sync = [&](const std::vector<double>& pts) {
    std::vector<double> r(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) r[i] = std::max(0.0, ch - pts[i]);
    p1 = refine_bridge(p1, pts, s1);
    p2 = refine_bridge(p2, r, s2);
  };
  sync(grid);

  VariationalSolution sol;
  auto scan = [&]() {
    std::size_t best = 0;
    double bv = kNegInf;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const double v = detail::value_on_grid(p1, grid[i]) + detail::value_on_grid(p2, std::max(0.0, ch - grid[i]));
      if (v > bv) {
        bv = v;
        best = i;
      }
    }
    return std::pair{best, bv};
  };

  auto [bi, bv] = scan();
  double cell = detail::local_cell(grid, bi);
  sol.level_argmax.push_back(grid[bi]);
  sol.level_value.push_back(bv);
  sol.level_resolution.push_back(cell);

  // A constant profile has no fluctuation to resolve below the grid.
  const bool flat = detail::is_flat(x1) && detail::is_flat(x2);
  for (int lev = 0; lev < opt.refine_levels && !flat && cell > 0; ++lev) {
    const double fine = cell / opt.refine_factor;
    std::vector<double> pts;
    const double c = grid[bi];
    for (int k = -2 * opt.refine_factor; k <= 2 * opt.refine_factor; ++k) {
      const double t = c + k * fine;
      if (t > 0 && t < ch) pts.push_back(t);
    }
    sync(pts);
    grid = merge_grids(grid, pts);
    std::tie(bi, bv) = scan();
    cell = fine;
    sol.level_argmax.push_back(grid[bi]);
    sol.level_value.push_back(bv);
    sol.level_resolution.push_back(fine);
    ++sol.refinement_depth;
  }
  sol.value = bv;
  sol.argmax = grid[bi];
  sol.grid_resolution = cell;
  sol.at_boundary = bi == 0 || bi + 1 == grid.size();
  sol.window = ch;
  return sol;
}

// ---------------------------------------------------------------------------
// Chernoff problem: argmax of W_s - c s^2 over a two-sided path.

struct ChernoffOptions {
  double initial_window = 1.0;
};

// Exact grid argmax over |s| <= L, with L doubled from initial_window until
// two consecutive windows agree or the path is exhausted.
inline VariationalSolution solve_chernoff(const TwoSidedPath& w, double drift, const ChernoffOptions& opt = {}) {
  if (!(drift >= 0)) throw std::invalid_argument("solve_chernoff: drift must be nonnegative");
  const double extent = std::min(w.pos.times.back(), w.neg.times.back());
  auto best_within = [&](double L) {
    VariationalSolution s;
    // Scan increasing s so ties resolve to the smallest time.
    for (std::size_t k = w.neg.size(); k-- > 1;) {
      const double t = -w.neg.times[k];
      if (-t > L) continue;
      const double v = w.neg.values[k] - drift * t * t;
      if (v > s.value) {
        s.value = v;
        s.argmax = t;
      }
    }
    for (std::size_t k = 0; k < w.pos.size(); ++k) {
      const double t = w.pos.times[k];
      if (t > L) break;
      const double v = w.pos.values[k] - drift * t * t;
      if (v > s.value) {
        s.value = v;
        s.argmax = t;
      }
    }
    return s;
  };
  double L = std::min(opt.initial_window, extent);
  VariationalSolution prev = best_within(L), cur = prev;
  bool stable = false;
  while (L < extent) {
    L = std::min(2 * L, extent);
    cur = best_within(L);
    cur.level_argmax = prev.level_argmax;
    cur.level_value = prev.level_value;
    cur.level_window = prev.level_window;
    cur.level_argmax.push_back(prev.argmax);
    cur.level_value.push_back(prev.value);
    cur.level_window.push_back(L / 2);
    if (cur.value == prev.value && cur.argmax == prev.argmax) {
      stable = true;
      break;
    }
    prev = cur;
  }
  cur.window = L;
  cur.stabilized = stable || (drift > 0 && L >= extent && cur.value == prev.value);
  double res = 0;
  for (const auto* p : {&w.pos, &w.neg})
    for (std::size_t k = 1; k < p->size(); ++k) res = std::max(res, p->times[k] - p->times[k - 1]);
  cur.grid_resolution = res;
  cur.at_boundary = std::abs(cur.argmax) >= extent * (1 - 1e-12);
  return cur;
}

// Keeps every stride-th grid point (and the last one).
inline ProcessPath subsample(const ProcessPath& p, std::size_t stride) {
  if (stride == 0) throw std::invalid_argument("subsample: stride must be positive");
  ProcessPath q;
  q.kind = p.kind;
  q.duration = p.duration;
  for (std::size_t i = 0; i < p.size(); i += stride) {
    q.times.push_back(p.times[i]);
    q.values.push_back(p.values[i]);
  }
  if (q.times.back() != p.times.back()) {
    q.times.push_back(p.times.back());
    q.values.push_back(p.values.back());
  }
  return q;
}

inline TwoSidedPath subsample(const TwoSidedPath& p, std::size_t stride) {
  return {subsample(p.pos, stride), subsample(p.neg, stride), p.kind};
}

// Drift coefficients of the second- and third-order problems.
inline double w2_drift(double beta, double h) {
  const double ch = c_h(h);
  return 3 * std::numbers::pi * std::numbers::pi / (beta * std::pow(ch, 4) * std::numbers::sqrt2);
}
inline double chernoff_drift(double beta, double h) {
  const double ch = c_h(h);
  return 3 * std::numbers::pi * std::numbers::pi / (2 * beta * std::pow(ch, 4));
}

// ---------------------------------------------------------------------------
// Coupled limit system.

enum class ChiMode { printed, unit };

struct CouplingOptions {
  double h = 1.0;
  ChiMode chi_mode = ChiMode::printed;
  double delta0_cap = 0;    // 0: no cap
  double k_max = 8.0;       // zoomed paths are sampled at least on [-k_max, k_max]
  double fine_step = 1.0 / 64;
  int geometric_levels = 20;  // extra zoomed points fine_step * 2^{-j} near 0
  int max_resamples = 100;
  double boundary_cell = 1e-9;
};

struct CoupledLimitSystem {
  long n = 0;
  double h = 1.0;
  double ch = 0;
  double u_star = 0;
  double chi_plus = 1, chi_minus = 1;
  double delta0 = 0;
  double zoom = 0;   // n^{-1/9}: u - u* = zoom * p
  double scale = 0;  // n^{-1/18}
  TwoSidedPath bessel;  // two-sided BES3 in the zoomed variable
  TwoSidedPath ybm;     // two-sided BM in the zoomed variable, same grids
  // X^(1), X^(2) on the lattice k n^{-1/3}, 0 <= k n^{-1/3} <= 2 c_h.
  ProcessPath x1, x2;
  // X_u = X^(1)_u + X^(2)_{c_h-u} on the u-grid (lattice, reflected lattice
  // and the coupling window edges).
  std::vector<double> u_grid, x_profile, y_profile;
  double x_ustar = 0, y_ustar = 0;
  int resamples = 0;
  double max_identity_error = 0;
  std::uint64_t seed = 0;
  ChiMode chi_mode = ChiMode::printed;

  double chi(double p) const { return p >= 0 ? chi_plus : chi_minus; }
};

namespace detail {

inline double largest_dyadic_below(double x) {
  double d = 1.0;
  while (d >= x) d *= 0.5;
  while (2 * d < x) d *= 2;
  return d;
}

// Uniform points k*step on [0, L], the extra points, and `geometric` points
// step*2^{-j} accumulating at 0.
inline std::vector<double> fine_side_grid(double L, double step, const std::vector<double>& extra, int geometric = 0) {
  std::vector<double> g;
  const auto m = static_cast<std::size_t>(std::ceil(L / step - 1e-9));
  for (std::size_t k = 0; k <= m; ++k) g.push_back(static_cast<double>(k) * step);
  for (int j = 1; j <= geometric; ++j) g.push_back(std::ldexp(step, -j));
  return merge_grids(g, extra);
}

}  // namespace detail

inline double lattice_step(long n) { return std::pow(static_cast<double>(n), -1.0 / 3.0); }

// Number of lattice points k n^{-1/3} needed to cover [0, 2 c_h].
inline long lattice_sites(long n, double h) {
  return static_cast<long>(std::ceil(2 * c_h(h) / lattice_step(n) - 1e-9));
}

inline CoupledLimitSystem build_coupled_system(long n, std::uint64_t seed, const CouplingOptions& opt = {},
                                               std::uint64_t replica = 0) {
  if (n < 8) throw std::invalid_argument("build_coupled_system: n too small");
  CoupledLimitSystem sys;
  sys.n = n;
  sys.h = opt.h;
  sys.seed = seed;
  sys.chi_mode = opt.chi_mode;
  sys.ch = c_h(opt.h);
  const double ch = sys.ch;
  const double a = lattice_step(n);
  sys.zoom = std::pow(static_cast<double>(n), -1.0 / 9.0);
  sys.scale = std::pow(static_cast<double>(n), -1.0 / 18.0);
  Stream st(seed, ModuleId::varprob, replica);

  // u* from the arcsine law; draws within boundary_cell * c_h of an end are
  // redrawn and counted.
  for (;;) {
    const double U = st.uniform();
    const double sn = std::sin(0.5 * std::numbers::pi * U);
    sys.u_star = ch * sn * sn;
    const double cell = opt.boundary_cell * ch;
    if (sys.u_star > cell && sys.u_star < ch - cell) break;
    if (++sys.resamples > opt.max_resamples) throw std::runtime_error("build_coupled_system: u* resample budget exhausted");
  }
  const double us = sys.u_star;
  if (opt.chi_mode == ChiMode::printed) {
    sys.chi_plus = 1 / std::sqrt(ch - us);
    sys.chi_minus = 1 / std::sqrt(us);
  }
  sys.delta0 = detail::largest_dyadic_below(std::min(us, ch - us));
  if (opt.delta0_cap > 0) sys.delta0 = std::min(sys.delta0, opt.delta0_cap);
  const double d0 = sys.delta0;

  std::vector<double> ug{0.0, ch, 0.5 * ch, us, us - d0, us + d0};
  for (long k = 0; static_cast<double>(k) * a <= ch; ++k) {
    ug.push_back(static_cast<double>(k) * a);
    ug.push_back(ch - static_cast<double>(k) * a);
  }
  ug.erase(std::remove_if(ug.begin(), ug.end(), [&](double u) { return u < 0 || u > ch; }), ug.end());
  sys.u_grid = merge_grids(ug, {});
  const auto& U = sys.u_grid;

  // Zoomed grids: every u-grid point maps to p = (u - u*)/zoom.
  std::vector<double> zp, zn;
  for (double u : U) {
    const double p = (u - us) / sys.zoom;
    (p >= 0 ? zp : zn).push_back(std::abs(p));
  }
  const double Lp = std::max(opt.k_max, (ch - us) / sys.zoom), Ln = std::max(opt.k_max, us / sys.zoom);
  const auto gp = detail::fine_side_grid(Lp, opt.fine_step, zp, opt.geometric_levels);
  const auto gn = detail::fine_side_grid(Ln, opt.fine_step, zn, opt.geometric_levels);
  Stream sb = st.split(1), sy = st.split(2), sm = st.split(3), sx = st.split(4);
  sys.bessel.kind = PathKind::two_sided_bessel;
  sys.bessel.pos = sample_bessel3(gp, sb);
  sys.bessel.neg = sample_bessel3(gn, sb);
  sys.bessel.pos.kind = sys.bessel.neg.kind = PathKind::two_sided_bessel;
  sys.ybm.kind = PathKind::bm_two_sided;
  sys.ybm.pos = sample_bm(gp, sy);
  sys.ybm.neg = sample_bm(gn, sy);
  sys.ybm.pos.kind = sys.ybm.neg.kind = PathKind::bm_two_sided;

  auto zoomed = [&](const TwoSidedPath& P, double u) {
    const double p = (u - us) / sys.zoom;
    return detail::value_on_grid(p >= 0 ? P.pos : P.neg, std::abs(p));
  };

  // D_u = X_{u*} - X_u and E_u = Y_u - Y_{u*} on the u-grid.
  const std::size_t N = U.size();
  std::vector<double> D(N), E(N);
  const double tol = 1e-12 * std::max(1.0, ch);
  std::vector<std::size_t> right, left;
  for (std::size_t i = 0; i < N; ++i) {
    const double du = U[i] - us;
    E[i] = std::numbers::sqrt2 * sys.scale * zoomed(sys.ybm, U[i]);
    if (std::abs(du) <= d0 + tol) {
      D[i] = std::numbers::sqrt2 * sys.scale * sys.chi(du) * zoomed(sys.bessel, U[i]);
    } else if (du > 0) {
      right.push_back(i);
    } else {
      left.push_back(i);
    }
  }
  // Meander completion from the pasted values at distance delta0.
  auto complete = [&](const std::vector<std::size_t>& idx, double T, double edge_u, double sign) {
    if (idx.empty()) return;
    std::vector<double> times{d0};
    for (std::size_t i : idx) times.push_back(std::abs(U[i] - us));
    std::sort(times.begin(), times.end());
    const double start = sys.scale * sys.chi(sign) * zoomed(sys.bessel, edge_u);
    const auto m = sample_meander_from(times, T, d0, start, sm);
    for (std::size_t i : idx) D[i] = std::numbers::sqrt2 * detail::value_on_grid(m, std::abs(U[i] - us));
  };
  complete(right, ch - us, us + d0, +1.0);
  complete(left, us, us - d0, -1.0);

  const double D0 = D.front(), Dc = D.back(), E0 = E.front(), Ec = E.back();
  sys.x_ustar = 0.5 * (D0 - E0 + Dc + Ec);
  sys.y_ustar = 0.5 * (D0 - E0 - Dc - Ec);
  sys.x_profile.resize(N);
  sys.y_profile.resize(N);
  std::vector<double> X1(N), X2r(N);  // X2r[i] = X^(2)_{c_h - U[i]}
  for (std::size_t i = 0; i < N; ++i) {
    X1[i] = 0.5 * (D0 - D[i] + E[i] - E0);
    X2r[i] = 0.5 * (Dc - D[i] + Ec - E[i]);
    sys.x_profile[i] = X1[i] + X2r[i];
    sys.y_profile[i] = X1[i] - X2r[i];
  }

  // Lattice paths on [0, 2 c_h], free Brownian extension beyond c_h.
  ProcessPath ugrid_path;
  ugrid_path.times = U;
  auto at_u = [&](const std::vector<double>& v, double u) {
    ugrid_path.values = v;
    return detail::value_on_grid(ugrid_path, u);
  };
  const long sites = lattice_sites(n, opt.h);
  auto make = [&](bool second) {
    ProcessPath p;
    p.kind = PathKind::bm;
    double last_t = 0, last_v = 0;
    for (long k = 0; k <= sites; ++k) {
      const double t = static_cast<double>(k) * a;
      double v;
      if (t <= ch) {
        v = second ? at_u(X2r, ch - t) : at_u(X1, t);
      } else {
        if (last_t < ch) {
          last_v = second ? X2r.front() : X1.back();
          last_t = ch;
        }
        v = last_v + std::sqrt(t - last_t) * sx.normal();
      }
      last_t = t;
      last_v = v;
      p.times.push_back(t);
      p.values.push_back(v);
    }
    p.duration = p.times.back();
    return p;
  };
  sys.x1 = make(false);
  sys.x2 = make(true);
  sys.x2.values.front() = 0.0;
  sys.x1.values.front() = 0.0;

  // Invariants: the pasted identity on the coupling window, and u* maximal.
  for (std::size_t i = 0; i < N; ++i) {
    const double du = U[i] - us;
    if (std::abs(du) <= d0 + tol) {
      const double lhs = (sys.x_ustar - sys.x_profile[i]) / sys.scale;
      const double rhs = std::numbers::sqrt2 * sys.chi(du) * zoomed(sys.bessel, U[i]);
      sys.max_identity_error = std::max(sys.max_identity_error, std::abs(lhs - rhs) / (1 + std::abs(rhs)));
      const double ly = (sys.y_profile[i] - sys.y_ustar) / sys.scale;
      const double ry = std::numbers::sqrt2 * zoomed(sys.ybm, U[i]);
      sys.max_identity_error = std::max(sys.max_identity_error, std::abs(ly - ry) / (1 + std::abs(ry)));
    }
    if (sys.x_profile[i] > sys.x_ustar + 1e-12 * (1 + std::abs(sys.x_ustar)))
      throw std::logic_error("build_coupled_system: profile exceeds X at u*");
  }
  if (sys.max_identity_error > 1e-9) throw std::logic_error("build_coupled_system: coupling identity violated");
  return sys;
}

// Second-order problem over p, q in the zoomed grid within [-K, K]:
//   sup  Y_p - Y_q - chi(p) B_p - chi(q) B_q - c (p - q)^2,
// reported as (U, V) = (p, -q).
struct W2Input {
  std::vector<double> pts;  // increasing, contains 0
  std::vector<double> f, g;
};

inline W2Input w2_input(const TwoSidedPath& bessel, const TwoSidedPath& ybm, double chi_plus, double chi_minus,
                        double K, double stride_step = 0) {
  W2Input in;
  auto push = [&](double p, double b, double y) {
    const double chi = p >= 0 ? chi_plus : chi_minus;
    in.pts.push_back(p);
    in.f.push_back(y - chi * b);
    in.g.push_back(-y - chi * b);
  };
  auto keep = [&](double t) {
    if (stride_step <= 0) return true;
    const double r = t / stride_step;
    return std::abs(r - std::round(r)) < 1e-9;
  };
  if (bessel.neg.times != ybm.neg.times || bessel.pos.times != ybm.pos.times)
    throw std::invalid_argument("w2_input: B and Y must share grids");
  for (std::size_t k = bessel.neg.size(); k-- > 1;) {
    const double t = bessel.neg.times[k];
    if (t <= K * (1 + 1e-12) && keep(t)) push(-t, bessel.neg.values[k], ybm.neg.values[k]);
  }
  for (std::size_t k = 0; k < bessel.pos.size(); ++k) {
    const double t = bessel.pos.times[k];
    if (t > K * (1 + 1e-12)) break;
    if (keep(t)) push(t, bessel.pos.values[k], ybm.pos.values[k]);
  }
  return in;
}

inline VariationalSolution solve_w2_grid(const W2Input& in, double drift) {
  VariationalSolution s;
  std::size_t bp = 0, bq = 0;
  for (std::size_t i = 0; i < in.pts.size(); ++i) {
    const double p = in.pts[i];
    for (std::size_t j = 0; j < in.pts.size(); ++j) {
      const double d = p - in.pts[j];
      const double v = in.f[i] + in.g[j] - drift * d * d;
      // Ties go to the point closest to the origin.
      if (v > s.value || (v == s.value && std::abs(p) + std::abs(in.pts[j]) <
                                              std::abs(in.pts[bp]) + std::abs(in.pts[bq]))) {
        s.value = v;
        bp = i;
        bq = j;
      }
    }
  }
  s.argmax = in.pts[bp];
  s.argmax2 = -in.pts[bq];
  double res = 0;
  for (std::size_t i = 1; i < in.pts.size(); ++i) res = std::max(res, in.pts[i] - in.pts[i - 1]);
  s.grid_resolution = res;
  const double K = in.pts.empty() ? 0 : std::max(-in.pts.front(), in.pts.back());
  s.window = K;
  s.at_boundary = std::abs(s.argmax) >= K * (1 - 1e-12) || std::abs(s.argmax2) >= K * (1 - 1e-12);
  return s;
}

// Solves on two uniform sub-grids (4x and 2x the fine step) and then on the
// full grid, recording each level.
inline VariationalSolution solve_w2_paths(const TwoSidedPath& bessel, const TwoSidedPath& ybm, double chi_plus,
                                          double chi_minus, double drift, double K, double fine_step) {
  if (!(K > 1)) throw std::invalid_argument("solve_w2: K > 1 required");
  VariationalSolution out;
  for (double stride : {4 * fine_step, 2 * fine_step}) {
    const auto s = solve_w2_grid(w2_input(bessel, ybm, chi_plus, chi_minus, K, stride), drift);
    out.level_argmax.push_back(s.argmax);
    out.level_argmax.push_back(s.argmax2);
    out.level_value.push_back(s.value);
    out.level_resolution.push_back(stride);
  }
  auto s = solve_w2_grid(w2_input(bessel, ybm, chi_plus, chi_minus, K), drift);
  s.level_argmax = std::move(out.level_argmax);
  s.level_value = std::move(out.level_value);
  s.level_resolution = std::move(out.level_resolution);
  s.refinement_depth = 2;
  return s;
}

inline VariationalSolution solve_w2(const CoupledLimitSystem& sys, double beta, double K, double fine_step = 1.0 / 64) {
  return solve_w2_paths(sys.bessel, sys.ybm, sys.chi_plus, sys.chi_minus, w2_drift(beta, sys.h), K, fine_step);
}

struct W2Sweep {
  std::vector<double> K;
  std::vector<VariationalSolution> solutions;
  bool stabilized = false;
  const VariationalSolution& last() const { return solutions.back(); }
};

// Solves for each K in turn; stabilized when the last two agree in value
// (to tol) and argmax.
inline W2Sweep solve_w2_sweep(const CoupledLimitSystem& sys, double beta, const std::vector<double>& Ks,
                              double tol = 1e-12, double fine_step = 1.0 / 64) {
  W2Sweep sw;
  for (double K : Ks) {
    sw.K.push_back(K);
    sw.solutions.push_back(solve_w2(sys, beta, K, fine_step));
  }
  if (sw.solutions.size() >= 2) {
    const auto& a = sw.solutions[sw.solutions.size() - 2];
    const auto& b = sw.solutions.back();
    sw.stabilized = std::abs(a.value - b.value) <= tol && a.argmax == b.argmax && a.argmax2 == b.argmax2;
  }
  for (auto& s : sw.solutions) s.stabilized = sw.stabilized;
  return sw;
}

// Lattice centres implied by (u*, U, V) at size n.
struct W2Centers {
  double x = 0, y = 0;
};
inline W2Centers w2_centers(const CoupledLimitSystem& sys, const VariationalSolution& w2) {
  const double n13 = std::cbrt(static_cast<double>(sys.n)), n29 = std::pow(static_cast<double>(sys.n), 2.0 / 9.0);
  return {sys.u_star * n13 + w2.argmax * n29, (sys.ch - sys.u_star) * n13 + w2.argmax2 * n29};
}

// ---------------------------------------------------------------------------
// Half-line system: X on the lattice built from a zoomed two-sided BM W
// around c_h, so that n^{1/18}(X_{c_h + s n^{-1/9}} - X_{c_h}) = W_s.

struct HalflineSystem {
  long n = 0;
  double h = 1.0;
  double ch = 0;
  double zoom = 0, scale = 0;
  TwoSidedPath w;   // zoomed BM
  ProcessPath x;    // lattice path on [0, 2 c_h]
  double x_ch = 0;  // X at c_h
  std::uint64_t seed = 0;
};

inline HalflineSystem build_halfline_system(long n, std::uint64_t seed, double h = 1.0, double window = 8.0,
                                            double fine_step = 1.0 / 64, std::uint64_t replica = 0) {
  HalflineSystem sys;
  sys.n = n;
  sys.h = h;
  sys.seed = seed;
  sys.ch = c_h(h);
  sys.zoom = std::pow(static_cast<double>(n), -1.0 / 9.0);
  sys.scale = std::pow(static_cast<double>(n), -1.0 / 18.0);
  const double a = lattice_step(n);
  const long sites = lattice_sites(n, h);
  std::vector<double> zp, zn;
  for (long k = 0; k <= sites; ++k) {
    const double p = (static_cast<double>(k) * a - sys.ch) / sys.zoom;
    (p >= 0 ? zp : zn).push_back(std::abs(p));
  }
  const double Lp = std::max(window, sys.ch / sys.zoom + 1), Ln = std::max(window, sys.ch / sys.zoom);
  Stream st(seed, ModuleId::varprob, 0x4a1f0000ULL + replica);
  sys.w.kind = PathKind::bm_two_sided;
  sys.w.pos = sample_bm(detail::fine_side_grid(Lp, fine_step, zp), st);
  sys.w.neg = sample_bm(detail::fine_side_grid(Ln, fine_step, merge_grids(zn, {sys.ch / sys.zoom})), st);
  const double w0 = detail::value_on_grid(sys.w.neg, sys.ch / sys.zoom);
  sys.x.kind = PathKind::bm;
  for (long k = 0; k <= sites; ++k) {
    const double t = static_cast<double>(k) * a;
    const double p = (t - sys.ch) / sys.zoom;
    const double wv = detail::value_on_grid(p >= 0 ? sys.w.pos : sys.w.neg, std::abs(p));
    sys.x.times.push_back(t);
    sys.x.values.push_back(k == 0 ? 0.0 : sys.scale * (wv - w0));
  }
  sys.x.duration = sys.x.times.back();
  sys.x_ch = -sys.scale * w0;
  return sys;
}

}  // namespace rpl

#endif  // RPL_VARPROB_HPP
