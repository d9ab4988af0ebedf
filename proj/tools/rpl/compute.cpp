#include "compute.hpp"

#include <cmath>
#include <cstdio>

#include "app.hpp"
#include "rpl/parallel.hpp"

namespace rpl::app {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

Law make_law(const std::string& name, double alpha, double p, double q) {
  if (name == "gaussian") return Law::gaussian();
  if (name == "two_point") return Law::two_point();
  if (name == "uniform") return Law::uniform();
  if (name == "stable") return Law::stable(alpha, p, q);
  throw std::invalid_argument("make_law: no sampler for law '" + name + "'");
}

Environment make_environment(const Law& law, long n, double h, std::uint64_t seed) {
  const long sites = lattice_sites(n, h);
  return generate_environment(law, -sites, sites, seed);
}

CoupledReplica coupled_replica(long n, std::uint64_t seed, const CoupledSettings& s) {
  CouplingOptions opt;
  opt.h = s.h;
  opt.chi_mode = s.chi;
  if (!s.Ks.empty()) opt.k_max = std::max(opt.k_max, *std::max_element(s.Ks.begin(), s.Ks.end()));
  const auto sys = build_coupled_system(n, seed, opt);
  const auto env = env_from_brownian(n, sys.x1.times, sys.x1.values, sys.x2.times, sys.x2.values, seed);
  const auto m = endpoint_marginal(env, PolymerParams{n, s.beta, s.h});

  CoupledReplica r;
  r.n = n;
  r.seed = seed;
  r.u_star = sys.u_star;
  r.x_ustar = sys.x_ustar;
  r.delta0 = sys.delta0;
  r.ch = sys.ch;
  r.log_z = m.log_z;
  r.truncation = m.truncation;
  double w2v = std::numeric_limits<double>::quiet_NaN();
  if (s.with_w2 && !s.Ks.empty()) {
    const auto sweep = solve_w2_sweep(sys, s.beta > 0 ? s.beta : 1.0, s.Ks, s.w2_tol);
    r.w2 = sweep.last();
    r.w2_stabilized = sweep.stabilized;
    r.centers = w2_centers(sys, r.w2);
    w2v = r.w2.value;
  } else {
    const double n13 = std::cbrt(static_cast<double>(n));
    r.centers = {sys.u_star * n13, (sys.ch - sys.u_star) * n13};
  }
  r.row = expansion_row(n, 0, m.log_z, s.beta, s.h, sys.x_ustar, w2v);
  r.loc = endpoint_localization(m, sys.u_star, s.eps, r.centers.x, r.centers.y, s.loc_K);
  return r;
}

namespace {

double rayleigh_cdf(double y) { return y <= 0 ? 0.0 : -std::expm1(-0.5 * y * y); }

NamedValue le(std::string name, double v, double thr) { return {std::move(name), v, thr, "<=", v <= thr}; }
NamedValue ge(std::string name, double v, double thr) { return {std::move(name), v, thr, ">=", v >= thr}; }

ProcessPath on_grid(const ProcessPath& m, const std::vector<double>& grid) {
  ProcessPath q;
  q.kind = PathKind::meander;
  q.duration = 1.0;
  q.times = grid;
  for (double t : grid) q.values.push_back(m.value_at(t));
  return q;
}

}  // namespace

ProcessCheckResult process_checks(const ProcessCheckSettings& s, unsigned threads) {
  ProcessCheckResult out;
  const Stream root(s.seed, ModuleId::stochproc, 0);

  {
    Stream st = root.split(1);
    std::vector<double> ends;
    ends.reserve(static_cast<std::size_t>(s.meander_samples));
    for (long i = 0; i < s.meander_samples; ++i) ends.push_back(sample_meander({0.0, 1.0}, 1.0, st).values.back());
    out.toolkit.push_back(le("meander_endpoint_rayleigh_ks", ks_statistic(ends, rayleigh_cdf), 0.02));
  }
  {
    Stream st = root.split(2);
    const std::vector<double> grid{0.0, 0.5, 1.0};
    std::vector<double> a, b;
    for (long i = 0; i < s.compare_samples; ++i) {
      a.push_back(sample_meander(grid, 1.0, st).values[1]);
      const double U = st.uniform();
      b.push_back(meander_from_excursion(sample_excursion(meander_excursion_grid(grid, U), st), U).value_at(0.5));
    }
    out.toolkit.push_back(ge("kernel_vs_excursion_meander_ks_p", ks_two_sample(a, b).p_value, 0.01));
  }
  {
    Stream st = root.split(3);
    const std::vector<double> grid{0.0, 0.5, 1.0};
    std::vector<double> mids;
    for (long i = 0; i < s.excursion_samples; ++i) mids.push_back(sample_excursion(grid, st).values[1]);
    out.toolkit.push_back(le("excursion_midpoint_ks", ks_statistic(mids, excursion_midpoint_cdf), 0.02));
  }
  {
    Stream st = root.split(4);
    const auto grid = uniform_grid(1.0, static_cast<std::size_t>(s.bound_grid));
    std::vector<ProcessPath> samples;
    samples.reserve(static_cast<std::size_t>(s.bound_samples));
    for (long i = 0; i < s.bound_samples; ++i) {
      const double U = st.uniform();
      samples.push_back(on_grid(meander_from_excursion(sample_excursion(meander_excursion_grid(grid, U), st), U), grid));
    }
    out.bounds = meander_bound_checks(samples);
    for (const auto& c : out.bounds.checks) {
      std::string name = "bound_" + c.name;
      for (double p : c.params) {
        char buf[24];
        std::snprintf(buf, sizeof buf, "_%g", p);
        name += buf;
      }
      out.toolkit.push_back({name, c.lhs, c.rhs, "holds", c.holds});
    }
  }

  for (const auto& [name, law, tag] : {std::tuple{"skorokhod_two_point", Law::two_point(), 5},
                                       std::tuple{"skorokhod_uniform", Law::uniform(), 6}}) {
    const auto rec = skorokhod_embed(law, static_cast<std::size_t>(s.skorokhod_samples), root.split(tag).key());
    const double rel = std::abs(mean(rec.stop_times) / law.second_moment() - 1.0);
    out.couplings.push_back(le(std::string(name) + "_rel_error", rel, 0.01));
  }
  {
    const auto grid = uniform_grid(1.0, static_cast<std::size_t>(s.coupling_steps));
    std::vector<char> ok(static_cast<std::size_t>(s.coupling_runs), 0);
    const Stream cs = root.split(7);
    parallel_for(ok.size(), threads, [&](std::size_t i) {
      Stream rs = cs.split(i);
      ok[i] = couple_bessel_excursion(grid, rs).eps > 0;
    });
    double frac = 0;
    for (char c : ok) frac += c;
    frac /= static_cast<double>(ok.size());
    out.couplings.push_back(ge("bessel_excursion_positive_eps_fraction", frac, 0.99));
  }
  return out;
}

ChernoffStudy chernoff_study(std::uint64_t seed, long replicas, double L, double fine_step, std::size_t stride,
                             double drift, unsigned threads) {
  ChernoffStudy st;
  const auto R = static_cast<std::size_t>(replicas);
  st.s_fine.assign(R, 0);
  st.s_coarse.assign(R, 0);
  st.value.assign(R, 0);
  const auto grid = uniform_grid(L, static_cast<std::size_t>(std::llround(L / fine_step)));
  parallel_for(R, threads, [&](std::size_t i) {
    Stream s(seed, ModuleId::varprob, 0x5c000000ULL + i);
    TwoSidedPath w;
    w.pos = sample_bm(grid, s);
    w.neg = sample_bm(grid, s);
    const auto fine = solve_chernoff(w, drift);
    st.s_fine[i] = fine.argmax;
    st.value[i] = fine.value;
    st.s_coarse[i] = solve_chernoff(subsample(w, stride), drift).argmax;
  });
  st.mean = mean(st.s_fine);
  st.se = std_error(st.s_fine);
  for (std::size_t i = 0; i < R; ++i) {
    st.m2_fine += st.s_fine[i] * st.s_fine[i];
    st.m2_coarse += st.s_coarse[i] * st.s_coarse[i];
  }
  st.m2_fine /= static_cast<double>(R);
  st.m2_coarse /= static_cast<double>(R);
  st.drift = std::abs(st.m2_fine / st.m2_coarse - 1.0);
  return st;
}

StableStudy stable_study(std::uint64_t master, const std::vector<long>& ns, long replicas, const Law& law, double beta,
                         double h, unsigned threads) {
  StableStudy st;
  st.ns = ns;
  std::vector<double> ln, li;
  for (long n : ns) {
    std::vector<double> v(static_cast<std::size_t>(replicas));
    const double shift = 1.5 * h * c_h(h) * std::cbrt(static_cast<double>(n));
    parallel_for(v.size(), threads, [&](std::size_t r) {
      const auto env = make_environment(law, n, h, replica_seed(master, static_cast<std::uint64_t>(n), static_cast<long>(r)));
      v[r] = endpoint_marginal(env, PolymerParams{n, beta, h}).log_z + shift;
    });
    st.iqr.push_back(iqr(v));
    ln.push_back(std::log(static_cast<double>(n)));
    li.push_back(std::log(st.iqr.back()));
    st.centred.push_back(std::move(v));
  }
  if (ns.size() >= 2) st.fit = linear_fit(ln, li);
  return st;
}

}  // namespace rpl::app
