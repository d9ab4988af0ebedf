#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <ostream>

#include "app.hpp"
#include "compute.hpp"
#include "rpl/parallel.hpp"
#include "rpl/rangelaw.hpp"

namespace rpl::app {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

std::string resolve_law(const ExperimentConfig& c) {
  if (c.law != "auto") return c.law;
  if (c.kind == "expansion" || c.kind == "endpoint-law") return "coupled";
  if (c.kind == "stable-exponent") return "stable";
  return "gaussian";
}

double tol(const ExperimentConfig& c, const char* key, double fallback) {
  return c.tolerances.contains(key) ? c.tolerances[key].get<double>() : fallback;
}

ChiMode chi_of(const ExperimentConfig& c) { return c.chi_mode == "unit" ? ChiMode::unit : ChiMode::printed; }

// Collects artifacts and per-replica seeds; all files are written through it.
class Run {
 public:
  Run(const ExperimentConfig& cfg, std::ostream& log) : cfg_(cfg), log_(log), dir_(cfg.out) {
    fs::create_directories(dir_);
  }

  std::ofstream open(const std::string& name, bool binary = false) {
    artifacts_.push_back(name);
    std::ofstream os(dir_ / name, binary ? std::ios::binary : std::ios::out);
    if (!os) throw std::runtime_error("cannot write " + (dir_ / name).string());
    return os;
  }

  void seed(long n, long replica, std::uint64_t s) { seeds_.push_back({{"n", n}, {"replica", replica}, {"seed", s}}); }
  std::ostream& log() { return log_; }

  RunResult finish(const json& resolved, json summary, int code) {
    RunResult r;
    r.exit_code = code;
    r.artifacts = artifacts_;
    r.artifacts.push_back("manifest.json");
    r.summary = std::move(summary);
    // The output directory does not influence any result, so it is left out
    // of the hash: the same experiment written elsewhere hashes the same.
    json hashed = resolved;
    hashed.erase("out");
    json m{{"build_id", build_id()},
           {"config", resolved},
           {"config_hash", config_hash(hashed)},
           {"seeds", seeds_},
           {"artifacts", r.artifacts},
           {"summary", r.summary},
           {"exit_code", code}};
    std::ofstream os(dir_ / "manifest.json");
    os << m.dump(2) << '\n';
    return r;
  }

 private:
  const ExperimentConfig& cfg_;
  std::ostream& log_;
  fs::path dir_;
  std::vector<std::string> artifacts_;
  json seeds_ = json::array();
};

// CSV row builder with round-trippable doubles.
struct Row {
  std::string s;
  Row& operator<<(double v) { return add(fmt(v)); }
  Row& operator<<(long v) { return add(std::to_string(v)); }
  Row& operator<<(int v) { return add(std::to_string(v)); }
  Row& operator<<(std::uint64_t v) { return add(std::to_string(v)); }
  Row& operator<<(bool v) { return add(v ? "1" : "0"); }
  Row& operator<<(const std::string& v) { return add(v); }
  Row& add(const std::string& v) {
    if (!s.empty()) s += ',';
    s += v;
    return *this;
  }
};
std::ostream& operator<<(std::ostream& os, const Row& r) { return os << r.s << '\n'; }

struct Job {
  long n;
  long replica;
  std::uint64_t seed;
};

std::vector<Job> jobs(const ExperimentConfig& c, Run& run) {
  std::vector<Job> out;
  for (long n : c.n)
    for (long r = 0; r < c.replicas; ++r) {
      out.push_back({n, r, replica_seed(c.seed, static_cast<std::uint64_t>(n), r)});
      run.seed(n, r, out.back().seed);
    }
  return out;
}

Environment environment_for(const ExperimentConfig& c, const std::string& law, long n, std::uint64_t seed) {
  if (law == "coupled") {
    CouplingOptions opt;
    opt.h = c.h;
    opt.chi_mode = chi_of(c);
    const auto sys = build_coupled_system(n, seed, opt);
    return env_from_brownian(n, sys.x1.times, sys.x1.values, sys.x2.times, sys.x2.values, seed);
  }
  return make_environment(make_law(law, c.alpha, c.p, c.q), n, c.h, seed);
}

std::string tag(long n, long r) { return "n" + std::to_string(n) + "_r" + std::to_string(r); }

// ---------------------------------------------------------------------------

int run_gen_env(const ExperimentConfig& c, const std::string& law, Run& run, json& summary, unsigned threads) {
  const auto js = jobs(c, run);
  std::vector<Environment> envs(js.size());
  parallel_for(js.size(), threads, [&](std::size_t i) { envs[i] = environment_for(c, law, js[i].n, js[i].seed); });
  for (std::size_t i = 0; i < js.size(); ++i) {
    const auto t = tag(js[i].n, js[i].replica);
    auto csv = run.open("env_" + t + ".csv");
    write_env_csv(csv, envs[i]);
    auto bin = run.open("env_" + t + ".bin", true);
    write_env_binary(bin, envs[i]);
  }
  summary["environments"] = js.size();
  return kExitOk;
}

int run_range_law(const ExperimentConfig& c, Run& run, json& summary) {
  const double enum_tol = tol(c, "enumerate_tol", 1e-12);
  const double table_tol = tol(c, "table_tol", 1e-10);
  int code = kExitOk;
  json per_n = json::array();
  for (long n : c.n) {
    if (c.oracle == "enumerate" && n > 26) throw ConfigError("--oracle enumerate needs n <= 26");
    // Full window while it stays small, tilted window beyond.
    const bool full = n <= 2000;
    const auto pol = full ? WindowPolicy::full_window() : WindowPolicy::tilted(c.h, table_tol);
    const auto tab = build_table(n, pol);
    {
      auto csv = run.open("range_law_n" + std::to_string(n) + ".csv");
      write_table_csv(csv, tab);
      auto bin = run.open("range_law_n" + std::to_string(n) + ".bin", true);
      write_table_binary(bin, tab);
    }
    json e{{"n", n},
           {"window", full ? "full" : "tilted"},
           {"t_lo", tab.t_lo},
           {"t_hi", tab.t_hi},
           {"entries", tab.size()},
           {"total_mass", tab.total_mass()},
           {"dp_rows", tab.dp_rows},
           {"truncation_error", tab.truncation_error}};
    if (c.oracle != "none") {
      double worst = 0;
      if (c.oracle == "enumerate") {
        const auto counts = enumerate_range_counts(static_cast<int>(n));
        const double total = std::ldexp(1.0, static_cast<int>(n));
        for (long x = 0; x <= n; ++x)
          for (long y = 0; y <= n; ++y) {
            const double want = static_cast<double>(counts[x][y]) / total;
            const double got = tab.contains(x, y) ? std::exp(tab.at(x, y)) : 0.0;
            worst = std::max(worst, std::abs(got - want));
          }
      } else {
        WindowPolicy dp = WindowPolicy::full_window();
        dp.mode = TableMode::exact_dp;
        if (!full) throw ConfigError("--oracle dp needs n <= 2000");
        const auto ref = build_table(n, dp);
        for (long x = 0; x <= n; ++x)
          for (long y = 0; y <= n; ++y) {
            const double want = ref.contains(x, y) ? std::exp(ref.at(x, y)) : 0.0;
            const double got = tab.contains(x, y) ? std::exp(tab.at(x, y)) : 0.0;
            worst = std::max(worst, std::abs(got - want));
          }
      }
      const double limit = c.oracle == "enumerate" ? enum_tol : table_tol;
      e["oracle"] = c.oracle;
      e["max_abs_error"] = worst;
      e["oracle_pass"] = worst <= limit;
      if (worst > limit) {
        code = kExitFailure;
        run.log() << "range-law n=" << n << ": oracle " << c.oracle << " mismatch " << worst << " > " << limit << '\n';
      }
    }
    per_n.push_back(e);
  }
  summary["tables"] = per_n;
  return code;
}

int run_partition(const ExperimentConfig& c, const std::string& law, Run& run, json& summary, unsigned threads) {
  const auto js = jobs(c, run);
  std::vector<EndpointMarginal> ms(js.size());
  parallel_for(js.size(), threads, [&](std::size_t i) {
    ms[i] = endpoint_marginal(environment_for(c, law, js[i].n, js[i].seed), PolymerParams{js[i].n, c.beta, c.h});
  });
  auto csv = run.open("partition.csv");
  csv << "n,replica,seed,logZ,first_order,truncation\n";
  for (std::size_t i = 0; i < js.size(); ++i)
    csv << (Row{} << js[i].n << js[i].replica << js[i].seed << ms[i].log_z
                  << ms[i].log_z / std::cbrt(static_cast<double>(js[i].n)) << ms[i].truncation);
  summary["rows"] = js.size();
  summary["first_order_constant"] = first_order_constant(c.h);
  return kExitOk;
}

int run_expansion(const ExperimentConfig& c, const std::string& law, Run& run, json& summary, unsigned threads) {
  const auto js = jobs(c, run);
  std::vector<ExpansionInput> in(js.size());
  std::vector<double> trunc(js.size());
  std::vector<char> stab(js.size(), 0);
  const bool coupled = law == "coupled";
  CoupledSettings s;
  s.beta = c.beta;
  s.h = c.h;
  s.chi = chi_of(c);
  s.Ks = c.K;
  s.w2_tol = tol(c, "w2_tol", 1e-12);
  s.with_w2 = c.beta > 0;
  parallel_for(js.size(), threads, [&](std::size_t i) {
    in[i].n = js[i].n;
    in[i].replica = js[i].replica;
    if (coupled) {
      const auto r = coupled_replica(js[i].n, js[i].seed, s);
      in[i].log_z = r.log_z;
      in[i].ref_sup = r.x_ustar;
      in[i].ref_w2 = s.with_w2 ? r.w2.value : std::numeric_limits<double>::quiet_NaN();
      trunc[i] = r.truncation;
      stab[i] = r.w2_stabilized;
    } else {
      const auto m =
          endpoint_marginal(environment_for(c, law, js[i].n, js[i].seed), PolymerParams{js[i].n, c.beta, c.h});
      in[i].log_z = m.log_z;
      trunc[i] = m.truncation;
    }
  });
  const int order = coupled && c.beta > 0 ? 3 : 1;
  const auto rep = expansion_report(in, c.beta, c.h, order);
  auto csv = run.open("expansion.csv");
  write_expansion_csv(csv, rep.rows);
  summary["order"] = order;
  summary["f1_n"] = rep.f1_n;
  summary["f1_estimate"] = rep.f1_estimate;
  summary["f1_constant"] = first_order_constant(c.h);
  json eps = json::object();
  for (const auto& [n, e] : rep.eps) eps[std::to_string(n)] = e;
  summary["eps_schedule"] = eps;
  summary["max_truncation"] = *std::max_element(trunc.begin(), trunc.end());
  if (coupled && s.with_w2) {
    double f = 0;
    for (char v : stab) f += v;
    summary["w2_stabilized_fraction"] = f / static_cast<double>(stab.size());
  }
  return kExitOk;
}

int run_endpoint_law(const ExperimentConfig& c, const std::string& law, Run& run, json& summary, unsigned threads) {
  const auto js = jobs(c, run);
  std::vector<EndpointMarginal> ms(js.size());
  parallel_for(js.size(), threads, [&](std::size_t i) {
    const PolymerParams p{js[i].n, c.beta, c.h};
    ms[i] = c.beta == 0 ? endpoint_marginal(p) : endpoint_marginal(environment_for(c, law, js[i].n, js[i].seed), p);
  });
  auto sum = run.open("endpoint_summary.csv");
  sum << "n,replica,logZ,truncation,mode_x,mode_y,mean_x,mean_y,mean_t,mean_delta,sd_t\n";
  json homogeneous = json::array();
  for (std::size_t i = 0; i < js.size(); ++i) {
    const auto& m = ms[i];
    const auto t = tag(js[i].n, js[i].replica);
    {
      auto os = run.open("marginal_" + t + ".csv");
      write_marginal_csv(os, m);
    }
    const double ts = AsymptoticKernel{c.h, static_cast<double>(js[i].n)}.t_star();
    {
      // Law of the left endpoint on the scale v = x / T*, as a density.
      std::map<long, double> px;
      m.for_each([&](long x, long, double p) { px[x] += p; });
      auto os = run.open("left_endpoint_" + t + ".csv");
      os << "v,density,sine_density\n";
      for (const auto& [x, p] : px) {
        const double v = static_cast<double>(x) / ts;
        os << (Row{} << v << p * ts << (v >= 0 && v <= 1 ? 0.5 * std::numbers::pi * std::sin(std::numbers::pi * v) : 0.0));
      }
    }
    {
      const auto tl = m.t_law();
      auto os = run.open("range_size_" + t + ".csv");
      os << "T,prob\n";
      for (std::size_t k = 0; k < tl.size(); ++k) os << (Row{} << m.table->t_lo + static_cast<long>(k) << tl[k]);
    }
    const auto s = m.summary();
    sum << (Row{} << js[i].n << js[i].replica << m.log_z << m.truncation << s.mode_x << s.mode_y << s.mean_x << s.mean_y
                  << s.mean_t << s.mean_delta << s.sd_t);
    if (c.beta == 0 && js[i].replica == 0) {
      const auto h = homogeneous_fluctuations(js[i].n, c.h);
      homogeneous.push_back({{"n", h.n},
                             {"t_star", h.t_star},
                             {"a_n", h.a_n},
                             {"tv_sine", h.tv_sine},
                             {"ks_normal", h.ks_normal},
                             {"ks_recentered", h.ks_recentered},
                             {"mean_delta", h.mean_delta},
                             {"sd_delta", h.sd_delta},
                             {"truncation", h.truncation}});
    }
  }
  if (!homogeneous.empty()) summary["homogeneous"] = homogeneous;
  summary["marginals"] = js.size();
  return kExitOk;
}

int run_processes(const ExperimentConfig& c, Run& run, json& summary, unsigned threads) {
  ProcessCheckSettings s;
  s.seed = c.seed;
  s.meander_samples = c.samples;
  s.excursion_samples = c.samples;
  s.compare_samples = std::max<long>(100, c.samples / 5);
  s.bound_samples = std::max<long>(100, c.samples / 5);
  s.skorokhod_samples = 10 * c.samples;
  s.coupling_runs = std::max<long>(10, c.samples / 10);
  run.seed(0, 0, c.seed);
  const auto res = process_checks(s, threads);
  auto os = run.open("processes.csv");
  os << "group,check,value,threshold,relation,pass\n";
  int failed = 0;
  for (const auto* group : {&res.toolkit, &res.couplings})
    for (const auto& v : *group) {
      os << (Row{} << std::string(group == &res.toolkit ? "toolkit" : "coupling") << v.name << v.value << v.threshold
                   << v.relation << v.pass);
      failed += !v.pass;
    }
  auto bs = run.open("bounds.csv");
  bs << "check,params,lhs,lhs_se,rhs,rhs_se,holds\n";
  for (const auto& b : res.bounds.checks) {
    std::string params;
    for (double p : b.params) params += (params.empty() ? "" : " ") + fmt(p);
    bs << (Row{} << b.name << params << b.lhs << b.lhs_se << b.rhs << b.rhs_se << b.holds);
  }
  summary["checks_failed"] = failed;
  return kExitOk;
}

int run_varprob(const ExperimentConfig& c, Run& run, json& summary, unsigned threads) {
  const auto js = jobs(c, run);
  struct Out {
    CoupledLimitSystem sys;
    W2Sweep sweep;
  };
  std::vector<Out> outs(js.size());
  CouplingOptions opt;
  opt.h = c.h;
  opt.chi_mode = chi_of(c);
  opt.k_max = std::max(opt.k_max, *std::max_element(c.K.begin(), c.K.end()));
  const double beta = c.beta > 0 ? c.beta : 1.0;
  parallel_for(js.size(), threads, [&](std::size_t i) {
    outs[i].sys = build_coupled_system(js[i].n, js[i].seed, opt);
    outs[i].sweep = solve_w2_sweep(outs[i].sys, beta, c.K, tol(c, "w2_tol", 1e-12), c.grid_step);
  });
  auto csv = run.open("varprob.csv");
  csv << "n,replica,u_star,x_ustar,delta0,K,w2,U,V,at_boundary,stabilized\n";
  auto jl = run.open("solutions.jsonl");
  long positive = 0, stabilized = 0;
  for (std::size_t i = 0; i < js.size(); ++i) {
    const auto& o = outs[i];
    const auto& w = o.sweep.last();
    csv << (Row{} << js[i].n << js[i].replica << o.sys.u_star << o.sys.x_ustar << o.sys.delta0 << w.window << w.value
                  << w.argmax << w.argmax2 << w.at_boundary << o.sweep.stabilized);
    for (std::size_t k = 0; k < o.sweep.solutions.size(); ++k)
      jl << json{{"n", js[i].n}, {"replica", js[i].replica}, {"K", o.sweep.K[k]}, {"w2", to_json(o.sweep.solutions[k])}}.dump()
         << '\n';
    positive += w.value > 0;
    stabilized += o.sweep.stabilized;
  }
  const auto cs = chernoff_study(c.seed, c.replicas, 5.0, 1e-4, 10, chernoff_drift(beta, c.h), threads);
  auto ch = run.open("chernoff.csv");
  ch << "replica,s_fine,s_coarse,value\n";
  for (std::size_t r = 0; r < cs.s_fine.size(); ++r)
    ch << (Row{} << static_cast<long>(r) << cs.s_fine[r] << cs.s_coarse[r] << cs.value[r]);
  const auto nsys = static_cast<double>(js.size());
  summary["w2_positive_fraction"] = positive / nsys;
  summary["w2_stabilized_fraction"] = stabilized / nsys;
  summary["chernoff"] = {{"mean", cs.mean}, {"se", cs.se}, {"m2_fine", cs.m2_fine}, {"m2_coarse", cs.m2_coarse},
                         {"drift", cs.drift}};
  return kExitOk;
}

int run_halfline(const ExperimentConfig& c, Run& run, json& summary, unsigned threads) {
  const auto js = jobs(c, run);
  struct Out {
    double log_z, third, x_ch, trunc;
  };
  std::vector<Out> outs(js.size());
  parallel_for(js.size(), threads, [&](std::size_t i) {
    const auto sys = build_halfline_system(js[i].n, js[i].seed, c.h);
    const auto m = halfline_marginal(halfline_environment(sys), PolymerParams{js[i].n, c.beta, c.h});
    outs[i] = {m.log_z, c.beta > 0 ? halfline_third_order(sys, c.beta, m.log_z) : std::nan(""), sys.x_ch, m.truncation};
  });
  auto csv = run.open("halfline.csv");
  csv << "n,replica,logZ,first_order,third_order,x_ch,truncation\n";
  for (std::size_t i = 0; i < js.size(); ++i)
    csv << (Row{} << js[i].n << js[i].replica << outs[i].log_z << outs[i].log_z / std::cbrt(static_cast<double>(js[i].n))
                  << outs[i].third << outs[i].x_ch << outs[i].trunc);
  summary["rows"] = js.size();
  return kExitOk;
}

int run_probe(const ExperimentConfig& c, Run& run, json& summary, unsigned threads) {
  const auto js = jobs(c, run);
  std::vector<LocalLimitProbe> pr(js.size());
  parallel_for(js.size(), threads, [&](std::size_t i) {
    pr[i] = local_limit_probe(build_halfline_system(js[i].n, js[i].seed, c.h), c.beta, c.k_window);
  });
  auto rows = run.open("probe.csv");
  rows << "n,replica,k,T,s,log_pmf,predicted\n";
  auto sum = run.open("probe_summary.csv");
  sum << "n,replica,s_star,chernoff_value,theta,correlation,window_mass,truncation\n";
  std::map<long, std::vector<double>> corr;
  for (std::size_t i = 0; i < js.size(); ++i) {
    for (const auto& r : pr[i].rows)
      rows << (Row{} << js[i].n << js[i].replica << r.k << r.T << r.s << r.log_pmf << r.predicted);
    sum << (Row{} << js[i].n << js[i].replica << pr[i].s_star << pr[i].chernoff_value << pr[i].theta
                  << pr[i].correlation << pr[i].window_mass << pr[i].truncation);
    if (std::isfinite(pr[i].correlation)) corr[js[i].n].push_back(pr[i].correlation);
  }
  json med = json::object();
  for (auto& [n, v] : corr) med[std::to_string(n)] = median(v);
  summary["median_correlation"] = med;
  return kExitOk;
}

int run_stable(const ExperimentConfig& c, const std::string& law, Run& run, json& summary, unsigned threads) {
  for (long n : c.n)
    for (long r = 0; r < c.replicas; ++r) run.seed(n, r, replica_seed(c.seed, static_cast<std::uint64_t>(n), r));
  const auto st = stable_study(c.seed, c.n, c.replicas, make_law(law, c.alpha, c.p, c.q), c.beta, c.h, threads);
  auto csv = run.open("stable.csv");
  csv << "n,replica,centred_logZ\n";
  for (std::size_t k = 0; k < st.ns.size(); ++k)
    for (std::size_t r = 0; r < st.centred[k].size(); ++r)
      csv << (Row{} << st.ns[k] << static_cast<long>(r) << st.centred[k][r]);
  auto fit = run.open("stable_fit.csv");
  fit << "n,iqr\n";
  for (std::size_t k = 0; k < st.ns.size(); ++k) fit << (Row{} << st.ns[k] << st.iqr[k]);
  summary["slope"] = st.fit.slope;
  summary["slope_se"] = st.fit.slope_se;
  summary["slope_ci"] = {st.fit.ci_low, st.fit.ci_high};
  if (law == "stable") summary["predicted_slope"] = 1.0 / (3.0 * c.alpha);
  return kExitOk;
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& cfg_in, unsigned threads, std::ostream& log) {
  cfg_in.validate();
  ExperimentConfig cfg = cfg_in;
  cfg.law = resolve_law(cfg_in);
  if (cfg.law == "coupled" && cfg.kind != "gen-env" && cfg.kind != "partition" && cfg.kind != "expansion" &&
      cfg.kind != "endpoint-law")
    throw ConfigError("law 'coupled' is only meaningful for gen-env, partition, expansion and endpoint-law");
  const json resolved = to_json(cfg);
  Run run(cfg, log);
  json summary = json::object();
  int code = kExitOk;
  const auto& k = cfg.kind;
  if (k == "gen-env") code = run_gen_env(cfg, cfg.law, run, summary, threads);
  else if (k == "range-law") code = run_range_law(cfg, run, summary);
  else if (k == "partition") code = run_partition(cfg, cfg.law, run, summary, threads);
  else if (k == "expansion") code = run_expansion(cfg, cfg.law, run, summary, threads);
  else if (k == "endpoint-law") code = run_endpoint_law(cfg, cfg.law, run, summary, threads);
  else if (k == "processes") code = run_processes(cfg, run, summary, threads);
  else if (k == "varprob") code = run_varprob(cfg, run, summary, threads);
  else if (k == "halfline") code = run_halfline(cfg, run, summary, threads);
  else if (k == "local-limit-probe") code = run_probe(cfg, run, summary, threads);
  else if (k == "stable-exponent") code = run_stable(cfg, cfg.law, run, summary, threads);
  return run.finish(resolved, std::move(summary), code);
}

}  // namespace rpl::app
