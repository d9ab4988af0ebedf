#include <chrono>
#include <filesystem>
#include <fstream>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <optional>
#include <ostream>

#include "acceptance_defaults_json.hpp"
#include "app.hpp"
#include "compute.hpp"
#include "rpl/parallel.hpp"
#include "rpl/rangelaw.hpp"

namespace rpl::app {

namespace {

using nlohmann::json;

bool same_kind(const json& a, const json& b) {
  if (a.is_number() && b.is_number()) return true;
  return a.type() == b.type();
}

void merge_into(json& base, const json& over, const std::string& path) {
  if (!over.is_object()) throw ConfigError(path + ": expected an object");
  for (const auto& [k, v] : over.items()) {
    const std::string where = path.empty() ? k : path + "." + k;
    if (!base.contains(k)) throw ConfigError("acceptance override: unknown key '" + where + "'");
    if (!same_kind(base[k], v)) throw ConfigError("acceptance override: wrong type for '" + where + "'");
    if (v.is_object())
      merge_into(base[k], v, where);
    else
      base[k] = v;
  }
}

std::string num(double v, int prec = 4) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*g", prec, v);
  return buf;
}

std::vector<long> longs(const json& j) {
  std::vector<long> out;
  for (const auto& v : j) out.push_back(static_cast<long>(v.get<double>()));
  return out;
}

// Coupled replicas shared by criteria 4, 5 and 6.
struct CoupledBlock {
  std::vector<long> ns;
  std::vector<std::vector<CoupledReplica>> reps;  // per n
};

CoupledBlock coupled_block(const json& cfg, unsigned threads, std::ostream& log) {
  const auto& c4 = cfg["c4"];
  CoupledSettings s;
  s.beta = c4["beta"].get<double>();
  s.h = c4["h"].get<double>();
  const auto chi = c4["chi_mode"].get<std::string>();
  if (chi != "printed" && chi != "unit") throw ConfigError("c4.chi_mode must be printed|unit");
  s.chi = chi == "unit" ? ChiMode::unit : ChiMode::printed;
  s.Ks = cfg["c5"]["K"].get<std::vector<double>>();
  s.w2_tol = cfg["c5"]["w2_tol"].get<double>();
  s.eps = cfg["c6"]["eps"].get<double>();
  s.loc_K = cfg["c6"]["K"].get<std::vector<double>>();
  CoupledBlock b;
  b.ns = longs(c4["ns"]);
  const long R = static_cast<long>(c4["replicas"].get<double>());
  const auto seed = cfg["seed"].get<std::uint64_t>();
  for (long n : b.ns) {
    std::vector<CoupledReplica> v(static_cast<std::size_t>(R));
    parallel_for(v.size(), threads, [&](std::size_t r) {
      v[r] = coupled_replica(n, replica_seed(seed, static_cast<std::uint64_t>(n), static_cast<long>(r)), s);
    });
    log << "  coupled replicas at n=" << n << " done\n";
    b.reps.push_back(std::move(v));
  }
  return b;
}

CriterionResult c1_exact_law(const json& c) {
  CriterionResult r{1, "exact-law-oracle"};
  const long nmax = static_cast<long>(c["n_max"].get<double>());
  const double tol = c["tol"].get<double>();
  double worst = 0;
  long entries = 0;
  for (long n = 1; n <= nmax; ++n) {
    const auto counts = enumerate_range_counts(static_cast<int>(n));
    const auto tab = build_table(n, WindowPolicy::full_window());
    const double total = std::ldexp(1.0, static_cast<int>(n));
    for (long x = 0; x <= n; ++x)
      for (long y = 0; y <= n; ++y) {
        const double want = static_cast<double>(counts[x][y]) / total;
        const double direct = std::exp(exact_range_law(n, x, y));
        const double tabled = tab.contains(x, y) ? std::exp(tab.at(x, y)) : 0.0;
        worst = std::max({worst, std::abs(direct - want), std::abs(tabled - want)});
        ++entries;
      }
  }
  r.pass = worst <= tol;
  r.metrics = {{"n_max", nmax}, {"entries", entries}, {"max_abs_error", worst}, {"tol", tol}};
  r.detail = "max |exact - enumeration| = " + num(worst) + " over " + std::to_string(entries) + " entries (n<=" +
             std::to_string(nmax) + ")";
  return r;
}

CriterionResult c2_first_order(const json& c) {
  CriterionResult r{2, "first-order"};
  const long n = static_cast<long>(c["n"].get<double>());
  const double h = c["h"].get<double>();
  const auto m = endpoint_marginal(PolymerParams{n, 0.0, h});
  const double f = m.log_z / std::cbrt(static_cast<double>(n)), f1 = first_order_constant(h);
  const double rel = c["rel_tol"].get<double>();
  r.pass = std::abs(f - f1) <= rel * std::abs(f1);
  r.metrics = {{"n", n}, {"estimate", f}, {"constant", f1}, {"truncation", m.truncation}};
  r.detail = "n^-1/3 log Z = " + num(f, 6) + " vs " + num(f1, 6) + " (tol " + num(rel * std::abs(f1)) + ")";
  return r;
}

CriterionResult c3_homogeneous(const json& c) {
  CriterionResult r{3, "homogeneous-endpoint-law"};
  const auto rep = homogeneous_fluctuations(static_cast<long>(c["n"].get<double>()), c["h"].get<double>());
  const double tv_max = c["tv_max"].get<double>(), ks_max = c["ks_max"].get<double>();
  r.pass = rep.tv_sine <= tv_max && rep.ks_normal <= ks_max;
  r.metrics = {{"n", rep.n},
               {"tv_sine", rep.tv_sine},
               {"ks_normal", rep.ks_normal},
               {"ks_recentered", rep.ks_recentered},
               {"mean_delta", rep.mean_delta},
               {"sd_over_a_n", rep.sd_delta / rep.a_n},
               {"a_n", rep.a_n},
               {"truncation", rep.truncation}};
  r.detail = "TV=" + num(rep.tv_sine) + " (<=" + num(tv_max) + ") KS=" + num(rep.ks_normal) + " (<=" + num(ks_max) +
             "); mean(T-T*)=" + num(rep.mean_delta) + ", recentred KS=" + num(rep.ks_recentered);
  return r;
}

CriterionResult c4_second_order(const json& c, const CoupledBlock& b) {
  CriterionResult r{4, "second-order"};
  std::vector<double> ln, lm;
  json med = json::array();
  bool decreasing = true;
  for (std::size_t k = 0; k < b.ns.size(); ++k) {
    std::vector<double> d;
    for (const auto& rep : b.reps[k]) d.push_back(std::abs(rep.row.residual2 - rep.x_ustar));
    const double m = median(d);
    if (!lm.empty() && !(std::log(m) < lm.back())) decreasing = false;
    ln.push_back(std::log(static_cast<double>(b.ns[k])));
    lm.push_back(std::log(m));
    med.push_back({{"n", b.ns[k]}, {"median_abs_gap", m}});
  }
  std::vector<double> res, sup;
  for (const auto& rep : b.reps.back()) {
    res.push_back(rep.row.residual2);
    sup.push_back(rep.x_ustar);
  }
  const double corr = pearson(res, sup);
  const auto fit = linear_fit(ln, lm);
  const double target = c["slope_target"].get<double>(), tol = c["slope_tol"].get<double>();
  const bool slope_ok = fit.ci_high >= target - tol && fit.ci_low <= target + tol;
  const double cmin = c["corr_min"].get<double>();
  r.pass = corr >= cmin && decreasing && slope_ok;
  r.metrics = {{"correlation", corr}, {"medians", med},     {"slope", fit.slope},
               {"slope_ci", {fit.ci_low, fit.ci_high}}, {"decreasing", decreasing}};
  r.detail = "corr=" + num(corr) + " (>=" + num(cmin) + ") medians " + (decreasing ? "decreasing" : "NOT decreasing") +
             ", slope=" + num(fit.slope) + " CI [" + num(fit.ci_low) + "," + num(fit.ci_high) + "] vs [" +
             num(target - tol) + "," + num(target + tol) + "]";
  return r;
}

CriterionResult c5_third_order(const json& c, const CoupledBlock& b) {
  CriterionResult r{5, "third-order"};
  std::vector<double> res, w2;
  double positive = 0, stabilized = 0;
  for (const auto& rep : b.reps.back()) {
    res.push_back(rep.row.residual3);
    w2.push_back(rep.w2.value);
    positive += rep.w2.value > 0;
    stabilized += rep.w2_stabilized;
  }
  const double R = static_cast<double>(res.size());
  const double corr = pearson(res, w2);
  const double cmin = c["corr_min"].get<double>(), pmin = c["w2_positive_min"].get<double>();
  r.pass = corr >= cmin && positive / R >= pmin;
  r.metrics = {{"n", b.ns.back()},
               {"correlation", corr},
               {"w2_positive_fraction", positive / R},
               {"w2_stabilized_fraction", stabilized / R}};
  r.detail = "corr(residual3, W2)=" + num(corr) + " (>=" + num(cmin) + "), W2>0 in " + num(100 * positive / R) +
             "% (>=" + num(100 * pmin) + "%), K-stabilized " + num(100 * stabilized / R) + "%";
  return r;
}

CriterionResult c6_localization(const json& c, const CoupledBlock& b) {
  CriterionResult r{6, "endpoint-localization"};
  const double mmin = c["mass_min"].get<double>(), fmin = c["fraction_min"].get<double>();
  double good = 0, monotone = 0;
  std::vector<double> masses;
  for (const auto& rep : b.reps.back()) {
    masses.push_back(rep.loc.first_order_mass);
    good += rep.loc.first_order_mass >= mmin;
    monotone += rep.loc.monotone;
  }
  const double R = static_cast<double>(masses.size());
  r.pass = good / R >= fmin && monotone == R;
  r.metrics = {{"n", b.ns.back()},
               {"fraction_above", good / R},
               {"median_mass", median(masses)},
               {"monotone_fraction", monotone / R}};
  r.detail = "mass>=" + num(mmin) + " in " + num(100 * good / R) + "% of replicas (>=" + num(100 * fmin) +
             "%), median mass " + num(median(masses)) + ", K-monotone in " + num(100 * monotone / R) + "%";
  return r;
}

// Re-evaluates a process check against the configured thresholds.
bool recheck(NamedValue& v, const json& c7, const json& c8) {
  if (v.relation == "holds") return v.pass;
  if (v.name.rfind("skorokhod", 0) == 0) v.threshold = c8["rel_tol"].get<double>();
  else if (v.name.rfind("bessel", 0) == 0) v.threshold = c8["positive_min"].get<double>();
  else if (v.name.find("_ks_p") != std::string::npos) v.threshold = c7["p_min"].get<double>();
  else v.threshold = c7["ks_max"].get<double>();
  v.pass = v.relation == "<=" ? v.value <= v.threshold : v.value >= v.threshold;
  return v.pass;
}

CriterionResult from_checks(int id, const char* name, std::vector<NamedValue> checks, const json& c7, const json& c8) {
  CriterionResult r{id, name};
  r.pass = true;
  int failed = 0;
  json arr = json::array();
  std::string head;
  for (auto& v : checks) {
    const bool ok = recheck(v, c7, c8);
    r.pass = r.pass && ok;
    failed += !ok;
    arr.push_back({{"name", v.name}, {"value", v.value}, {"threshold", v.threshold}, {"relation", v.relation}, {"pass", ok}});
    if (v.name.rfind("bound_", 0) != 0) head += (head.empty() ? "" : ", ") + v.name + "=" + num(v.value);
  }
  r.metrics = {{"checks", arr}, {"failed", failed}};
  r.detail = head + "; " + std::to_string(checks.size() - failed) + "/" + std::to_string(checks.size()) + " checks hold";
  return r;
}

CriterionResult c9_stable(const json& c, std::uint64_t seed, unsigned threads) {
  CriterionResult r{9, "stable-scaling"};
  const double alpha = c["alpha"].get<double>();
  const auto st = stable_study(seed, longs(c["ns"]), static_cast<long>(c["replicas"].get<double>()),
                               Law::stable(alpha, c["p"].get<double>(), c["q"].get<double>()), c["beta"].get<double>(),
                               c["h"].get<double>(), threads);
  const double target = 1.0 / (3.0 * alpha), tol = c["slope_tol"].get<double>();
  r.pass = std::abs(st.fit.slope - target) <= tol;
  r.metrics = {{"slope", st.fit.slope}, {"slope_ci", {st.fit.ci_low, st.fit.ci_high}}, {"target", target}, {"iqr", st.iqr}};
  r.detail = "slope=" + num(st.fit.slope) + " vs " + num(target) + " +- " + num(tol);
  return r;
}

CriterionResult c10_chernoff(const json& c, std::uint64_t seed, unsigned threads) {
  CriterionResult r{10, "chernoff-argmax"};
  const auto st = chernoff_study(seed, static_cast<long>(c["replicas"].get<double>()), c["window"].get<double>(),
                                 c["fine_step"].get<double>(), static_cast<std::size_t>(c["stride"].get<double>()),
                                 chernoff_drift(c["beta"].get<double>(), c["h"].get<double>()), threads);
  const double k = c["se_multiple"].get<double>(), dmax = c["drift_max"].get<double>();
  r.pass = std::abs(st.mean) <= k * st.se && st.drift < dmax;
  r.metrics = {{"mean", st.mean}, {"se", st.se}, {"m2_fine", st.m2_fine}, {"m2_coarse", st.m2_coarse}, {"drift", st.drift}};
  r.detail = "mean s*=" + num(st.mean) + " (" + num(std::abs(st.mean) / st.se, 3) + " SE), E[s*^2] " + num(st.m2_fine) +
             " fine vs " + num(st.m2_coarse) + " coarse, drift " + num(100 * st.drift, 3) + "%";
  return r;
}

CriterionResult c11_probe(const json& c, std::uint64_t seed, unsigned threads) {
  CriterionResult r{11, "local-limit-probe"};
  r.report_only = true;
  const long R = static_cast<long>(c["replicas"].get<double>());
  const double beta = c["beta"].get<double>(), h = c["h"].get<double>();
  const long kw = static_cast<long>(c["k_window"].get<double>());
  json per = json::array();
  std::string d;
  for (long n : longs(c["ns"])) {
    std::vector<double> corr(static_cast<std::size_t>(R)), mass(corr.size());
    parallel_for(corr.size(), threads, [&](std::size_t i) {
      const auto sys = build_halfline_system(n, replica_seed(seed, static_cast<std::uint64_t>(n), static_cast<long>(i)), h);
      const auto p = local_limit_probe(sys, beta, kw);
      corr[i] = p.correlation;
      mass[i] = p.window_mass;
    });
    std::erase_if(corr, [](double v) { return !std::isfinite(v); });
    const double mc = corr.empty() ? std::nan("") : median(corr);
    per.push_back({{"n", n}, {"median_correlation", mc}, {"median_window_mass", median(mass)}, {"replicas", R}});
    d += (d.empty() ? "" : ", ") + std::string("n=") + num(static_cast<double>(n), 3) + " corr " + num(mc, 3);
  }
  r.pass = true;
  r.metrics = {{"per_n", per}};
  r.detail = "median correlation of log pmf with drifted-BM prediction: " + d;
  return r;
}

}  // namespace

json acceptance_defaults() { return json::parse(kAcceptanceDefaultsJson); }

json merge_acceptance_config(const json& defaults, const json& overrides) {
  json out = defaults;
  if (overrides.is_null()) return out;
  merge_into(out, overrides, "");
  return out;
}

std::vector<CriterionResult> run_acceptance(const json& cfg, const std::vector<int>& which, unsigned threads,
                                            std::ostream& log,
                                            const std::function<void(const CriterionResult&)>& on_result) {
  for (int id : which)
    if (id < 1 || id > 11) throw ConfigError("criterion ids are 1..11");
  const auto seed = cfg["seed"].get<std::uint64_t>();
  auto wants = [&](int id) { return which.empty() || std::find(which.begin(), which.end(), id) != which.end(); };
  std::optional<CoupledBlock> block;
  std::optional<ProcessCheckResult> procs;
  auto coupled = [&]() -> const CoupledBlock& {
    if (!block) block = coupled_block(cfg, threads, log);
    return *block;
  };
  auto processes = [&]() -> const ProcessCheckResult& {
    if (!procs) {
      ProcessCheckSettings s;
      s.seed = seed;
      const auto &c7 = cfg["c7"], &c8 = cfg["c8"];
      s.meander_samples = static_cast<long>(c7["meander_samples"].get<double>());
      s.compare_samples = static_cast<long>(c7["compare_samples"].get<double>());
      s.excursion_samples = static_cast<long>(c7["excursion_samples"].get<double>());
      s.bound_samples = static_cast<long>(c7["bound_samples"].get<double>());
      s.bound_grid = static_cast<long>(c7["bound_grid"].get<double>());
      s.skorokhod_samples = static_cast<long>(c8["skorokhod_samples"].get<double>());
      s.coupling_runs = static_cast<long>(c8["coupling_runs"].get<double>());
      s.coupling_steps = static_cast<long>(c8["coupling_steps"].get<double>());
      procs = process_checks(s, threads);
    }
    return *procs;
  };

  const std::map<int, std::function<CriterionResult()>> table{
      {1, [&] { return c1_exact_law(cfg["c1"]); }},
      {2, [&] { return c2_first_order(cfg["c2"]); }},
      {3, [&] { return c3_homogeneous(cfg["c3"]); }},
      {4, [&] { return c4_second_order(cfg["c4"], coupled()); }},
      {5, [&] { return c5_third_order(cfg["c5"], coupled()); }},
      {6, [&] { return c6_localization(cfg["c6"], coupled()); }},
      {7, [&] { return from_checks(7, "process-toolkit", processes().toolkit, cfg["c7"], cfg["c8"]); }},
      {8, [&] { return from_checks(8, "couplings", processes().couplings, cfg["c7"], cfg["c8"]); }},
      {9, [&] { return c9_stable(cfg["c9"], seed, threads); }},
      {10, [&] { return c10_chernoff(cfg["c10"], seed, threads); }},
      {11, [&] { return c11_probe(cfg["c11"], seed, threads); }},
  };
  std::vector<CriterionResult> out;
  for (const auto& [id, fn] : table) {
    if (!wants(id)) continue;
    log << "running criterion " << id << '\n';
    const auto t0 = std::chrono::steady_clock::now();
    auto r = fn();
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (on_result) on_result(r);
    out.push_back(std::move(r));
  }
  return out;
}

int accept_command(const AcceptOptions& opt, std::ostream& out_stream, std::ostream& log) {
  json cfg = acceptance_defaults();
  if (!opt.overrides_path.empty()) {
    std::ifstream in(opt.overrides_path);
    if (!in) throw ConfigError("cannot open " + opt.overrides_path);
    json over;
    try {
      over = json::parse(in);
    } catch (const json::parse_error& e) {
      throw ConfigError(std::string("acceptance overrides are not valid JSON: ") + e.what());
    }
    cfg = merge_acceptance_config(cfg, over);
  }
  if (opt.seed_set) cfg["seed"] = opt.seed;
  const auto results = run_acceptance(cfg, opt.only, resolve_threads(opt.threads), log,
                                      [&](const CriterionResult& r) { out_stream << format_result_line(r) << std::endl; });
  bool ok = true;
  json report{{"build_id", build_id()}, {"config", cfg}, {"config_hash", config_hash(cfg)}, {"criteria", json::array()}};
  for (const auto& r : results) {
    ok = ok && (r.pass || r.report_only);
    report["criteria"].push_back({{"id", r.id},
                                  {"name", r.name},
                                  {"pass", r.pass},
                                  {"report_only", r.report_only},
                                  {"detail", r.detail},
                                  {"metrics", r.metrics}});
  }
  if (!opt.out.empty()) {
    std::filesystem::create_directories(opt.out);
    std::ofstream os(std::filesystem::path(opt.out) / "acceptance.json");
    os << report.dump(2) << '\n';
  }
  return ok ? kExitOk : kExitFailure;
}

std::string format_result_line(const CriterionResult& r) {
  char secs[32];
  std::snprintf(secs, sizeof secs, "%.1fs", r.seconds);
  return std::string(r.pass ? "PASS" : "FAIL") + " C" + std::to_string(r.id) + " " + r.name +
         (r.report_only ? " [report-only]" : "") + ": " + r.detail + " (" + secs + ")";
}

}  // namespace rpl::app
