#ifndef RPL_TOOLS_COMPUTE_HPP
#define RPL_TOOLS_COMPUTE_HPP

// Computations shared by the experiment runner and the acceptance checks.

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "rpl/env.hpp"
#include "rpl/polymer.hpp"
#include "rpl/stochproc.hpp"
#include "rpl/varprob.hpp"

namespace rpl::app {

Law make_law(const std::string& name, double alpha, double p, double q);

// Environment on [-sites, sites] with sites = lattice_sites(n, h).
Environment make_environment(const Law& law, long n, double h, std::uint64_t seed);

struct CoupledReplica {
  long n = 0;
  std::uint64_t seed = 0;
  double u_star = 0, x_ustar = 0, delta0 = 0, ch = 0;
  double log_z = 0, truncation = 0;
  ExpansionRow row;
  VariationalSolution w2;
  bool w2_stabilized = false;
  W2Centers centers{};
  LocalizationReport loc;
};

struct CoupledSettings {
  double beta = 1.0, h = 1.0;
  ChiMode chi = ChiMode::printed;
  std::vector<double> Ks{8, 16, 32};
  double w2_tol = 1e-12;
  double eps = 0.2;
  std::vector<double> loc_K{0.5, 1, 2, 4, 8};
  bool with_w2 = true;
};

CoupledReplica coupled_replica(long n, std::uint64_t seed, const CoupledSettings& s);

struct ProcessCheckSettings {
  std::uint64_t seed = 1;
  long meander_samples = 100000;
  long compare_samples = 20000;
  long excursion_samples = 100000;
  long bound_samples = 20000;
  long bound_grid = 64;
  long skorokhod_samples = 1000000;
  long coupling_runs = 10000;
  long coupling_steps = 10000;
};

struct NamedValue {
  std::string name;
  double value = 0;
  double threshold = 0;
  std::string relation;  // "<=", ">=", "holds"
  bool pass = false;
};

struct ProcessCheckResult {
  std::vector<NamedValue> toolkit;  // meander, excursion, bounds
  std::vector<NamedValue> couplings;
  MeanderBoundReport bounds;
};

ProcessCheckResult process_checks(const ProcessCheckSettings& s, unsigned threads);

struct ChernoffStudy {
  std::vector<double> s_fine, s_coarse, value;
  double mean = 0, se = 0;
  double m2_fine = 0, m2_coarse = 0, drift = 0;
};

// Two-sided BM with step `fine_step` on [-L, L]; the coarse solution uses
// every `stride`-th point of the same path.
ChernoffStudy chernoff_study(std::uint64_t seed, long replicas, double L, double fine_step, std::size_t stride,
                             double drift, unsigned threads);

struct StableStudy {
  std::vector<long> ns;
  std::vector<std::vector<double>> centred;  // per n, per replica
  std::vector<double> iqr;
  LinearFit fit;
};

StableStudy stable_study(std::uint64_t master, const std::vector<long>& ns, long replicas, const Law& law, double beta,
                         double h, unsigned threads);

std::string fmt(double v);

}  // namespace rpl::app

#endif  // RPL_TOOLS_COMPUTE_HPP
