#include <fstream>
#include <iostream>
#include <map>
#include <optional>

#include "CLI11.hpp"
#include "app.hpp"
#include "rpl/parallel.hpp"

namespace {

using namespace rpl::app;

// Flags shared by every experiment subcommand; unset flags leave the config
// file (or the built-in default) untouched.
struct ExperimentFlags {
  std::string config, out, n, K, law, oracle, chi_mode;
  std::optional<std::uint64_t> seed;
  std::optional<long> replicas, k_window, samples;
  std::optional<double> h, beta, alpha, p, q, grid_step;
  int threads = 0;

  void attach(CLI::App* app) {
    app->set_help_flag("--help", "Print this help message and exit");  // frees --h for the penalty
    app->add_option("--config", config, "JSON experiment config");
    app->add_option("--seed", seed, "Master seed (u64)");
    app->add_option("--out", out, "Output directory");
    app->add_option("--threads", threads, "Worker threads (default: RPL_THREADS, then hardware)");
    app->add_option("--n", n, "Comma-separated sizes, e.g. 1e4,1e5");
    app->add_option("--h", h, "Range penalty h > 0");
    app->add_option("--beta", beta, "Inverse temperature beta >= 0");
    app->add_option("--law", law, "auto|gaussian|two_point|uniform|stable|coupled");
    app->add_option("--alpha", alpha, "Stable index in (1,2)");
    app->add_option("--p", p, "Stable right-tail weight");
    app->add_option("--q", q, "Stable left-tail weight");
    app->add_option("--replicas", replicas, "Replicas per n");
    app->add_option("--K", K, "Comma-separated K sweep for the second-order problem");
    app->add_option("--grid-step", grid_step, "Fine grid step of the zoomed problems");
    app->add_option("--oracle", oracle, "range-law oracle: none|enumerate|dp");
    app->add_option("--chi-mode", chi_mode, "printed|unit");
    app->add_option("--k-window", k_window, "Probe half-width in lattice steps");
    app->add_option("--samples", samples, "Monte Carlo sample count (processes)");
  }

  ExperimentConfig resolve(const std::string& kind) const {
    ExperimentConfig c = config.empty() ? ExperimentConfig{} : load_config(config);
    if (!kind.empty()) {
      if (!config.empty() && !c.kind.empty() && c.kind != kind)
        throw ConfigError("config kind '" + c.kind + "' does not match subcommand '" + kind + "'");
      c.kind = kind;
    }
    if (c.kind.empty()) throw ConfigError("no experiment kind given");
    if (seed) c.seed = *seed;
    if (!out.empty()) c.out = out;
    if (!n.empty()) c.n = parse_long_list(n);
    if (h) c.h = *h;
    if (beta) c.beta = *beta;
    if (!law.empty()) c.law = law;
    if (alpha) c.alpha = *alpha;
    if (p) c.p = *p;
    if (q) c.q = *q;
    if (replicas) c.replicas = *replicas;
    if (!K.empty()) c.K = parse_double_list(K);
    if (grid_step) c.grid_step = *grid_step;
    if (!oracle.empty()) c.oracle = oracle;
    if (!chi_mode.empty()) c.chi_mode = chi_mode;
    if (k_window) c.k_window = *k_window;
    if (samples) c.samples = *samples;
    c.validate();
    return c;
  }
};

int run_kind(const ExperimentFlags& f, const std::string& kind) {
  const auto cfg = f.resolve(kind);
  const auto res = run_experiment(cfg, rpl::resolve_threads(f.threads), std::cerr);
  std::cout << "wrote " << res.artifacts.size() << " artifact(s) to " << cfg.out << '\n';
  if (!res.summary.empty()) std::cout << res.summary.dump(2) << '\n';
  return res.exit_code;
}

std::vector<int> parse_ids(const std::string& s) {
  std::vector<int> out;
  if (s.empty()) return out;
  for (long v : parse_long_list(s)) out.push_back(static_cast<int>(v));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Random-walk range polymer experiments"};
  app.require_subcommand(1);
  app.set_version_flag("--version", build_id());

  // Subcommand name -> experiment kind.
  const std::vector<std::pair<std::string, std::string>> kinds{
      {"gen-env", "gen-env"},       {"range-law", "range-law"}, {"partition", "partition"},
      {"expansion", "expansion"},   {"endpoint-law", "endpoint-law"}, {"processes", "processes"},
      {"varprob", "varprob"},       {"halfline", "halfline"},   {"probe", "local-limit-probe"},
      {"stable-exponent", "stable-exponent"}};
  std::map<std::string, ExperimentFlags> flags;
  std::map<std::string, CLI::App*> subs;
  for (const auto& [name, kind] : kinds) {
    auto* sub = app.add_subcommand(name, "Run the " + kind + " experiment");
    flags[name].attach(sub);
    subs[name] = sub;
  }

  std::string run_kind_arg;
  auto* run = app.add_subcommand("run", "Run the experiment named by KIND or by the config's kind");
  run->add_option("kind", run_kind_arg, "Experiment kind");
  flags["run"].attach(run);

  AcceptOptions acc;
  std::string acc_only;
  std::optional<std::uint64_t> acc_seed;
  auto* accept = app.add_subcommand("accept", "Evaluate the acceptance criteria");
  accept->add_option("--config", acc.overrides_path, "JSON overrides merged over config/acceptance_defaults.json");
  accept->add_option("--only", acc_only, "Comma-separated criterion ids (default: all)");
  accept->add_option("--out", acc.out, "Directory for acceptance.json");
  accept->add_option("--threads", acc.threads, "Worker threads");
  accept->add_option("--seed", acc_seed, "Master seed override");

  PlotSpec spec;
  std::string csv_path, svg_path, extra;
  auto* plot = app.add_subcommand("plot", "Render a CSV as an SVG line, scatter or histogram plot");
  plot->add_option("csv", csv_path, "Input CSV")->required();
  plot->add_option("--x", spec.x, "x column")->required();
  plot->add_option("--y", spec.y, "y column")->required();
  plot->add_option("--extra-y", extra, "Comma-separated extra y columns");
  plot->add_option("--group", spec.group, "Column splitting y into series");
  plot->add_flag("--logx", spec.logx);
  plot->add_flag("--logy", spec.logy);
  plot->add_flag("--scatter", spec.scatter);
  plot->add_flag("--histogram", spec.histogram, "Bars for y, lines for extra columns");
  plot->add_option("--title", spec.title);
  plot->add_option("--width", spec.width);
  plot->add_option("--height", spec.height);
  plot->add_option("-o,--output", svg_path, "Output SVG (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    for (const auto& [name, kind] : kinds)
      if (subs[name]->parsed()) return run_kind(flags[name], kind);
    if (run->parsed()) return run_kind(flags["run"], run_kind_arg);
    if (accept->parsed()) {
      acc.only = parse_ids(acc_only);
      if (acc_seed) {
        acc.seed_set = true;
        acc.seed = *acc_seed;
      }
      return accept_command(acc, std::cout, std::cerr);
    }
    if (plot->parsed()) {
      std::ifstream in(csv_path);
      if (!in) throw ConfigError("cannot open " + csv_path);
      if (!extra.empty()) {
        std::stringstream ss(extra);
        std::string c;
        while (std::getline(ss, c, ',')) spec.extra_y.push_back(c);
      }
      const auto svg = render_svg(read_csv(in), spec);
      if (svg_path.empty()) {
        std::cout << svg;
      } else {
        std::ofstream os(svg_path);
        os << svg;
      }
      return kExitOk;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid argument: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitConfig;
}
