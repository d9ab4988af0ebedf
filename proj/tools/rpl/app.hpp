#ifndef RPL_TOOLS_APP_HPP
#define RPL_TOOLS_APP_HPP

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

namespace rpl::app {

// Raised for anything the user can fix in a config or on the command line.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;

const std::vector<std::string>& experiment_kinds();

struct ExperimentConfig {
  std::string kind;
  std::uint64_t seed = 1;
  long replicas = 1;
  std::string out = "out";

  std::vector<long> n{1000};
  double h = 1.0;
  double beta = 1.0;
  // auto: coupled for expansion and endpoint-law, stable for stable-exponent,
  // gaussian otherwise.
  std::string law = "auto";  // auto, gaussian, two_point, uniform, stable, coupled
  double alpha = 1.5, p = 0.5, q = 0.5;
  std::vector<double> K{8, 16, 32};
  double grid_step = 1.0 / 64;
  std::string oracle = "none";  // range-law: none, enumerate, dp
  std::string chi_mode = "printed";
  long k_window = 10;
  long samples = 100000;

  nlohmann::json tolerances = nlohmann::json::object();

  void validate() const;
};

nlohmann::json to_json(const ExperimentConfig& c);
// Strict: unknown keys and wrong types raise ConfigError.
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);

// Parses "1e4,1e5,1000" into integers; rejects non-integral values.
std::vector<long> parse_long_list(const std::string& s);
std::vector<double> parse_double_list(const std::string& s);

std::string build_id();
std::string config_hash(const nlohmann::json& resolved);

// Seed handed to replica r of block `tag` (typically n).
std::uint64_t replica_seed(std::uint64_t master, std::uint64_t tag, long replica);

struct RunResult {
  int exit_code = kExitOk;
  std::vector<std::string> artifacts;
  nlohmann::json summary = nlohmann::json::object();
};

// Runs one experiment, writes its artifacts and manifest.json into
// cfg.out, and returns the exit code.
RunResult run_experiment(const ExperimentConfig& cfg, unsigned threads, std::ostream& log);

// ---------------------------------------------------------------------------
// Acceptance.

struct CriterionResult {
  int id = 0;
  std::string name;
  bool pass = false;
  bool report_only = false;
  std::string detail;
  nlohmann::json metrics = nlohmann::json::object();
  double seconds = 0;
};

// Defaults shipped in config/acceptance_defaults.json; `overrides` must only
// contain keys present there (same JSON type), else ConfigError.
nlohmann::json acceptance_defaults();
nlohmann::json merge_acceptance_config(const nlohmann::json& defaults, const nlohmann::json& overrides);

// `on_result` is called as soon as each criterion finishes.
std::vector<CriterionResult> run_acceptance(const nlohmann::json& cfg, const std::vector<int>& which, unsigned threads,
                                            std::ostream& log,
                                            const std::function<void(const CriterionResult&)>& on_result = {});
std::string format_result_line(const CriterionResult& r);

struct AcceptOptions {
  std::string overrides_path;  // JSON merged over the defaults
  std::vector<int> only;       // empty: all criteria
  std::string out;             // optional directory for acceptance.json
  int threads = 0;
  bool seed_set = false;
  std::uint64_t seed = 0;
};

// Prints one line per criterion to `out_stream`; returns the exit code.
int accept_command(const AcceptOptions& opt, std::ostream& out_stream, std::ostream& log);

// ---------------------------------------------------------------------------
// Plotting.

struct PlotSpec {
  std::string x, y;
  std::vector<std::string> extra_y;  // more series on the same axes
  std::string group;                 // optional column splitting y into series
  bool logx = false, logy = false;
  bool scatter = false;
  bool histogram = false;  // bars for y, lines for extra_y
  std::string title;
  int width = 720, height = 480;
};

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  int column(const std::string& name) const;
};

Table read_csv(std::istream& is);
std::string render_svg(const Table& t, const PlotSpec& spec);

}  // namespace rpl::app

#endif  // RPL_TOOLS_APP_HPP
