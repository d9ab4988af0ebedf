#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "app.hpp"
#include "rpl/rng.hpp"

#ifndef RPL_BUILD_ID
#define RPL_BUILD_ID "unknown"
#endif

namespace rpl::app {

namespace {

using nlohmann::json;

const std::set<std::string> kTopKeys{"kind", "seed", "replicas", "out", "params", "tolerances"};
const std::set<std::string> kParamKeys{"n",       "h",         "beta",     "law",      "alpha",   "p",      "q",
                                       "K",       "grid_step", "oracle",   "chi_mode", "k_window", "samples"};
const std::set<std::string> kToleranceKeys{"enumerate_tol", "table_tol", "w2_tol"};
const std::set<std::string> kLaws{"auto", "gaussian", "two_point", "uniform", "stable", "coupled"};

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [k, v] : obj.items())
    if (!allowed.count(k)) throw ConfigError(where + ": unknown key '" + k + "'");
}

long as_long(const json& v, const std::string& key) {
  if (v.is_number_integer()) return v.get<long>();
  if (v.is_number_float()) {
    const double d = v.get<double>();
    if (std::floor(d) == d && std::abs(d) < 9.2e18) return static_cast<long>(d);
  }
  throw ConfigError(key + ": expected an integer");
}

double as_double(const json& v, const std::string& key) {
  if (!v.is_number()) throw ConfigError(key + ": expected a number");
  return v.get<double>();
}

std::string as_string(const json& v, const std::string& key) {
  if (!v.is_string()) throw ConfigError(key + ": expected a string");
  return v.get<std::string>();
}

}  // namespace

const std::vector<std::string>& experiment_kinds() {
  static const std::vector<std::string> kinds{"gen-env",    "range-law", "partition", "expansion",
                                              "endpoint-law", "processes", "varprob",   "halfline",
                                              "local-limit-probe", "stable-exponent"};
  return kinds;
}

void ExperimentConfig::validate() const {
  const auto& kinds = experiment_kinds();
  if (std::find(kinds.begin(), kinds.end(), kind) == kinds.end()) throw ConfigError("unknown experiment kind '" + kind + "'");
  if (replicas < 1) throw ConfigError("replicas must be >= 1");
  if (n.empty()) throw ConfigError("n list is empty");
  for (long v : n)
    if (v < 1) throw ConfigError("n must be >= 1");
  if (!(h > 0)) throw ConfigError("h must be > 0");
  if (!(beta >= 0)) throw ConfigError("beta must be >= 0");
  if (!kLaws.count(law)) throw ConfigError("unknown law '" + law + "'");
  if (law == "stable" && !(alpha > 1 && alpha < 2)) throw ConfigError("alpha must lie in (1,2)");
  if (oracle != "none" && oracle != "enumerate" && oracle != "dp") throw ConfigError("oracle must be none|enumerate|dp");
  if (chi_mode != "printed" && chi_mode != "unit") throw ConfigError("chi_mode must be printed|unit");
  for (double k : K)
    if (!(k > 1)) throw ConfigError("K values must be > 1");
  if (!(grid_step > 0)) throw ConfigError("grid_step must be > 0");
  if (k_window < 0) throw ConfigError("k_window must be >= 0");
  if (samples < 1) throw ConfigError("samples must be >= 1");
  reject_unknown(tolerances, kToleranceKeys, "tolerances");
  for (const auto& [k, v] : tolerances.items())
    if (!v.is_number() || !(v.get<double>() > 0)) throw ConfigError("tolerances." + k + ": expected a positive number");
}

json to_json(const ExperimentConfig& c) {
  return json{{"kind", c.kind},
              {"seed", c.seed},
              {"replicas", c.replicas},
              {"out", c.out},
              {"params",
               {{"n", c.n},
                {"h", c.h},
                {"beta", c.beta},
                {"law", c.law},
                {"alpha", c.alpha},
                {"p", c.p},
                {"q", c.q},
                {"K", c.K},
                {"grid_step", c.grid_step},
                {"oracle", c.oracle},
                {"chi_mode", c.chi_mode},
                {"k_window", c.k_window},
                {"samples", c.samples}}},
              {"tolerances", c.tolerances}};
}

ExperimentConfig config_from_json(const json& j) {
  reject_unknown(j, kTopKeys, "config");
  ExperimentConfig c;
  if (j.contains("kind")) c.kind = as_string(j["kind"], "kind");
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned() && !j["seed"].is_number_integer()) throw ConfigError("seed: expected an integer");
    c.seed = j["seed"].get<std::uint64_t>();
  }
  if (j.contains("replicas")) c.replicas = as_long(j["replicas"], "replicas");
  if (j.contains("out")) c.out = as_string(j["out"], "out");
  if (j.contains("params")) {
    const auto& p = j["params"];
    reject_unknown(p, kParamKeys, "params");
    if (p.contains("n")) {
      c.n.clear();
      if (p["n"].is_array())
        for (const auto& v : p["n"]) c.n.push_back(as_long(v, "params.n"));
      else
        c.n.push_back(as_long(p["n"], "params.n"));
    }
    if (p.contains("h")) c.h = as_double(p["h"], "params.h");
    if (p.contains("beta")) c.beta = as_double(p["beta"], "params.beta");
    if (p.contains("law")) c.law = as_string(p["law"], "params.law");
    if (p.contains("alpha")) c.alpha = as_double(p["alpha"], "params.alpha");
    if (p.contains("p")) c.p = as_double(p["p"], "params.p");
    if (p.contains("q")) c.q = as_double(p["q"], "params.q");
    if (p.contains("K")) {
      c.K.clear();
      if (!p["K"].is_array()) throw ConfigError("params.K: expected an array");
      for (const auto& v : p["K"]) c.K.push_back(as_double(v, "params.K"));
    }
    if (p.contains("grid_step")) c.grid_step = as_double(p["grid_step"], "params.grid_step");
    if (p.contains("oracle")) c.oracle = as_string(p["oracle"], "params.oracle");
    if (p.contains("chi_mode")) c.chi_mode = as_string(p["chi_mode"], "params.chi_mode");
    if (p.contains("k_window")) c.k_window = as_long(p["k_window"], "params.k_window");
    if (p.contains("samples")) c.samples = as_long(p["samples"], "params.samples");
  }
  if (j.contains("tolerances")) c.tolerances = j["tolerances"];
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return config_from_json(j);
}

std::vector<double> parse_double_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      throw ConfigError("not a number: '" + item + "'");
    }
    if (used != item.size()) throw ConfigError("not a number: '" + item + "'");
    out.push_back(v);
  }
  if (out.empty()) throw ConfigError("empty list");
  return out;
}

std::vector<long> parse_long_list(const std::string& s) {
  std::vector<long> out;
  for (double v : parse_double_list(s)) {
    if (std::floor(v) != v) throw ConfigError("not an integer: " + std::to_string(v));
    out.push_back(static_cast<long>(v));
  }
  return out;
}

std::string build_id() { return RPL_BUILD_ID; }

std::string config_hash(const json& resolved) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : resolved.dump()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::uint64_t replica_seed(std::uint64_t master, std::uint64_t tag, long replica) {
  return Stream(master, ModuleId::cli, static_cast<std::uint64_t>(replica)).split(tag).key();
}

}  // namespace rpl::app
