#include <iostream>

#include "CLI11.hpp"
#include "app.hpp"

int main(int argc, char** argv) {
  using namespace rpl::app;
  CLI::App app{"Acceptance criteria 1-11; exits 1 if any non-report criterion fails"};
  AcceptOptions opt;
  std::string only;
  std::optional<std::uint64_t> seed;
  app.add_option("--config", opt.overrides_path, "JSON overrides merged over the shipped defaults");
  app.add_option("--only", only, "Comma-separated criterion ids (default: all)");
  app.add_option("--out", opt.out, "Directory for acceptance.json");
  app.add_option("--threads", opt.threads, "Worker threads (default: RPL_THREADS, then hardware)");
  app.add_option("--seed", seed, "Master seed override");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitConfig;
  }
  try {
    if (!only.empty())
      for (long v : parse_long_list(only)) opt.only.push_back(static_cast<int>(v));
    if (seed) {
      opt.seed_set = true;
      opt.seed = *seed;
    }
    return accept_command(opt, std::cout, std::cerr);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}
