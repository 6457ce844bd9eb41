// covflow: simulation + exact-kernel laboratory for wide/deep residual
// networks. Subcommands run one study each and drop CSV/.dat/manifest
// artifacts into the output directory.
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "covflow/config.hpp"

namespace {

struct Flags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> workers;
  std::optional<std::string> out;
};

void add_common(CLI::App* cmd, Flags& flags) {
  cmd->add_option("--config", flags.config_path,
                  "JSON config file (flags override file values)")
      ->check(CLI::ExistingFile);
  cmd->add_option("--seed", flags.seed, "master seed (default 42)");
  cmd->add_option("--workers", flags.workers, "trial-level worker threads");
  cmd->add_option("--out", flags.out,
                  "output directory (default: $COVFLOW_OUT or .)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"neural covariance laboratory: Monte Carlo forward passes vs "
               "exact infinite-width/depth kernels"};
  app.require_subcommand(1);

  const char* studies[] = {"theory",     "simulate",   "grid",
                           "depth-rate", "width-rate", "joint"};
  Flags flags;
  for (const char* study : studies)
    add_common(app.add_subcommand(study, std::string("run the ") + study +
                                             " study"),
               flags);

  CLI11_PARSE(app, argc, argv);

  try {
    nlohmann::json j = nlohmann::json::object();
    if (!flags.config_path.empty()) {
      std::ifstream in(flags.config_path);
      if (!in)
        throw covflow::ConfigError("cannot open config file: " +
                                   flags.config_path);
      try {
        in >> j;
      } catch (const nlohmann::json::exception& e) {
        throw covflow::ConfigError("malformed config file " +
                                   flags.config_path + ": " + e.what());
      }
      if (!j.is_object())
        throw covflow::ConfigError("config root must be an object");
    }
    j["study"] = app.get_subcommands().front()->get_name();
    if (flags.seed) j["master_seed"] = *flags.seed;
    if (flags.workers) j["workers"] = *flags.workers;
    if (flags.out) j["output_dir"] = *flags.out;

    covflow::RunConfig cfg = covflow::parse_config(j);
    return covflow::run(cfg);
  } catch (const covflow::ConfigError& e) {
    std::cerr << "error: config: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: runtime: " << e.what() << "\n";
    return 1;
  }
}
