// Command-line driver. Every subcommand takes --config, --seed and --out.
#include <iostream>

#include "CLI11.hpp"
#include "sdfo/app/campaign.hpp"
#include "sdfo/error.hpp"

namespace {

using Command = sdfo::app::json (*)(const sdfo::app::RunConfig&, const sdfo::app::fs::path&);

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Surrogate-based design and black-box optimisation"};
  app.require_subcommand(1);
  const std::vector<std::pair<std::string, std::pair<std::string, Command>>> commands{
      {"sample", {"Evaluate a static design for every configuration", sdfo::app::cmd_sample}},
      {"fit", {"Fit GPR and classifier surrogates to sampled data", sdfo::app::cmd_fit}},
      {"optimize", {"Adaptive surrogate-based optimisation of a black box", sdfo::app::cmd_optimize}},
      {"superstructure", {"Choose the best configuration and inputs", sdfo::app::cmd_superstructure}},
      {"pareto", {"Epsilon-constraint sweep between two objectives", sdfo::app::cmd_pareto}},
      {"stochastic", {"Expected-value design over input scenarios", sdfo::app::cmd_stochastic}},
      {"surface", {"Write surrogate predictions on a grid", sdfo::app::cmd_surface}},
  };
  Flags flags;
  std::vector<std::pair<CLI::App*, Command>> subs;
  for (const auto& [name, info] : commands) {
    auto* sub = app.add_subcommand(name, info.first);
    sub->add_option("--config", flags.config, "JSON run configuration")->check(CLI::ExistingFile);
    sub->add_option("--seed", flags.seed, "Seed overriding the config");
    sub->add_option("--out", flags.out, "Output directory")->capture_default_str();
    subs.emplace_back(sub, info.second);
  }
  CLI11_PARSE(app, argc, argv);

  try {
    sdfo::app::RunConfig cfg = flags.config.empty() ? sdfo::app::RunConfig{} : sdfo::app::load_config(flags.config);
    if (flags.seed) cfg.seed = *flags.seed;
    for (const auto& [sub, fn] : subs) {
      if (!sub->parsed()) continue;
      const auto report = fn(cfg, flags.out);
      std::cout << report.dump(2) << "\n";
    }
  } catch (const sdfo::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
