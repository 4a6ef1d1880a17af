#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "hlsga/errors.hpp"
#include "hlsga_cli/commands.hpp"
#include "hlsga_cli/config.hpp"

namespace {

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> method;
  std::optional<bool> hls;
  std::optional<std::size_t> budget;
  std::optional<std::string> init_model;
};

// Flags win over the config file.
hlsga::cli::RunConfig resolve(const Overrides& o) {
  hlsga::cli::RunConfig cfg =
      o.config.empty() ? hlsga::cli::parse_config("{}") : hlsga::cli::load_config(o.config);
  if (o.seed) cfg.seed = *o.seed;
  if (o.out) cfg.out_dir = *o.out;
  if (o.method) cfg.method = *o.method;
  if (o.hls) cfg.hls = *o.hls;
  if (o.budget) cfg.budget = *o.budget;
  if (o.init_model) cfg.init_model = *o.init_model;
  cfg.validate();
  return cfg;
}

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "JSON run configuration")->check(CLI::ExistingFile);
  cmd->add_option("--seed", o.seed, "Master seed");
  cmd->add_option("--out", o.out, "Output directory");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bilevel weight-decay fine-tuning and architecture search for small MLPs"};
  app.require_subcommand(1);

  Overrides ft;
  auto* finetune = app.add_subcommand("finetune", "Train at lambda = 0, then fine-tune (lambda, w)");
  add_common(finetune, ft);
  finetune->add_option("--init-model", ft.init_model, "Start from a saved model instead of training");

  Overrides se;
  auto* search = app.add_subcommand("search", "Micro-GA, grid or random search");
  add_common(search, se);
  search->add_option("--method", se.method, "ga | grid | random")
      ->check(CLI::IsMember({"ga", "grid", "random"}));
  bool hls_value = false;
  auto* hls_flag =
      search->add_flag("--hls{true}", hls_value, "Fine-tune every evaluated model (--hls=false to disable)");
  search->add_option("--budget", se.budget, "Models for grid / random search");

  std::uint64_t oracle_seed = 0;
  std::string oracle_config;
  auto* oracles = app.add_subcommand("oracles", "Run the analytic and LP differential checks");
  oracles->add_option("--seed", oracle_seed, "Seed for the random LP instances");
  oracles->add_option("--config", oracle_config, "Validate this run configuration first")
      ->check(CLI::ExistingFile);

  Overrides sy;
  auto* data = app.add_subcommand("data", "Dataset utilities");
  data->require_subcommand(1);
  auto* synth = data->add_subcommand("synth", "Write a separable Gaussian dataset as IDX files");
  add_common(synth, sy);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*finetune) {
      hlsga::cli::cmd_finetune(resolve(ft), std::cerr);
    } else if (*search) {
      if (hls_flag->count() > 0) se.hls = hls_value;
      hlsga::cli::cmd_search(resolve(se), std::cerr);
    } else if (*oracles) {
      if (!oracle_config.empty()) hlsga::cli::load_config(oracle_config);
      return hlsga::cli::cmd_oracles(oracle_seed, std::cout) ? 0 : 1;
    } else if (*synth) {
      hlsga::cli::cmd_data_synth(resolve(sy), std::cerr);
    }
  } catch (const hlsga::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
