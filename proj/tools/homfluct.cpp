#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "homfluct/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Feynman-Kac and corrector experiments for random potentials"};
  app.require_subcommand(1, 1);
  app.fallthrough();
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  int workers = 0;
  app.add_option("--config", config_path, "experiment config (key = value lines)");
  app.add_option("--seed", seed, "master seed, overrides the config");
  app.add_option("--out", out_dir, "output directory, overrides the config");
  app.add_option("--workers", workers, "worker threads (default: HF_WORKERS or all cores)");
  for (const auto& [cmd, name] : homfluct::command_names()) app.add_subcommand(name, "");
  app.get_subcommand("field-sample")->description("dump V along a segment as CSV");
  app.get_subcommand("sigma2")->description("effective constant, R(0) and corrector diagnostics");
  app.get_subcommand("corrector")->description("corrector variance table over lambda");
  app.get_subcommand("simulate")->description("u_eps ensemble by Feynman-Kac Monte Carlo");
  app.get_subcommand("rates")->description("log-log fit of E|u_eps - u_hom| against eps");
  app.get_subcommand("dist-test")->description("limit-law tests (d = 3, 4, >= 5)");
  app.get_subcommand("spde-var")->description("fluctuation variance quadrature and ensemble");
  app.get_subcommand("validate")->description("exact-identity suite");
  CLI11_PARSE(app, argc, argv);

  try {
    homfluct::ExperimentConfig cfg;
    if (!config_path.empty()) {
      cfg = homfluct::parse_config(config_path);
    } else {
      homfluct::finalize_config(cfg);
    }
    cfg.command = homfluct::parse_command(app.get_subcommands().front()->get_name());
    if (seed) cfg.master_seed = *seed;
    if (out_dir) cfg.output = *out_dir;
    homfluct::RunOptions opt;
    opt.workers = homfluct::resolve_workers(workers);
    return homfluct::run(cfg, opt);
  } catch (const homfluct::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
