#include "rhcbf/experiment.hpp"

#include <iostream>

#include <CLI11.hpp>

int main(int argc, char** argv) {
  CLI::App app{"Learn, verify, and deploy robust hybrid control barrier "
               "functions from expert demonstrations"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool seed_set = false;
  bool force = false;
  app.add_option("--config", config_path, "key = value experiment config file")
      ->required();
  app.add_option("--out", out_dir, "output directory (overrides config)");
  app.add_option("--seed", seed, "training seed (overrides config)")
      ->each([&](const std::string&) { seed_set = true; });
  app.add_flag("--force", force, "ignore config-hash mismatches");

  auto* collect = app.add_subcommand("collect", "collect expert demonstrations");
  auto* train = app.add_subcommand("train", "train the barrier network");
  auto* verify = app.add_subcommand("verify", "certify a trained barrier");
  auto* sweep = app.add_subcommand("sweep", "run the step-count sweep");
  auto* plot = app.add_subcommand("plot", "render sweep grids and level sets");
  auto* report = app.add_subcommand("report", "summarize existing artifacts");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    rhcbf::KeyValueConfig kv = rhcbf::KeyValueConfig::from_file(config_path);
    if (!out_dir.empty()) kv.set("out_dir", out_dir);
    if (seed_set) kv.set("train.seed", std::to_string(seed));
    const rhcbf::ExperimentConfig cfg = rhcbf::ExperimentConfig::parse(kv);

    if (collect->parsed()) return rhcbf::cmd_collect(cfg, force);
    if (train->parsed()) return rhcbf::cmd_train(cfg, force);
    if (verify->parsed()) return rhcbf::cmd_verify(cfg, force);
    if (sweep->parsed()) return rhcbf::cmd_sweep(cfg, force);
    if (plot->parsed()) return rhcbf::cmd_plot(cfg, force);
    if (report->parsed()) return rhcbf::cmd_report(cfg);
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
