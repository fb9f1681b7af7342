// SPDX-License-Identifier: Apache-2.0

#include <iostream>

#include "CLI11.hpp"
#include "mpt/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Multitask prompt tuning pipeline"};
  app.require_subcommand(1, 1);

  mpt::cli::CliInvocation inv;
  std::string config;
  std::string output = "out";
  std::uint64_t seed = 0;
  std::string task;

  for (const auto& name : mpt::cli::subcommands()) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("-c,--config", config, "key = value config file")->check(CLI::ExistingFile);
    sub->add_option("-o,--out", output, "output directory")->capture_default_str();
    sub->add_option("--seed", seed, "training seed (overrides config and MPT_SEED)");
    sub->add_option("--set", inv.overrides, "override a config key: key=value")
        ->type_name("KEY=VALUE");
    if (name == "adapt-target" || name == "few-shot")
      sub->add_option("--task", task, "only this target task");
  }

  CLI11_PARSE(app, argc, argv);

  CLI::App* chosen = app.get_subcommands().front();
  inv.subcommand = chosen->get_name();
  inv.output_dir = output;
  if (!config.empty()) inv.config_path = config;
  if (chosen->count("--seed")) inv.seed = seed;
  if (!task.empty()) inv.task = task;
  return mpt::cli::run(inv, std::cout, std::cerr);
}
