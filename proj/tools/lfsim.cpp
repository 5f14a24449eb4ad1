#include <iostream>

#include <CLI11.hpp>

#include "lf/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Leader/follower swarm experiments"};
  app.require_subcommand(1);

  lf::cli::RunOptions opts;
  std::string plots;
  std::string check;
  const char* names[] = {"simulate", "meanfield-converge", "stability", "optimize", "gamma-sweep",
                         "kinetic-sweep", "feedback-control", "certify-kernels", "validate"};
  for (const char* name : names) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", opts.config, "INI config file")->required()->check(CLI::ExistingFile);
    sub->add_option("--set", opts.overrides, "override, section.key=value (repeatable)");
    sub->add_option("--out", opts.out_dir, "output directory")->capture_default_str();
    sub->add_option("--seed", opts.seed, "overrides [initial] seed");
    sub->add_option("--plots", plots, "write SVG plots")->check(CLI::IsMember({"on", "off"}));
    sub->add_option("--check", check, "frozen CSV to compare the primary output against");
    sub->add_option("--check-rtol", opts.check_rtol)->capture_default_str();
    sub->add_option("--check-atol", opts.check_atol)->capture_default_str();
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : lf::cli::ExitCode::config_error;
  }
  opts.subcommand = *lf::cli::parse_subcommand(app.get_subcommands().front()->get_name());
  if (!plots.empty()) opts.plots = plots == "on";
  if (!check.empty()) opts.check = check;
  return lf::cli::run(opts, std::cout);
}
