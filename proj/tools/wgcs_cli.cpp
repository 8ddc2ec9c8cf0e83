#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "wgcs/cli.hpp"

int main(int argc, char** argv) {
  using namespace wgcs;
  CLI::App app{"Conditional sampling with Wasserstein generative networks", "wgcs"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
  bool paper_scale = false;

  for (const auto& name : cli::command_names()) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "JSON config file")->required();
    sub->add_option("--seed", seed, "Override the config seed");
    sub->add_option("--out", out, "Output directory");
    if (name == "bench") sub->add_flag("--paper-scale", paper_scale, "Use the full-scale benchmark settings");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return cli::kExitConfig;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  cli::Options opts;
  try {
    opts = cli::options_from_file(config_path);
  } catch (const std::exception& e) {
    std::cerr << "wgcs " << command << ": " << e.what() << "\n";
    return cli::kExitConfig;
  }
  opts.seed = seed;
  opts.out = out;
  opts.paper_scale = paper_scale;
  return cli::run_command(command, opts, std::cerr);
}
