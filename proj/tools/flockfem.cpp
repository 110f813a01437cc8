// flockfem command-line front end:
//   flockfem simulate|compare|converge|check --config F [--output-dir D]

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "flockfem/app.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Finite-element alignment-dynamics lab on the periodic unit interval"};
  app.require_subcommand(1);

  struct Sub {
    flockfem::Command command;
    const char* name;
    const char* help;
  };
  const Sub subs[] = {
      {flockfem::Command::Simulate, "simulate", "Run one variant and write its time series"},
      {flockfem::Command::Compare, "compare", "Run several variants on one mesh and compare"},
      {flockfem::Command::Converge, "converge", "Manufactured-solution refinement sweep"},
      {flockfem::Command::Check, "check", "Threshold, small-data and entropy-bound report"},
  };

  std::string config;
  std::string output_dir;
  std::optional<flockfem::Command> chosen;
  for (const Sub& s : subs) {
    CLI::App* sub = app.add_subcommand(s.name, s.help);
    sub->add_option("--config", config, "JSON configuration file")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--output-dir", output_dir, "Override config.output_dir");
    sub->callback([&chosen, c = s.command] { chosen = c; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : flockfem::kExitConfig;
  }

  std::optional<std::filesystem::path> dir;
  if (!output_dir.empty()) dir = output_dir;
  return flockfem::run_cli(*chosen, config, dir, std::cerr);
}
