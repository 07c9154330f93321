// Command-line driver: run a configured experiment, list the benchmark
// catalogue, or check a config file without solving.

#include "stiga/report.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

int cmd_list() {
  for (const auto& e : stiga::list_examples()) {
    std::cout << e.id << "  [" << e.patch << "]  " << e.description << '\n';
  }
  return 0;
}

int cmd_validate(const std::string& path) {
  const auto cfg = stiga::load_config(path);
  stiga::validate(cfg);
  std::cout << "ok: " << cfg.example << ", " << (cfg.loop.uniform ? "uniform" : "adaptive") << ", p=" << cfg.loop.p
            << ", n_ref0=" << cfg.loop.n_ref0 << ", n_ref=" << cfg.loop.n_ref << '\n';
  return 0;
}

int cmd_run(const std::string& path, const std::string& output, bool quiet) {
  auto cfg = stiga::load_config(path);
  if (!output.empty()) cfg.output_dir = output;
  const auto out = stiga::run_experiment(cfg, quiet ? nullptr : &std::cerr);
  std::cout << "wrote " << out.csv.string() << " (" << out.steps << " rows), " << out.json.string();
  if (!out.vtk.empty()) std::cout << ", " << out.vtk.size() << " vtk files";
  std::cout << '\n';
  if (out.capped) std::cerr << "stopped early: space dimension exceeds max_dofs\n";
  if (!out.error.empty()) {
    std::cerr << "error: " << out.error << '\n';
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive space-time IgA solver for the heat equation"};
  app.require_subcommand(1);

  std::string config, output;
  bool quiet = false;
  auto* run = app.add_subcommand("run", "Run the experiment described by a config file");
  run->add_option("config", config, "Flat key = value config file")->required()->check(CLI::ExistingFile);
  run->add_option("-o,--output", output, "Override the output directory");
  run->add_flag("-q,--quiet", quiet, "Do not print per-step progress");

  auto* list = app.add_subcommand("list-examples", "List the benchmark catalogue");

  std::string vconfig;
  auto* val = app.add_subcommand("validate", "Check a config file without solving");
  val->add_option("config", vconfig, "Flat key = value config file")->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run) return cmd_run(config, output, quiet);
    if (*list) return cmd_list();
    if (*val) return cmd_validate(vconfig);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
