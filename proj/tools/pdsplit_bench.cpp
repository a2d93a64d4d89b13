// Benchmark and certification driver for the pdsplit library.
//
// Subcommands:
//   run          run every configured solver once, write traces/plots
//   sweep-delta  rerun fair solvers across a grid of splitting parameters
//   sweep-inn    rerun budget-mode solvers across a grid of inner budgets
//   certify      numerically audit the convergence certificates
//
// Exit codes: 0 success, 1 config/usage error, 2 solver divergence,
// 3 certificate violation.

#include <cstdio>
#include <exception>
#include <fstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "pdsplit/bench.hpp"

namespace {

pdsplit::RunSpec load_spec(const std::string& path, std::uint64_t seed_override,
                           bool have_seed) {
  std::ifstream in(path);
  if (!in) throw pdsplit::IoError("cannot open config file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw pdsplit::ConfigError("config is not valid JSON: " + std::string(e.what()));
  }
  pdsplit::RunSpec spec = pdsplit::parse_run_spec(j);
  if (have_seed) spec.experiment.seed = seed_override;
  return spec;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pdsplit benchmark driver"};
  app.require_subcommand(1);

  std::string config_path, outdir = "out";
  std::uint64_t seed_override = 0;
  bool no_plots = false, quiet = false;
  bool have_seed = false;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config file")->required();
    sub->add_option("--out", outdir, "output directory");
    sub->add_option("--seed", seed_override, "override the experiment seed")
        ->each([&](const std::string&) { have_seed = true; });
    sub->add_flag("--no-plots", no_plots, "skip SVG output");
    sub->add_flag("--quiet", quiet, "suppress per-solver progress lines");
  };

  CLI::App* c_run = app.add_subcommand("run", "run configured solvers once");
  CLI::App* c_sd = app.add_subcommand("sweep-delta", "sweep the splitting parameter");
  CLI::App* c_si = app.add_subcommand("sweep-inn", "sweep the inner iteration budget");
  CLI::App* c_ct = app.add_subcommand("certify", "audit convergence certificates");
  for (CLI::App* sub : {c_run, c_sd, c_si, c_ct}) add_common(sub);

  CLI11_PARSE(app, argc, argv);

  try {
    const pdsplit::RunSpec spec = load_spec(config_path, seed_override, have_seed);
    if (c_run->parsed()) return pdsplit::cmd_run(spec, outdir, no_plots, quiet);
    if (c_sd->parsed()) return pdsplit::cmd_sweep_delta(spec, outdir, no_plots, quiet);
    if (c_si->parsed()) return pdsplit::cmd_sweep_inn(spec, outdir, no_plots, quiet);
    if (c_ct->parsed()) return pdsplit::cmd_certify(spec, outdir, no_plots, quiet);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
