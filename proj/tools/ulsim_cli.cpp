// Command-line front end.
//
//   ulsim run      --config <path> --out <dir> [--runs R] [--seed S] [--fitness F2,F4] [--jobs J]
//   ulsim settling --config <path> --ta 1,3,5,7,10,15 --out <dir> [--runs R] [--seed S] [--fitness F2,F4] [--jobs J]
//   ulsim topology --config <path> --out <file> [--seed S]

#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <string>

#include <CLI11.hpp>

#include "ulsim/config.hpp"
#include "ulsim/experiment.hpp"
#include "ulsim/overlay.hpp"

namespace {

struct CommonOpts {
  std::string config;
  std::string out;
  std::optional<int> runs;
  std::optional<std::uint64_t> seed;
  std::string fitness;
  int jobs = 1;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("--config", o.config, "key=value configuration file")->required()->check(CLI::ExistingFile);
  cmd->add_option("--out", o.out, "output directory")->required();
  cmd->add_option("--runs", o.runs, "runs per variant (seeds base..base+R-1)");
  cmd->add_option("--seed", o.seed, "base seed");
  cmd->add_option("--fitness", o.fitness, "comma-separated fitness variants, e.g. F2,F4");
  cmd->add_option("--jobs", o.jobs, "worker threads")->check(CLI::PositiveNumber);
}

ulsim::ExperimentSpec make_spec(const CommonOpts& o) {
  const ulsim::FileConfig fc = ulsim::load_config(o.config);
  ulsim::ExperimentSpec spec;
  spec.scenario = fc.scenario;
  spec.variants = o.fitness.empty() ? fc.variants : ulsim::parse_variant_list(o.fitness);
  spec.runs = o.runs.value_or(fc.runs);
  spec.base_seed = o.seed.value_or(fc.scenario.seed);
  spec.out_dir = o.out;
  spec.jobs = o.jobs;
  spec.validate();
  return spec;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive peer-to-peer lookup simulator with complexity measures"};
  app.require_subcommand(1);

  CommonOpts run_opts;
  auto* run_cmd = app.add_subcommand("run", "simulate every variant over R seeds and write traces + report");
  add_common(run_cmd, run_opts);

  CommonOpts settle_opts;
  std::string ta_list = "1,3,5,7,10,15";
  auto* settle_cmd = app.add_subcommand("settling", "settling time of the global QHR versus Ta (static load)");
  add_common(settle_cmd, settle_opts);
  settle_cmd->add_option("--ta", ta_list, "comma-separated adaptation periods in seconds");

  std::string topo_config, topo_out;
  std::optional<std::uint64_t> topo_seed;
  auto* topo_cmd = app.add_subcommand("topology", "dump an initial overlay as an edge list");
  topo_cmd->add_option("--config", topo_config, "key=value configuration file")->required()->check(CLI::ExistingFile);
  topo_cmd->add_option("--out", topo_out, "edge list file")->required();
  topo_cmd->add_option("--seed", topo_seed, "seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) {
      const auto spec = make_spec(run_opts);
      ulsim::cmd_run(spec);
      std::cout << "wrote " << spec.variants.size() * static_cast<std::size_t>(spec.runs) << " traces to "
                << spec.out_dir.string() << '\n';
    } else if (*settle_cmd) {
      const auto spec = make_spec(settle_opts);
      const auto tas = ulsim::parse_number_list("ta", ta_list);
      const auto rows = ulsim::cmd_settling(spec, tas);
      ulsim::write_settling_csv(std::cout, rows);
    } else if (*topo_cmd) {
      const ulsim::FileConfig fc = ulsim::load_config(topo_config);
      std::seed_seq seq{static_cast<std::uint32_t>(topo_seed.value_or(fc.scenario.seed))};
      std::mt19937_64 rng(seq);
      const auto graph = ulsim::generate(fc.scenario.topology, rng);
      std::ofstream out(topo_out);
      if (!out) throw std::runtime_error("cannot write '" + topo_out + "'");
      graph.write_edges(out);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
