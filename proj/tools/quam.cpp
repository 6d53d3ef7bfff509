// Command-line front end: run, sweep, validate, analytic.
#include "quam/runner.hpp"
#include "quam/scenario.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

namespace {

struct Options {
  std::string scenario;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<int> seeds;
  int parallel = 1;
  std::vector<std::string> overrides;
};

quam::scenario::ScenarioConfig load(const Options& o) {
  auto doc = quam::scenario::load_json(o.scenario);
  for (const auto& ov : o.overrides) quam::scenario::apply_override(doc, ov);
  if (o.seed) doc["seed"] = *o.seed;
  if (o.seeds) doc["seeds"] = *o.seeds;
  return quam::scenario::from_json(doc);
}

void add_common(CLI::App* cmd, Options& o, bool runs) {
  cmd->add_option("--scenario", o.scenario, "scenario JSON file")->required()->check(CLI::ExistingFile);
  cmd->add_option("--override", o.overrides, "key.path=value (repeatable)");
  if (!runs) return;
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_option("--seed", o.seed, "master seed");
  cmd->add_option("--seeds", o.seeds, "number of consecutive seeds")->check(CLI::PositiveNumber);
  cmd->add_option("--parallel", o.parallel, "worker threads")->check(CLI::PositiveNumber);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"quam: quantum-secured microgrid co-simulation"};
  app.require_subcommand(1);
  Options o;
  auto* run = app.add_subcommand("run", "simulate a scenario (all of its seeds)");
  auto* sweep = app.add_subcommand("sweep", "run every cell of the scenario's sweep");
  auto* validate = app.add_subcommand("validate", "parse and validate a scenario");
  auto* analytic = app.add_subcommand("analytic", "write closed-form quantum curves");
  add_common(run, o, true);
  add_common(sweep, o, true);
  add_common(validate, o, false);
  add_common(analytic, o, true);
  CLI11_PARSE(app, argc, argv);

  namespace r = quam::runner;
  quam::scenario::ScenarioConfig cfg;
  try {
    cfg = load(o);
  } catch (const quam::scenario::ValidationError& e) {
    std::fprintf(stderr, "validation error: %s\n", e.what());
    return r::kValidationFailure;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "invalid scenario: %s\n", e.what());
    return r::kValidationFailure;
  }

  if (*validate) {
    try {
      if (cfg.sweep) std::printf("%s: ok (%zu sweep cells)\n", cfg.name.c_str(), quam::scenario::expand_sweep(cfg).size());
      else std::printf("%s: ok\n", cfg.name.c_str());
    } catch (const quam::scenario::ValidationError& e) {
      std::fprintf(stderr, "validation error: %s\n", e.what());
      return r::kValidationFailure;
    }
    return r::kOk;
  }
  const auto out = r::resolve_out_dir(o.out, cfg.name);
  if (*analytic || cfg.mode == "analytic") return r::run_analytic(cfg, out);
  if (*sweep) {
    if (!cfg.sweep) {
      std::fprintf(stderr, "scenario %s has no sweep section\n", cfg.name.c_str());
      return r::kValidationFailure;
    }
    return r::run_sweep(cfg, out, o.parallel);
  }
  return r::run_experiment(cfg, out, o.parallel);
}
