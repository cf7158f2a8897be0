// fraclap <subcommand> --config <path> [--out <dir>] [--seed <u64>]
//
// Exit codes: 0 success, 2 config error, 3 numerical failure, 4 output
// directory not writable, 1 anything else.

#include "fraclap.h"

#include "CLI11.hpp"

#include <cstdio>
#include <optional>
#include <string>
#include <vector>

namespace {

struct Options {
  std::string config;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::vector<std::uint64_t> sizes;
  std::optional<std::string> algo;
  bool adam_standard = false;
  std::optional<double> T;
  bool min_time = false;
};

int report(fraclap_status status) {
  std::fprintf(stderr, "fraclap: %s: %s\n", fraclap_status_string(status), fraclap_last_error());
  return static_cast<int>(status);
}

int run_experiment(const std::string& subcommand, const Options& o) {
  fraclap_run* run = nullptr;
  fraclap_status st = fraclap_run_create(subcommand.c_str(), o.config.c_str(), &run);
  if (st != FRACLAP_OK) return report(st);

  auto apply = [&](fraclap_status s) {
    if (st == FRACLAP_OK) st = s;
  };
  if (o.seed) apply(fraclap_run_set_seed(run, *o.seed));
  if (o.out) apply(fraclap_run_set_output_dir(run, o.out->c_str()));
  if (!o.sizes.empty()) apply(fraclap_run_set_sizes(run, o.sizes.data(), o.sizes.size()));
  if (o.algo) apply(fraclap_run_set_algorithm(run, o.algo->c_str()));
  if (o.adam_standard) apply(fraclap_run_set_adam_standard(run, 1));
  if (o.T) apply(fraclap_run_set_horizon(run, *o.T));
  if (o.min_time) apply(fraclap_run_set_min_time(run, 1));
  if (st == FRACLAP_OK) st = fraclap_run_execute(run);
  if (st != FRACLAP_OK) {
    fraclap_run_destroy(run);
    return report(st);
  }

  const char* dir = fraclap_run_output_dir(run);
  for (std::size_t i = 0; i < fraclap_run_file_count(run); ++i) {
    std::printf("%s/%s\n", dir, fraclap_run_file_name(run, i));
  }
  fraclap_run_destroy(run);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Finite-element control experiments for fractional heat equations"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(fraclap_build_id()));

  Options o;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "experiment config (JSON)")->required();
    sub->add_option("--out", o.out, "output directory, overrides the config");
    sub->add_option("--seed", o.seed, "random seed, overrides the config");
  };

  std::vector<CLI::App*> experiments;
  for (const char* name : {"elliptic-convergence", "interior-control", "exterior-control"}) {
    experiments.push_back(app.add_subcommand(name));
  }
  CLI::App* constrained = app.add_subcommand("constrained", "nonnegative control to trajectories");
  constrained->add_option("--T", o.T, "single horizon; turns the minimal-time search off unless --min-time");
  constrained->add_flag("--min-time", o.min_time, "bisection for the minimal controllability time");
  experiments.push_back(constrained);

  CLI::App* simultaneous = app.add_subcommand("simultaneous", "one control for a family of orders s");
  simultaneous->add_option("--sizes", o.sizes, "family sizes |K|")->delimiter(',');
  simultaneous->add_option("--algo", o.algo, "gd, cg, sgd or all")
      ->check(CLI::IsMember({"gd", "cg", "sgd", "all"}));
  simultaneous->add_flag("--adam-standard", o.adam_standard, "textbook Adam moments and bias corrections");
  experiments.push_back(simultaneous);
  for (CLI::App* sub : experiments) common(sub);

  std::string defaults_dir = "configs";
  CLI::App* defaults = app.add_subcommand("defaults", "write the five bundled experiment configs");
  defaults->add_option("--out", defaults_dir, "target directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(FRACLAP_ERROR_CONFIG);
  }

  if (defaults->parsed()) {
    const fraclap_status st = fraclap_write_defaults(defaults_dir.c_str());
    if (st != FRACLAP_OK) return report(st);
    for (const char* name : {"elliptic", "interior", "exterior", "constrained", "simultaneous"}) {
      std::printf("%s/%s.json\n", defaults_dir.c_str(), name);
    }
    return 0;
  }
  for (CLI::App* sub : experiments) {
    if (sub->parsed()) return run_experiment(sub->get_name(), o);
  }
  return 1;
}
