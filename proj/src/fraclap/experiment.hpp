#pragma once

// Config-driven experiment pipelines. A config is a JSON tree naming one
// experiment kind and carrying one section for it; every key is checked and
// unknown keys are rejected before any computation starts. Runs build all
// outputs in memory, so a failed run leaves nothing on disk.

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace fraclap::experiment {

enum class Kind { elliptic, interior, exterior, constrained, simultaneous };

std::string_view kind_name(Kind kind);
// "elliptic-convergence", "interior-control", ...
std::string_view subcommand_name(Kind kind);
std::optional<Kind> kind_from_subcommand(std::string_view name);

// amplitude * sin(k pi x), amplitude * cos(k pi x) or the constant amplitude
struct Profile {
  std::string shape = "sin";
  double amplitude = 1.0;
  double wavenumber = 1.0;
  std::function<double(double)> function() const;
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

struct EllipticConfig {
  std::vector<double> s{0.25, 0.5, 0.75};
  double h0 = 1.0 / 32.0;
  std::size_t halvings = 4;
};

struct InteriorConfig {
  std::vector<double> s{0.2, 0.8};
  Interval domain{-1.0, 1.0};
  Interval omega{-0.3, 0.8};
  double T = 0.3;
  std::size_t M = 100;
  double h0 = 1.0 / 80.0;
  std::size_t halvings = 4;
  Profile y0{"sin", 1.0, 1.0};
  double cg_tol = 1e-8;
  std::size_t cg_max_iter = 5000;
  bool modal = true;
  bool export_trajectory = false;  // state and control on the finest mesh
};

struct RobinConsistencyConfig {
  bool enabled = true;
  double s = 0.5;
  double h = 0.1;
  std::size_t M = 50;
  std::vector<double> n{1e2, 1e4};
};

struct ExteriorConfig {
  std::vector<double> s{0.2, 0.8};
  Interval extended{-2.0, 2.0};
  Interval control{1.7, 1.9};
  double T = 0.4;
  std::size_t M = 100;
  double h0 = 0.1;
  std::size_t halvings = 4;
  Profile y0{"cos", 1.0, 0.5};
  double robin_n = 1e9;
  double kappa = 1.0;
  double cg_tol = 1e-8;
  std::size_t cg_max_iter = 20000;
  RobinConsistencyConfig consistency;
};

struct ConstrainedConfig {
  double s = 0.8;
  Interval domain{-1.0, 1.0};
  Interval omega{-0.3, 0.5};
  double h = 0.05;
  std::size_t M = 50;
  Profile y0{"sin", 1.0, 1.0};
  Profile y_hat0{"cos", 0.5, 0.5};
  double u_hat = 0.02;
  double beta = 1e-10;
  double gap_rel = 1e-3;
  std::vector<double> T{0.25, 1.0};
  bool min_time = true;
  Interval bracket{0.2, 1.2};
  double width = 0.02;
};

struct AdamConfig {
  double eta = 1e-3;
  double gamma1 = 0.9;
  double gamma2 = 0.999;
  double delta = 1e-8;
  std::size_t window = 50;
  std::size_t max_iter = 200000;
  bool standard = false;
};

struct SimultaneousConfig {
  Interval domain{-1.0, 1.0};
  Interval omega{-0.5, 0.8};
  double T = 0.4;
  std::size_t M = 50;
  double h = 0.125;
  Profile y0{"sin", 1.0, 1.0};
  Interval s_range{0.6, 0.9};
  std::vector<std::size_t> sizes{2, 10, 50, 2500};
  double beta = 0.02;
  double tol = 1e-4;
  std::vector<std::string> algorithms{"gd", "cg", "sgd"};
  std::size_t sgd_seeds = 5;
  double gd_eta = 0.0;  // 0 selects the default step
  std::size_t gd_max_iter = 100000;
  std::size_t cg_max_iter = 1000;
  AdamConfig adam;
};

using Section = std::variant<EllipticConfig, InteriorConfig, ExteriorConfig, ConstrainedConfig, SimultaneousConfig>;

struct ExperimentConfig {
  Kind kind = Kind::elliptic;
  std::uint64_t seed = 0;
  std::string output_dir = "out";
  Section section;
};

// Throw ConfigError with the offending key path.
ExperimentConfig parse_config(const nlohmann::json& tree);
ExperimentConfig parse_config_text(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);

// Complete tree with every default filled in; it parses back to the same config.
nlohmann::json to_json(const ExperimentConfig& config);

// Command-line adjustments layered over a loaded config.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> output_dir;
  std::optional<std::vector<std::size_t>> sizes;
  std::optional<std::string> algorithm;  // gd, cg, sgd or all
  std::optional<bool> adam_standard;
  std::optional<double> T;
  std::optional<bool> min_time;
};

// Throws ConfigError when an override does not apply to the config's kind.
void apply_overrides(ExperimentConfig& config, const Overrides& overrides);

std::uint64_t fnv1a64(std::string_view bytes);
// 16 hex digits of the FNV-1a hash of the canonical config dump, output_dir
// excluded
std::string config_hash(const ExperimentConfig& config);
std::string build_id();

struct OutputFile {
  std::string name;
  std::string content;
};

struct RunOutput {
  std::vector<OutputFile> files;  // CSVs first, summary.json last
  nlohmann::json summary;
};

RunOutput run(const ExperimentConfig& config);

// Writes every file or none: contents go to temporaries that are renamed
// once all of them exist.
void write_outputs(const std::filesystem::path& dir, const RunOutput& output);

// The five bundled experiment configs, named <kind>.json.
std::vector<OutputFile> bundled_defaults();

// 17 significant digits, round-trip safe.
std::string format_real(double value);

}  // namespace fraclap::experiment
