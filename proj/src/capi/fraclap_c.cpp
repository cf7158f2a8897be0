#include "fraclap.h"

#include "fraclap/errors.hpp"
#include "fraclap/experiment.hpp"

#include <optional>
#include <string>
#include <vector>

namespace ex = fraclap::experiment;

struct fraclap_run {
  ex::ExperimentConfig base;
  ex::Overrides overrides;
  std::optional<ex::RunOutput> output;
  std::string summary_text;
  std::string config_text;
  std::string hash;
  std::string out_dir;
};

namespace {

thread_local std::string last_error;

fraclap_status fail(fraclap_status status, std::string message) {
  last_error = std::move(message);
  return status;
}

// Maps library exceptions onto status codes.
template <class F>
fraclap_status guarded(F&& body) {
  try {
    body();
    last_error.clear();
    return FRACLAP_OK;
  } catch (const fraclap::ConfigError& e) {
    return fail(FRACLAP_ERROR_CONFIG, e.what());
  } catch (const fraclap::InvalidArgument& e) {
    return fail(FRACLAP_ERROR_CONFIG, e.module() + ": " + e.what());
  } catch (const fraclap::NumericError& e) {
    return fail(FRACLAP_ERROR_NUMERIC, e.module() + ": " + e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(FRACLAP_ERROR_IO, e.what());
  } catch (const std::exception& e) {
    return fail(FRACLAP_ERROR_INTERNAL, e.what());
  }
}

fraclap_status create(const char* subcommand, fraclap_run** out, ex::ExperimentConfig (*load)(const char*),
                      const char* source) {
  if (!subcommand || !source || !out) return fail(FRACLAP_ERROR_ARGUMENT, "null argument");
  *out = nullptr;
  return guarded([&] {
    const auto kind = ex::kind_from_subcommand(subcommand);
    if (!kind) throw fraclap::ConfigError(std::string("unknown subcommand '") + subcommand + "'");
    ex::ExperimentConfig config = load(source);
    if (config.kind != *kind) {
      throw fraclap::ConfigError("config describes a " + std::string(ex::kind_name(config.kind)) +
                                 " experiment, not " + subcommand);
    }
    *out = new fraclap_run{std::move(config), {}, std::nullopt, {}, {}, {}, {}};
  });
}

// Overrides are validated eagerly so a bad flag fails before any compute.
template <class F>
fraclap_status with_override(fraclap_run* run, F&& set) {
  if (!run) return fail(FRACLAP_ERROR_ARGUMENT, "null handle");
  return guarded([&] {
    ex::Overrides trial = run->overrides;
    set(trial);
    ex::ExperimentConfig probe = run->base;
    ex::apply_overrides(probe, trial);
    run->overrides = std::move(trial);
    run->output.reset();
  });
}

fraclap_status compute(fraclap_run* run) {
  if (!run) return fail(FRACLAP_ERROR_ARGUMENT, "null handle");
  return guarded([&] {
    run->output.reset();
    ex::ExperimentConfig config = run->base;
    ex::apply_overrides(config, run->overrides);
    ex::RunOutput output = ex::run(config);
    run->summary_text = output.summary.dump(2);
    run->config_text = ex::to_json(config).dump(2);
    run->hash = ex::config_hash(config);
    run->out_dir = config.output_dir;
    run->output = std::move(output);
  });
}

}  // namespace

extern "C" {

fraclap_status fraclap_run_create(const char* subcommand, const char* config_path, fraclap_run** out) {
  return create(subcommand, out, [](const char* p) { return ex::load_config(p); }, config_path);
}

fraclap_status fraclap_run_create_from_string(const char* subcommand, const char* config_json, fraclap_run** out) {
  return create(subcommand, out, [](const char* t) { return ex::parse_config_text(t); }, config_json);
}

void fraclap_run_destroy(fraclap_run* run) { delete run; }

fraclap_status fraclap_run_set_seed(fraclap_run* run, uint64_t seed) {
  return with_override(run, [&](ex::Overrides& o) { o.seed = seed; });
}

fraclap_status fraclap_run_set_output_dir(fraclap_run* run, const char* dir) {
  if (!dir) return fail(FRACLAP_ERROR_ARGUMENT, "null directory");
  return with_override(run, [&](ex::Overrides& o) { o.output_dir = dir; });
}

fraclap_status fraclap_run_set_sizes(fraclap_run* run, const uint64_t* sizes, size_t count) {
  if (!sizes && count > 0) return fail(FRACLAP_ERROR_ARGUMENT, "null sizes");
  return with_override(run, [&](ex::Overrides& o) { o.sizes = std::vector<std::size_t>(sizes, sizes + count); });
}

fraclap_status fraclap_run_set_algorithm(fraclap_run* run, const char* name) {
  if (!name) return fail(FRACLAP_ERROR_ARGUMENT, "null algorithm");
  return with_override(run, [&](ex::Overrides& o) { o.algorithm = name; });
}

fraclap_status fraclap_run_set_adam_standard(fraclap_run* run, int enabled) {
  return with_override(run, [&](ex::Overrides& o) { o.adam_standard = enabled != 0; });
}

fraclap_status fraclap_run_set_horizon(fraclap_run* run, double T) {
  return with_override(run, [&](ex::Overrides& o) { o.T = T; });
}

fraclap_status fraclap_run_set_min_time(fraclap_run* run, int enabled) {
  return with_override(run, [&](ex::Overrides& o) { o.min_time = enabled != 0; });
}

fraclap_status fraclap_run_compute(fraclap_run* run) { return compute(run); }

fraclap_status fraclap_run_execute(fraclap_run* run) {
  const fraclap_status status = compute(run);
  if (status != FRACLAP_OK) return status;
  try {
    ex::write_outputs(run->out_dir, *run->output);
  } catch (const std::exception& e) {
    return fail(FRACLAP_ERROR_IO, e.what());
  }
  return FRACLAP_OK;
}

size_t fraclap_run_file_count(const fraclap_run* run) {
  return run && run->output ? run->output->files.size() : 0;
}

const char* fraclap_run_file_name(const fraclap_run* run, size_t index) {
  if (!run || !run->output || index >= run->output->files.size()) return nullptr;
  return run->output->files[index].name.c_str();
}

const char* fraclap_run_file_content(const fraclap_run* run, size_t index) {
  if (!run || !run->output || index >= run->output->files.size()) return nullptr;
  return run->output->files[index].content.c_str();
}

const char* fraclap_run_summary_json(const fraclap_run* run) {
  return run && run->output ? run->summary_text.c_str() : nullptr;
}

const char* fraclap_run_config_json(const fraclap_run* run) {
  return run && run->output ? run->config_text.c_str() : nullptr;
}

const char* fraclap_run_config_hash(const fraclap_run* run) {
  return run && run->output ? run->hash.c_str() : nullptr;
}

const char* fraclap_run_output_dir(const fraclap_run* run) {
  return run && run->output ? run->out_dir.c_str() : nullptr;
}

fraclap_status fraclap_write_defaults(const char* dir) {
  if (!dir) return fail(FRACLAP_ERROR_ARGUMENT, "null directory");
  try {
    ex::RunOutput bundle;
    bundle.files = ex::bundled_defaults();
    ex::write_outputs(dir, bundle);
  } catch (const std::exception& e) {
    return fail(FRACLAP_ERROR_IO, e.what());
  }
  last_error.clear();
  return FRACLAP_OK;
}

const char* fraclap_last_error(void) { return last_error.c_str(); }

const char* fraclap_status_string(fraclap_status status) {
  switch (status) {
    case FRACLAP_OK: return "ok";
    case FRACLAP_ERROR_INTERNAL: return "internal error";
    case FRACLAP_ERROR_CONFIG: return "config error";
    case FRACLAP_ERROR_NUMERIC: return "numeric error";
    case FRACLAP_ERROR_IO: return "i/o error";
    case FRACLAP_ERROR_ARGUMENT: return "invalid argument";
  }
  return "unknown status";
}

const char* fraclap_build_id(void) {
  static const std::string id = ex::build_id();
  return id.c_str();
}

}  // extern "C"
