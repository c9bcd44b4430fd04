#pragma once

#include <string>

#include "evorace/evolution.hpp"
#include "evorace/rollout.hpp"
#include "evorace/track.hpp"

namespace evorace {

// Everything a run needs, loadable from a sectioned key=value file.
// Unknown keys are rejected so typos cannot silently fall back to defaults.
struct RunConfig {
  evo::EvolutionConfig evolution;
  rollout::EvalConfig eval;
  track::EnvParams env;

  std::string env_mode = "native";  // native | external
  std::string external_command;

  int workers = 0;  // 0 = hardware concurrency
  std::string output_dir = "runs/out";
  int checkpoint_interval = 10;

  void validate() const;
};

RunConfig parse_config_text(const std::string& text);
RunConfig load_config(const std::string& path);

// Canonical rendering; parse(render(c)) reproduces c exactly.
std::string render_config(const RunConfig& config);

// The run protocol's published hyperparameters: population 200, sigma 0.01,
// module mutation, 1000 generations, 3x20 elite re-evaluation, window 20,
// and a 200-generation fine-tune phase at sigma 0.003 with 40 trials.
RunConfig paper_defaults();

}  // namespace evorace
