#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "evorace/agent.hpp"
#include "evorace/environment.hpp"
#include "evorace/track.hpp"

namespace evorace::rollout {

struct EvalConfig {
  int early_term_window = 20;     // consecutive steps without a new tile
  bool early_term_enabled = true;
  // Training-time economy by default; set to apply the window during elite
  // re-evaluation and generalization runs as well.
  bool window_everywhere = false;
  int frame_cap = 1000;
  bool record_traces = false;
  agent::LatentMode latent_mode = agent::LatentMode::kContinuous;
};

struct Traces {
  std::vector<std::array<float, agent::kLatentDim>> latents;
  std::vector<double> hidden_means;  // mean activation of h per step
  std::vector<agent::Action> actions;
  std::vector<track::Vec2> positions;
};

struct RolloutResult {
  double fitness = 0.0;  // cumulative reward over executed frames
  int frames = 0;
  int tiles_visited = -1;
  bool terminated_early = false;
  bool aborted = false;  // NaN action; fitness forced to the domain minimum
  std::optional<Traces> traces;
};

// Fitness assigned when an evaluation aborts; strictly below any score a
// legal episode can produce.
inline constexpr double kDomainMinFitness = -100.0;

// One full episode with the fixed per-step dataflow:
//   z_t = encode(frame_t); h_t = memory(z_t, a_{t-1}); a_t = act(z_t, h_t).
RolloutResult run(agent::Policy& policy, Environment& env,
                  std::uint64_t track_seed, const EvalConfig& config);

// Convenience form on a fresh native environment.
RolloutResult run(const agent::Genome& genome, std::uint64_t track_seed,
                  const EvalConfig& config, const track::EnvParams& env_params);

struct GeneralizationReport {
  double mean = 0.0;
  double stddev = 0.0;  // sample std; 0 when n = 1
  std::vector<double> per_trial;
  std::vector<std::uint64_t> trial_seeds;
  bool solved = false;  // mean >= 900
};

// Evaluates one genome on n fresh tracks with early termination disabled.
GeneralizationReport evaluate_generalization(const agent::Genome& genome,
                                             int n_trials,
                                             std::uint64_t base_seed,
                                             const EvalConfig& config,
                                             const track::EnvParams& env_params,
                                             int workers = 1);

}  // namespace evorace::rollout
