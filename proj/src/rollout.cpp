#include "evorace/rollout.hpp"

#include <cmath>

#include "evorace/errors.hpp"
#include "evorace/rng.hpp"
#include "evorace/worker_pool.hpp"

namespace evorace::rollout {

RolloutResult run(agent::Policy& policy, Environment& env,
                  std::uint64_t track_seed, const EvalConfig& config) {
  if (config.early_term_enabled && config.early_term_window < 1)
    throw ConfigError("early termination window must be >= 1");

  RolloutResult result;
  if (config.record_traces) result.traces.emplace();

  env.reset(track_seed);
  agent::MemoryState state;
  agent::Action prev_action;  // zero action feeds the first memory step
  RngStream sample_rng =
      RngStream::derive(track_seed, 0, StreamPurpose::kEval, 0x5A);

  int last_new_tile_frame = 0;
  for (int t = 0; t < config.frame_cap; ++t) {
    agent::Policy::StepExtras extras;
    const agent::Action action =
        policy.step(env.observation(), prev_action, state,
                    config.record_traces ? &extras : nullptr,
                    policy.mode() == agent::LatentMode::kSampled ? &sample_rng
                                                                 : nullptr);
    if (std::isnan(action.steer) || std::isnan(action.gas) ||
        std::isnan(action.brake)) {
      result.aborted = true;
      result.fitness = kDomainMinFitness;
      break;
    }
    const Environment::StepOutcome out = env.step(action);
    result.fitness += out.reward;
    result.frames += 1;
    if (config.record_traces) {
      Traces& tr = *result.traces;
      tr.latents.push_back(extras.z.z);
      double sum = 0.0;
      for (float v : state.h) sum += v;
      tr.hidden_means.push_back(sum / agent::kHiddenDim);
      tr.actions.push_back(action);
      tr.positions.push_back(env.has_state() ? env.car_position()
                                             : track::Vec2{});
    }
    prev_action = action;
    if (out.new_tile) last_new_tile_frame = result.frames;
    if (out.done) break;
    if (config.early_term_enabled &&
        result.frames - last_new_tile_frame >= config.early_term_window) {
      result.terminated_early = true;
      break;
    }
  }
  result.tiles_visited = env.tiles_visited();
  return result;
}

RolloutResult run(const agent::Genome& genome, std::uint64_t track_seed,
                  const EvalConfig& config,
                  const track::EnvParams& env_params) {
  agent::Policy policy(genome, config.latent_mode);
  NativeEnvironment env(env_params);
  return run(policy, env, track_seed, config);
}

GeneralizationReport evaluate_generalization(const agent::Genome& genome,
                                             int n_trials,
                                             std::uint64_t base_seed,
                                             const EvalConfig& config,
                                             const track::EnvParams& env_params,
                                             int workers) {
  if (n_trials < 1) throw ConfigError("generalization needs >= 1 trial");
  EvalConfig trial_config = config;
  // Scores reflect full episodes unless the strict window flag is set.
  trial_config.early_term_enabled = config.window_everywhere;
  trial_config.record_traces = false;

  GeneralizationReport report;
  report.per_trial.resize(n_trials);
  report.trial_seeds.resize(n_trials);
  for (int i = 0; i < n_trials; ++i)
    report.trial_seeds[i] =
        RngStream::derive(base_seed, 0, StreamPurpose::kGeneralization, i)
            .next_u64();

  WorkerPool pool(workers);
  pool.run(n_trials, [&](int i, int) {
    report.per_trial[i] =
        run(genome, report.trial_seeds[i], trial_config, env_params).fitness;
  });

  double sum = 0.0;
  for (double v : report.per_trial) sum += v;
  report.mean = sum / n_trials;
  if (n_trials > 1) {
    double ss = 0.0;
    for (double v : report.per_trial) ss += (v - report.mean) * (v - report.mean);
    report.stddev = std::sqrt(ss / (n_trials - 1));
  }
  report.solved = report.mean >= 900.0;
  return report;
}

}  // namespace evorace::rollout
