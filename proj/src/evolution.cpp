#include "evorace/evolution.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "evorace/errors.hpp"

namespace evorace::evo {

void EvolutionConfig::validate() const {
  if (population_size < 2 || population_size % 2 != 0)
    throw ConfigError("population_size must be even and >= 2");
  if (!(sigma > 0.0)) throw ConfigError("sigma must be > 0");
  if (generations < 1) throw ConfigError("generations must be >= 1");
  if (elite_candidates < 1 || elite_candidates > population_size)
    throw ConfigError("elite_candidates must be in [1, population_size]");
  if (elite_trials < 1) throw ConfigError("elite_trials must be >= 1");
  if (survival_fraction != 0.5)
    throw ConfigError("survival_fraction is fixed at 0.5");
  if (tournament_size != 2) throw ConfigError("tournament_size is fixed at 2");
  if (early_term_window < 1)
    throw ConfigError("early_term_window must be >= 1");
  if (fine_tune) {
    if (fine_tune->generations < 1)
      throw ConfigError("fine_tune.generations must be >= 1");
    if (!(fine_tune->sigma > 0.0))
      throw ConfigError("fine_tune.sigma must be > 0");
    if (fine_tune->elite_trials < 1)
      throw ConfigError("fine_tune.elite_trials must be >= 1");
  }
}

EvolutionConfig::PhaseParams EvolutionConfig::phase(int generation) const {
  if (fine_tune && generation >= generations)
    return {fine_tune->sigma, fine_tune->elite_trials, true};
  return {sigma, elite_trials, false};
}

namespace {

void add_noise(std::span<float> params, double sigma, RngStream& rng) {
  for (float& v : params)
    v = static_cast<float>(v + sigma * rng.normal());
}

}  // namespace

agent::Genome mutate_all(const agent::Genome& genome, double sigma,
                         RngStream& rng) {
  agent::Genome child = genome;
  add_noise(child.params, sigma, rng);
  return child;
}

agent::Genome mutate_mod(const agent::Genome& genome, double sigma,
                         RngStream& rng) {
  agent::Genome child = genome;
  const auto& part = agent::genome_partition();
  const nn::ParamSlice* slices[3] = {&part.vision, &part.memory,
                                     &part.controller};
  add_noise(child.slice(*slices[rng.below(3)]), sigma, rng);
  return child;
}

agent::Genome mutate_controller_only(const agent::Genome& genome, double sigma,
                                     RngStream& rng) {
  agent::Genome child = genome;
  add_noise(child.slice(agent::genome_partition().controller), sigma, rng);
  return child;
}

agent::Genome mutate(const agent::Genome& genome, MutationMode mode,
                     double sigma, RngStream& rng) {
  switch (mode) {
    case MutationMode::kAll:
      return mutate_all(genome, sigma, rng);
    case MutationMode::kMod:
    case MutationMode::kDiscreteMod:
      return mutate_mod(genome, sigma, rng);
    case MutationMode::kControllerOnly:
      return mutate_controller_only(genome, sigma, rng);
  }
  throw ConfigError("unknown mutation mode");
}

std::vector<Individual> init_population(const EvolutionConfig& config,
                                        std::uint64_t* lineage_counter) {
  config.validate();
  std::vector<Individual> population(config.population_size);
  for (int i = 0; i < config.population_size; ++i) {
    const std::uint64_t genome_seed =
        RngStream::derive(config.master_seed, 0, StreamPurpose::kGenomeInit, i)
            .next_u64();
    population[i].genome = agent::init_genome(genome_seed);
    population[i].lineage_id = (*lineage_counter)++;
  }
  return population;
}

// Fitness-descending order; exact ties resolve to the earlier population
// index so ranking never depends on sort internals.
static std::vector<int> ranked_indices(const std::vector<Individual>& pop) {
  std::vector<int> order(pop.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (pop[a].fitness != pop[b].fitness) return pop[a].fitness > pop[b].fitness;
    return a < b;
  });
  return order;
}

GenerationOutcome run_generation(std::vector<Individual>& population,
                                 int generation, const EvolutionConfig& config,
                                 const rollout::EvalConfig& eval_config,
                                 const EvalFn& eval_fn, WorkerPool& pool) {
  const int pop_size = static_cast<int>(population.size());
  if (pop_size == 0) throw OrchestrationError("empty population");
  const auto phase = config.phase(generation);

  // Phase 1: one rollout per individual on its own fresh track.
  rollout::EvalConfig train_eval = eval_config;
  train_eval.early_term_window = config.early_term_window;
  train_eval.latent_mode = config.latent_mode();
  std::vector<EvalOutcome> outcomes(pop_size);
  for (int i = 0; i < pop_size; ++i)
    population[i].eval_seed =
        RngStream::derive(config.master_seed, generation, StreamPurpose::kEval, i)
            .next_u64();
  pool.run(pop_size, [&](int i, int slot) {
    outcomes[i] =
        eval_fn(population[i].genome, population[i].eval_seed, train_eval, slot);
  });
  long frames = 0;
  for (int i = 0; i < pop_size; ++i) {
    population[i].fitness = outcomes[i].fitness;
    population[i].evaluated = true;
    frames += outcomes[i].frames;
  }

  const std::vector<int> order = ranked_indices(population);

  GenerationStats stats;
  stats.generation = generation;
  stats.best_single = population[order[0]].fitness;
  {
    double sum = 0.0;
    for (const auto& ind : population) sum += ind.fitness;
    stats.population_mean = sum / pop_size;
    double ss = 0.0;
    for (const auto& ind : population)
      ss += (ind.fitness - stats.population_mean) *
            (ind.fitness - stats.population_mean);
    stats.population_std = std::sqrt(ss / pop_size);
  }

  // Phase 2: re-estimate the top candidates on fresh tracks. Early
  // termination is a training-time economy only; elite averages feed
  // reported scores, so candidates run full episodes unless the strict
  // window flag is set.
  const int candidates = std::min(config.elite_candidates, pop_size);
  const int trials = phase.elite_trials;
  rollout::EvalConfig elite_eval = train_eval;
  elite_eval.early_term_enabled = eval_config.window_everywhere;
  std::vector<double> trial_fitness(static_cast<std::size_t>(candidates) * trials);
  std::vector<long> trial_frames(trial_fitness.size());
  pool.run(static_cast<int>(trial_fitness.size()), [&](int task, int slot) {
    const int candidate = task / trials;
    const std::uint64_t seed =
        RngStream::derive(config.master_seed, generation,
                          StreamPurpose::kEliteTrial, task)
            .next_u64();
    const EvalOutcome out =
        eval_fn(population[order[candidate]].genome, seed, elite_eval, slot);
    trial_fitness[task] = out.fitness;
    trial_frames[task] = out.frames;
  });
  for (long f : trial_frames) frames += f;

  int best_candidate = 0;
  double best_avg = -std::numeric_limits<double>::infinity();
  double best_std = 0.0;
  for (int c = 0; c < candidates; ++c) {
    double sum = 0.0;
    for (int t = 0; t < trials; ++t) sum += trial_fitness[c * trials + t];
    const double avg = sum / trials;
    double ss = 0.0;
    for (int t = 0; t < trials; ++t) {
      const double d = trial_fitness[c * trials + t] - avg;
      ss += d * d;
    }
    const double sd = trials > 1 ? std::sqrt(ss / (trials - 1)) : 0.0;
    if (avg > best_avg) {
      best_avg = avg;
      best_std = sd;
      best_candidate = c;
    }
  }

  GenerationOutcome out;
  out.elite_index = order[best_candidate];
  population[out.elite_index].fitness = kEliteSentinel;
  stats.elite_avg = best_avg;
  stats.elite_std = best_std;
  stats.rollout_count = pop_size + static_cast<long>(candidates) * trials;
  stats.frames = frames;
  out.stats = stats;
  return out;
}

std::vector<Individual> next_generation(const std::vector<Individual>& population,
                                        int generation,
                                        const EvolutionConfig& config,
                                        double sigma,
                                        std::uint64_t* lineage_counter) {
  const int pop_size = static_cast<int>(population.size());
  for (const auto& ind : population)
    if (!ind.evaluated)
      throw OrchestrationError("selection requires a fully evaluated population");

  const std::vector<int> order = ranked_indices(population);
  const int survivor_count = pop_size / 2;

  std::vector<Individual> next;
  next.reserve(pop_size);
  for (int i = 0; i < survivor_count; ++i) {
    Individual survivor = population[order[i]];
    survivor.evaluated = false;  // fitness is stale for the new generation
    next.push_back(std::move(survivor));
  }

  // Parents come from 2-way tournaments; the pool is the surviving top half
  // by default (or the full evaluated population behind the config flag).
  const bool full_pool = config.tournament_pool == TournamentPool::kFull;
  const int pool_size = full_pool ? pop_size : survivor_count;
  const int offspring_count = pop_size - survivor_count;
  for (int o = 0; o < offspring_count; ++o) {
    RngStream rng = RngStream::derive(config.master_seed, generation,
                                      StreamPurpose::kOffspring, o);
    const int pick_a = order[rng.below(pool_size)];
    const int pick_b = order[rng.below(pool_size)];
    const Individual& a = population[pick_a];
    const Individual& b = population[pick_b];
    // Higher fitness wins; exact ties go to the earlier population index.
    const Individual& parent =
        (a.fitness > b.fitness || (a.fitness == b.fitness && pick_a <= pick_b))
            ? a
            : b;
    Individual child;
    child.genome = mutate(parent.genome, config.mutation_mode, sigma, rng);
    child.lineage_id = (*lineage_counter)++;
    next.push_back(std::move(child));
  }
  return next;
}

const char* mutation_mode_name(MutationMode mode) {
  switch (mode) {
    case MutationMode::kAll: return "all";
    case MutationMode::kMod: return "mod";
    case MutationMode::kControllerOnly: return "controller_only";
    case MutationMode::kDiscreteMod: return "discrete_mod";
  }
  return "?";
}

const char* csv_header() {
  return "generation,best_single,elite_avg,elite_std,pop_mean,pop_std,"
         "rollouts,frames,wall_time_s";
}

std::string csv_row(const GenerationStats& s) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%d,%.6f,%.6f,%.6f,%.6f,%.6f,%ld,%ld,%.3f",
                s.generation, s.best_single, s.elite_avg, s.elite_std,
                s.population_mean, s.population_std, s.rollout_count, s.frames,
                s.wall_time_s);
  return buf;
}

}  // namespace evorace::evo
