#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "evorace/agent.hpp"
#include "evorace/rng.hpp"
#include "evorace/rollout.hpp"
#include "evorace/worker_pool.hpp"

namespace evorace::evo {

inline constexpr double kEliteSentinel =
    std::numeric_limits<double>::infinity();

struct Individual {
  agent::Genome genome;
  double fitness = 0.0;
  bool evaluated = false;
  std::uint64_t eval_seed = 0;
  std::uint64_t lineage_id = 0;
};

enum class MutationMode { kAll, kMod, kControllerOnly, kDiscreteMod };
enum class TournamentPool { kSurvivors, kFull };

struct FineTunePhase {
  int generations = 200;
  double sigma = 0.003;
  int elite_trials = 40;
};

struct EvolutionConfig {
  int population_size = 200;
  double sigma = 0.01;
  MutationMode mutation_mode = MutationMode::kMod;
  int generations = 1000;
  int elite_candidates = 3;
  int elite_trials = 20;
  double survival_fraction = 0.5;  // fixed
  int tournament_size = 2;         // fixed
  std::optional<FineTunePhase> fine_tune;
  int early_term_window = 20;
  std::uint64_t master_seed = 0;
  TournamentPool tournament_pool = TournamentPool::kSurvivors;

  void validate() const;
  int total_generations() const {
    return generations + (fine_tune ? fine_tune->generations : 0);
  }

  struct PhaseParams {
    double sigma;
    int elite_trials;
    bool fine_tune_active;
  };
  // Mutation rate and elite re-estimation effort for a given generation;
  // the fine-tune phase takes over after the main run.
  PhaseParams phase(int generation) const;

  // Discrete latents are exactly the MUT-MOD treatment on a binarized
  // encoder, so the latent mode follows the mutation mode.
  agent::LatentMode latent_mode() const {
    return mutation_mode == MutationMode::kDiscreteMod
               ? agent::LatentMode::kDiscrete
               : agent::LatentMode::kContinuous;
  }
};

struct GenerationStats {
  int generation = 0;
  double best_single = 0.0;
  double elite_avg = 0.0;
  double elite_std = 0.0;
  double population_mean = 0.0;
  double population_std = 0.0;
  long rollout_count = 0;
  long frames = 0;
  double wall_time_s = 0.0;
};

// --- Mutation operators ----------------------------------------------------
// All return a perturbed copy; the input genome is never touched.

// Additive Gaussian noise on every parameter of all three components.
agent::Genome mutate_all(const agent::Genome& genome, double sigma,
                         RngStream& rng);
// Perturbs exactly one component chosen uniformly from
// {vision, memory, controller}; the other two stay bit-identical.
agent::Genome mutate_mod(const agent::Genome& genome, double sigma,
                         RngStream& rng);
// Perturbs the controller component only.
agent::Genome mutate_controller_only(const agent::Genome& genome, double sigma,
                                     RngStream& rng);

agent::Genome mutate(const agent::Genome& genome, MutationMode mode,
                     double sigma, RngStream& rng);

// --- Generation pipeline -----------------------------------------------------

struct EvalOutcome {
  double fitness = 0.0;
  long frames = 0;
  bool failed = false;
};

// Maps (genome, track seed, eval settings, worker slot) to one rollout.
using EvalFn = std::function<EvalOutcome(
    const agent::Genome&, std::uint64_t seed, const rollout::EvalConfig&, int)>;

struct GenerationOutcome {
  int elite_index = 0;  // position in the population after evaluation
  GenerationStats stats;
};

// Evaluates every individual once on a fresh track, re-evaluates the top
// candidates on elite_trials more tracks each (early termination off), and
// assigns the infinity sentinel to the best-average candidate.
GenerationOutcome run_generation(std::vector<Individual>& population,
                                 int generation, const EvolutionConfig& config,
                                 const rollout::EvalConfig& eval_config,
                                 const EvalFn& eval_fn, WorkerPool& pool);

// Truncation survival plus 2-way tournament offspring; no crossover exists
// anywhere in this pipeline. The elite's sentinel guarantees unmutated
// survival. Offspring o of generation g draws its randomness from the
// stream (master_seed, g, offspring, o).
std::vector<Individual> next_generation(const std::vector<Individual>& population,
                                        int generation,
                                        const EvolutionConfig& config,
                                        double sigma,
                                        std::uint64_t* lineage_counter);

std::vector<Individual> init_population(const EvolutionConfig& config,
                                        std::uint64_t* lineage_counter);

const char* mutation_mode_name(MutationMode mode);
const char* csv_header();  // generation log column names
std::string csv_row(const GenerationStats& stats);

}  // namespace evorace::evo
