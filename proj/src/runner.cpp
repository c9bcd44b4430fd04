#include "evorace/runner.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "evorace/errors.hpp"
#include "evorace/rollout.hpp"

namespace evorace {

namespace fs = std::filesystem;

namespace {

std::string checkpoint_name(int generation) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "ckpt_%06d.evc", generation);
  return buf;
}

}  // namespace

Runner::Runner(const RunConfig& config, bool force)
    : Runner(config, Checkpoint{}, /*fresh=*/true, force) {}

Runner::Runner(RunConfig config, Checkpoint state, bool fresh, bool force)
    : config_(std::move(config)), state_(std::move(state)) {
  config_.validate();
  const fs::path dir = config_.output_dir;
  log_path_ = (dir / "generations.csv").string();

  if (fresh) {
    if (fs::exists(dir) && !fs::is_empty(dir) && !force)
      throw UsageError("output directory '" + config_.output_dir +
                       "' already exists; pass --force to reuse it");
    fs::create_directories(dir / "checkpoints");
    std::ofstream snapshot(dir / "config.ini", std::ios::binary);
    snapshot << render_config(config_);
    state_.config_text = render_config(config_);
    std::uint64_t lineage = 0;
    state_.population = evo::init_population(config_.evolution, &lineage);
    state_.lineage_counter = lineage;
    state_.generation = 0;
    state_.elite_index = -1;
    state_.log_offset = 0;
  } else {
    fs::create_directories(dir / "checkpoints");
  }

  if (config_.env_mode == "external") {
    const int width = config_.workers > 0
                          ? config_.workers
                          : static_cast<int>(std::thread::hardware_concurrency());
    for (int i = 0; i < std::max(1, width); ++i)
      external_envs_.push_back(
          std::make_unique<ExternalEnvironment>(config_.external_command));
  }
  open_log();
}

Runner Runner::resume(const std::string& checkpoint_path,
                      std::optional<double> sigma_override,
                      std::optional<int> workers_override) {
  Checkpoint ckpt = load_checkpoint(checkpoint_path);
  RunConfig config = parse_config_text(ckpt.config_text);
  if (sigma_override) {
    std::fprintf(stderr,
                 "resume: sigma override %.6g replaces %.6g; starting a new "
                 "phase at generation %d\n",
                 *sigma_override, config.evolution.sigma, ckpt.generation);
    config.evolution.sigma = *sigma_override;
  }
  if (workers_override) config.workers = *workers_override;
  ckpt.config_text = render_config(config);
  return Runner(std::move(config), std::move(ckpt), /*fresh=*/false, false);
}

void Runner::open_log() {
  const fs::path path = log_path_;
  if (state_.generation == 0 && state_.log_offset == 0) {
    std::ofstream log(path, std::ios::binary | std::ios::trunc);
    if (!log) throw IoError("cannot create generation log: " + log_path_);
    log << evo::csv_header() << "\n";
    log.flush();
    log_bytes_ = static_cast<std::uint64_t>(log.tellp());
    state_.log_offset = log_bytes_;
  } else if (fs::exists(path)) {
    // Drop any rows written after the checkpoint so the continuation is
    // byte-identical to an uninterrupted run.
    fs::resize_file(path, state_.log_offset);
    log_bytes_ = state_.log_offset;
  } else {
    std::fprintf(stderr,
                 "resume: generation log missing, recreating %s (earlier rows "
                 "are lost)\n",
                 log_path_.c_str());
    std::ofstream log(path, std::ios::binary | std::ios::trunc);
    log << evo::csv_header() << "\n";
    log.flush();
    log_bytes_ = static_cast<std::uint64_t>(log.tellp());
  }
}

std::string Runner::elite_path() const {
  return (fs::path(config_.output_dir) / "elite.evg").string();
}

void Runner::write_checkpoint() {
  state_.log_offset = log_bytes_;
  const fs::path path = fs::path(config_.output_dir) / "checkpoints" /
                        checkpoint_name(state_.generation);
  save_checkpoint(path.string(), state_);
}

evo::EvalFn Runner::make_eval_fn() {
  if (config_.env_mode == "external") {
    return [this](const agent::Genome& genome, std::uint64_t seed,
                  const rollout::EvalConfig& eval, int slot) {
      evo::EvalOutcome out;
      try {
        agent::Policy policy(genome, eval.latent_mode);
        const rollout::RolloutResult r = rollout::run(
            policy, *external_envs_.at(slot), seed, eval);
        out.fitness = r.fitness;
        out.frames = r.frames;
        out.failed = r.aborted;
      } catch (const std::exception& e) {
        std::fprintf(stderr, "eval failed (seed %llu): %s\n",
                     static_cast<unsigned long long>(seed), e.what());
        out.fitness = rollout::kDomainMinFitness;
        out.failed = true;
      }
      return out;
    };
  }
  return [this](const agent::Genome& genome, std::uint64_t seed,
                const rollout::EvalConfig& eval, int) {
    evo::EvalOutcome out;
    try {
      const rollout::RolloutResult r =
          rollout::run(genome, seed, eval, config_.env);
      out.fitness = r.fitness;
      out.frames = r.frames;
      out.failed = r.aborted;
    } catch (const std::exception& e) {
      std::fprintf(stderr, "eval failed (seed %llu): %s\n",
                   static_cast<unsigned long long>(seed), e.what());
      out.fitness = rollout::kDomainMinFitness;
      out.failed = true;
    }
    return out;
  };
}

int Runner::run(const std::atomic<bool>* stop) {
  const int total = config_.evolution.total_generations();
  const int width = config_.workers > 0
                        ? config_.workers
                        : static_cast<int>(std::thread::hardware_concurrency());
  WorkerPool pool(std::max(1, width));
  const evo::EvalFn eval_fn = make_eval_fn();

  std::ofstream log(log_path_, std::ios::binary | std::ios::app);
  if (!log) throw IoError("cannot append to generation log: " + log_path_);

  rollout::EvalConfig eval = config_.eval;
  int last = state_.generation - 1;
  for (int g = state_.generation; g < total; ++g) {
    const auto t0 = std::chrono::steady_clock::now();
    evo::GenerationOutcome outcome = evo::run_generation(
        state_.population, g, config_.evolution, eval, eval_fn, pool);
    const auto phase = config_.evolution.phase(g);
    // Selection happens inside the wall-clock window too.
    std::vector<evo::Individual> next =
        evo::next_generation(state_.population, g, config_.evolution,
                             phase.sigma, &state_.lineage_counter);
    const agent::Genome elite_genome =
        state_.population[outcome.elite_index].genome;
    state_.population = std::move(next);
    state_.generation = g + 1;
    state_.elite_index = 0;  // the sentinel sorts first
    outcome.stats.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();

    const std::string row = evo::csv_row(outcome.stats) + "\n";
    log << row;
    log.flush();
    log_bytes_ += row.size();
    last = g;

    agent::save_genome(elite_path(), elite_genome);
    const bool interval_hit = ((g + 1) % config_.checkpoint_interval) == 0;
    const bool done = g + 1 == total;
    const bool interrupted = stop != nullptr && stop->load();
    if (interval_hit || done || interrupted) write_checkpoint();
    if (interrupted) {
      std::fprintf(stderr,
                   "interrupted after generation %d; checkpoint written\n", g);
      break;
    }
  }
  return last;
}

}  // namespace evorace
